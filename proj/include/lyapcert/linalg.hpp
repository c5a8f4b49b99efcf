#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lyapcert/errors.hpp"

namespace lyapcert {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// small vector helpers
// ---------------------------------------------------------------------------

inline bool all_finite(const double* p, std::size_t m) {
    for (std::size_t i = 0; i < m; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

inline bool all_finite(const Vec& v) { return all_finite(v.data(), v.size()); }

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

inline Vec linspace(double lo, double hi, int m) {
    Vec v(static_cast<std::size_t>(m));
    if (m == 1) {
        v[0] = 0.5 * (lo + hi);
        return v;
    }
    for (int i = 0; i < m; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (m - 1);
    return v;
}

// ---------------------------------------------------------------------------
// SymMatrix: dense real symmetric matrix, row-major storage
// ---------------------------------------------------------------------------

/// Symmetrized on construction: entries become (M + Mᵀ)/2, and an input whose
/// asymmetry exceeds `asym_tol` relative to its largest entry is rejected
/// instead of silently averaged.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(int n) : n_(n), e_(static_cast<std::size_t>(n) * n, 0.0) {
        if (n <= 0) throw input_error("SymMatrix: dimension must be positive");
    }

    SymMatrix(int n, const Vec& row_major, double asym_tol = 1e-9) : SymMatrix(n) {
        if (row_major.size() != e_.size())
            throw input_error("SymMatrix: entry count does not match dimension");
        if (!all_finite(row_major)) throw input_error("SymMatrix: non-finite entry");
        double scale = 0.0, asym = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                scale = std::max(scale, std::abs(row_major[idx(i, j)]));
                asym = std::max(asym, std::abs(row_major[idx(i, j)] - row_major[idx(j, i)]));
            }
        if (asym > asym_tol * std::max(scale, 1e-300))
            throw input_error("SymMatrix: input asymmetry " + std::to_string(asym) +
                              " exceeds tolerance");
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                e_[idx(i, j)] = 0.5 * (row_major[idx(i, j)] + row_major[idx(j, i)]);
    }

    static SymMatrix identity(int n) {
        SymMatrix m(n);
        for (int i = 0; i < n; ++i) m.e_[m.idx(i, i)] = 1.0;
        return m;
    }

    static SymMatrix diagonal(const Vec& d) {
        SymMatrix m(static_cast<int>(d.size()));
        for (int i = 0; i < m.n_; ++i) m.e_[m.idx(i, i)] = d[static_cast<std::size_t>(i)];
        return m;
    }

    int n() const { return n_; }
    bool empty() const { return n_ == 0; }

    double operator()(int i, int j) const { return e_[idx(i, j)]; }

    /// Writes (i,j) and (j,i); the only mutation path, so symmetry is exact.
    void set(int i, int j, double v) {
        e_[idx(i, j)] = v;
        e_[idx(j, i)] = v;
    }

    const Vec& entries() const { return e_; }

    void apply_into(const double* x, double* y) const {
        for (int i = 0; i < n_; ++i) {
            double s = 0.0;
            const double* row = e_.data() + static_cast<std::size_t>(i) * n_;
            for (int j = 0; j < n_; ++j) s += row[j] * x[j];
            y[i] = s;
        }
    }

    Vec apply(const Vec& x) const {
        if (static_cast<int>(x.size()) != n_)
            throw input_error("SymMatrix::apply: dimension mismatch");
        Vec y(x.size());
        apply_into(x.data(), y.data());
        return y;
    }

    double frob_norm() const {
        double s = 0.0;
        for (double v : e_) s += v * v;
        return std::sqrt(s);
    }

    double trace() const {
        double s = 0.0;
        for (int i = 0; i < n_; ++i) s += e_[idx(i, i)];
        return s;
    }

    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
        check_dims(a, b, "operator+");
        SymMatrix r(a.n_);
        for (std::size_t k = 0; k < r.e_.size(); ++k) r.e_[k] = a.e_[k] + b.e_[k];
        return r;
    }

    friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
        check_dims(a, b, "operator-");
        SymMatrix r(a.n_);
        for (std::size_t k = 0; k < r.e_.size(); ++k) r.e_[k] = a.e_[k] - b.e_[k];
        return r;
    }

    friend SymMatrix operator*(double c, const SymMatrix& a) {
        SymMatrix r(a.n_);
        for (std::size_t k = 0; k < r.e_.size(); ++k) r.e_[k] = c * a.e_[k];
        return r;
    }

private:
    static void check_dims(const SymMatrix& a, const SymMatrix& b, const char* what) {
        if (a.n_ != b.n_) throw input_error(std::string("SymMatrix::") + what + ": dimension mismatch");
    }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

    int n_ = 0;
    Vec e_;
};

// ---------------------------------------------------------------------------
// Matrix: dense square matrix without symmetry guarantees
// ---------------------------------------------------------------------------

/// Used where symmetry is not structural: secant operators of arbitrary H,
/// products of symmetric matrices, finite-difference period-map Jacobians.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(int n) : n_(n), e_(static_cast<std::size_t>(n) * n, 0.0) {
        if (n <= 0) throw input_error("Matrix: dimension must be positive");
    }

    int n() const { return n_; }
    double& at(int i, int j) { return e_[idx(i, j)]; }
    double operator()(int i, int j) const { return e_[idx(i, j)]; }

    static Matrix product(const SymMatrix& a, const SymMatrix& b) {
        if (a.n() != b.n()) throw input_error("Matrix::product: dimension mismatch");
        Matrix r(a.n());
        for (int i = 0; i < a.n(); ++i)
            for (int j = 0; j < a.n(); ++j) {
                double s = 0.0;
                for (int k = 0; k < a.n(); ++k) s += a(i, k) * b(k, j);
                r.at(i, j) = s;
            }
        return r;
    }

    void apply_into(const double* x, double* y) const {
        for (int i = 0; i < n_; ++i) {
            double s = 0.0;
            const double* row = e_.data() + static_cast<std::size_t>(i) * n_;
            for (int j = 0; j < n_; ++j) s += row[j] * x[j];
            y[i] = s;
        }
    }

    Vec apply(const Vec& x) const {
        if (static_cast<int>(x.size()) != n_) throw input_error("Matrix::apply: dimension mismatch");
        Vec y(x.size());
        apply_into(x.data(), y.data());
        return y;
    }

    double frob_norm() const {
        double s = 0.0;
        for (double v : e_) s += v * v;
        return std::sqrt(s);
    }

    /// ‖M − Mᵀ‖_F, the departure from symmetry.
    double asymmetry_norm() const {
        double s = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j) {
                const double d = e_[idx(i, j)] - e_[idx(j, i)];
                s += 2.0 * d * d;
            }
        return std::sqrt(s);
    }

    /// (M + Mᵀ)/2 without an asymmetry rejection.
    SymMatrix symmetric_part() const {
        SymMatrix r(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                r.set(i, j, 0.5 * (e_[idx(i, j)] + e_[idx(j, i)]));
        return r;
    }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

    int n_ = 0;
    Vec e_;
};

// ---------------------------------------------------------------------------
// eigenvalues
// ---------------------------------------------------------------------------

/// All eigenvalues of a symmetric matrix, ascending.
struct Spectrum {
    Vec values;
    double min() const { return values.front(); }
    double max() const { return values.back(); }
};

/// Cyclic Jacobi rotations. The off-diagonal Frobenius norm is driven below
/// 1e-14·‖M‖_F; at the n ≤ 16 sizes this library targets that takes a handful
/// of sweeps and is accurate to a few ulps.
inline Spectrum sym_eigenvalues(const SymMatrix& M) {
    const int n = M.n();
    if (n == 0) throw input_error("sym_eigenvalues: empty matrix");
    Vec a = M.entries();
    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };

    double frob = 0.0;
    for (double v : a) frob += v * v;
    frob = std::sqrt(frob);
    const double thresh = 1e-14 * frob;

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s += 2.0 * at(i, j) * at(i, j);
        return std::sqrt(s);
    };

    const int max_sweeps = 30;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= thresh) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::abs(apq) <= thresh / (n * n)) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double app = at(p, p), aqq = at(q, q);
                at(p, p) = app - t * apq;
                at(q, q) = aqq + t * apq;
                at(p, q) = 0.0;
                at(q, p) = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (i == p || i == q) continue;
                    const double aip = at(i, p), aiq = at(i, q);
                    at(i, p) = aip - s * (aiq + tau * aip);
                    at(p, i) = at(i, p);
                    at(i, q) = aiq + s * (aip - tau * aiq);
                    at(q, i) = at(i, q);
                }
            }
        }
    }
    if (sweep == max_sweeps && off_norm() > thresh)
        throw numeric_error("sym_eigenvalues: Jacobi iteration did not converge in 30 sweeps");

    Spectrum sp;
    sp.values.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) sp.values[static_cast<std::size_t>(i)] = at(i, i);
    std::sort(sp.values.begin(), sp.values.end());
    return sp;
}

// ---------------------------------------------------------------------------
// quadratic forms and commutators
// ---------------------------------------------------------------------------

/// ⟨Mx, x⟩.
inline double quadratic_form(const SymMatrix& M, const Vec& x) {
    if (static_cast<int>(x.size()) != M.n())
        throw input_error("quadratic_form: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < M.n(); ++i) {
        double row = 0.0;
        for (int j = 0; j < M.n(); ++j) row += M(i, j) * x[static_cast<std::size_t>(j)];
        s += row * x[static_cast<std::size_t>(i)];
    }
    return s;
}

/// Frobenius norm of QD − DQ; zero (to rounding) iff Q and D commute.
inline double commutator_norm(const SymMatrix& Q, const SymMatrix& D) {
    if (Q.n() != D.n()) throw input_error("commutator_norm: dimension mismatch");
    const Matrix qd = Matrix::product(Q, D);
    // (QD)ᵀ = DQ for symmetric Q, D, so ‖QD − DQ‖_F is the asymmetry of QD.
    return qd.asymmetry_norm();
}

/// Bracket checks for products and sums of commuting symmetric matrices:
/// every eigenvalue of QD must lie between the extreme pairwise products
/// λj(Q)λk(D), and every eigenvalue of Q+D between the extreme sums.
struct LemmaBoundsReport {
    double commutator = 0.0;
    Vec lambda_q, lambda_d, lambda_qd, lambda_sum;
    double product_lo = 0.0, product_hi = 0.0;
    double sum_lo = 0.0, sum_hi = 0.0;
    bool product_ok = false;
    bool sum_ok = false;
    bool pass = false;
};

inline LemmaBoundsReport check_lemma_bounds(const SymMatrix& Q, const SymMatrix& D,
                                            double comm_rel_tol = 1e-9,
                                            double slack = 1e-9) {
    if (Q.n() != D.n()) throw input_error("check_lemma_bounds: dimension mismatch");
    LemmaBoundsReport rep;
    rep.commutator = commutator_norm(Q, D);
    const double comm_scale = std::max(Q.frob_norm() * D.frob_norm(), 1e-300);
    if (rep.commutator > comm_rel_tol * comm_scale)
        throw input_error("check_lemma_bounds: inputs do not commute (relative commutator " +
                          std::to_string(rep.commutator / comm_scale) + ")");

    rep.lambda_q = sym_eigenvalues(Q).values;
    rep.lambda_d = sym_eigenvalues(D).values;

    // Commuting product is symmetric up to rounding.
    rep.lambda_qd = sym_eigenvalues(Matrix::product(Q, D).symmetric_part()).values;
    rep.lambda_sum = sym_eigenvalues(Q + D).values;

    const double qlo = rep.lambda_q.front(), qhi = rep.lambda_q.back();
    const double dlo = rep.lambda_d.front(), dhi = rep.lambda_d.back();
    const double corners[4] = {qlo * dlo, qlo * dhi, qhi * dlo, qhi * dhi};
    rep.product_lo = *std::min_element(corners, corners + 4);
    rep.product_hi = *std::max_element(corners, corners + 4);
    rep.sum_lo = qlo + dlo;
    rep.sum_hi = qhi + dhi;

    const double pscale = std::max({std::abs(rep.product_lo), std::abs(rep.product_hi), 1.0});
    const double sscale = std::max({std::abs(rep.sum_lo), std::abs(rep.sum_hi), 1.0});
    rep.product_ok = true;
    for (double l : rep.lambda_qd)
        if (l < rep.product_lo - slack * pscale || l > rep.product_hi + slack * pscale)
            rep.product_ok = false;
    rep.sum_ok = true;
    for (double l : rep.lambda_sum)
        if (l < rep.sum_lo - slack * sscale || l > rep.sum_hi + slack * sscale)
            rep.sum_ok = false;
    rep.pass = rep.product_ok && rep.sum_ok;
    return rep;
}

/// Rayleigh-quotient bracket δd‖x‖² ≤ ⟨Dx,x⟩ ≤ Δd‖x‖² for one vector.
struct Lemma1Report {
    double value = 0.0;
    double lower = 0.0, upper = 0.0;
    bool pass = false;
};

inline Lemma1Report check_lemma1(const SymMatrix& D, const Vec& x, double slack = 1e-9) {
    Lemma1Report rep;
    const Spectrum sp = sym_eigenvalues(D);
    const double x2 = norm_sq(x);
    rep.value = quadratic_form(D, x);
    rep.lower = sp.min() * x2;
    rep.upper = sp.max() * x2;
    const double scale = std::max({std::abs(rep.lower), std::abs(rep.upper), 1.0});
    rep.pass = rep.value >= rep.lower - slack * scale && rep.value <= rep.upper + slack * scale;
    return rep;
}

// ---------------------------------------------------------------------------
// linear solves (Newton steps, small n)
// ---------------------------------------------------------------------------

/// Gaussian elimination with partial pivoting. Throws on a numerically
/// singular pivot.
inline Vec lu_solve(Matrix A, Vec b) {
    const int n = A.n();
    if (static_cast<int>(b.size()) != n) throw input_error("lu_solve: dimension mismatch");
    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(A(i, j)));
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(A(i, k)) > std::abs(A(piv, k))) piv = i;
        if (std::abs(A(piv, k)) <= 1e-300 + 1e-15 * scale)
            throw numeric_error("lu_solve: matrix is numerically singular");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A.at(k, j), A.at(piv, j));
            std::swap(b[static_cast<std::size_t>(k)], b[static_cast<std::size_t>(piv)]);
        }
        for (int i = k + 1; i < n; ++i) {
            const double f = A(i, k) / A(k, k);
            A.at(i, k) = 0.0;
            for (int j = k + 1; j < n; ++j) A.at(i, j) -= f * A(k, j);
            b[static_cast<std::size_t>(i)] -= f * b[static_cast<std::size_t>(k)];
        }
    }
    Vec x(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j) s -= A(i, j) * x[static_cast<std::size_t>(j)];
        x[static_cast<std::size_t>(i)] = s / A(i, i);
    }
    return x;
}

/// 2-norm condition number estimate via eigenvalues of AᵀA.
inline double condition_estimate(const Matrix& A) {
    const int n = A.n();
    SymMatrix ata(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += A(k, i) * A(k, j);
            ata.set(i, j, s);
        }
    const Spectrum sp = sym_eigenvalues(ata);
    const double smax = std::sqrt(std::max(sp.max(), 0.0));
    const double smin = std::sqrt(std::max(sp.min(), 0.0));
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

/// Largest singular value.
inline double spectral_norm(const Matrix& A) {
    const int n = A.n();
    SymMatrix ata(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += A(k, i) * A(k, j);
            ata.set(i, j, s);
        }
    return std::sqrt(std::max(sym_eigenvalues(ata).max(), 0.0));
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature on [0, 1]
// ---------------------------------------------------------------------------

/// Nodes and weights by Newton iteration on the Legendre polynomial roots.
inline void gauss_legendre_01(int order, Vec& nodes, Vec& weights) {
    if (order < 1) throw input_error("gauss_legendre_01: order must be >= 1");
    nodes.assign(static_cast<std::size_t>(order), 0.0);
    weights.assign(static_cast<std::size_t>(order), 0.0);
    const double pi = 3.14159265358979323846;
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p_prev = 1.0, p = x;
            for (int j = 2; j <= order; ++j) {
                const double p_next = ((2.0 * j - 1.0) * x * p - (j - 1.0) * p_prev) / j;
                p_prev = p;
                p = p_next;
            }
            dp = order * (x * p - p_prev) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const std::size_t a = static_cast<std::size_t>(i);
        const std::size_t b = static_cast<std::size_t>(order - 1 - i);
        nodes[a] = 0.5 * (1.0 - x);
        nodes[b] = 0.5 * (1.0 + x);
        const double w = 1.0 / ((1.0 - x * x) * dp * dp);  // already scaled to [0,1]
        weights[a] = w;
        weights[b] = w;
    }
}

}  // namespace lyapcert
