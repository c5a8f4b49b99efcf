#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lyapcert/linalg.hpp"
#include "lyapcert/random.hpp"

namespace lyapcert {

// ---------------------------------------------------------------------------
// state triples
// ---------------------------------------------------------------------------

/// (X, Y, Z) = (position, velocity, acceleration), each an n-vector.
struct State {
    Vec X, Y, Z;

    State() = default;
    State(Vec x, Vec y, Vec z) : X(std::move(x)), Y(std::move(y)), Z(std::move(z)) {
        if (X.size() != Y.size() || X.size() != Z.size())
            throw input_error("State: X, Y, Z must share a dimension");
    }

    static State zero(int n) {
        return State(Vec(static_cast<std::size_t>(n), 0.0), Vec(static_cast<std::size_t>(n), 0.0),
                     Vec(static_cast<std::size_t>(n), 0.0));
    }

    int n() const { return static_cast<int>(X.size()); }

    bool finite() const { return all_finite(X) && all_finite(Y) && all_finite(Z); }

    double norm_sq() const { return lyapcert::norm_sq(X) + lyapcert::norm_sq(Y) + lyapcert::norm_sq(Z); }
    double norm() const { return std::sqrt(norm_sq()); }
};

inline Vec pack(const State& s) {
    const int n = s.n();
    Vec v(static_cast<std::size_t>(3 * n));
    for (int i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = s.X[static_cast<std::size_t>(i)];
        v[static_cast<std::size_t>(n + i)] = s.Y[static_cast<std::size_t>(i)];
        v[static_cast<std::size_t>(2 * n + i)] = s.Z[static_cast<std::size_t>(i)];
    }
    return v;
}

inline State unpack(int n, const double* v) {
    State s = State::zero(n);
    for (int i = 0; i < n; ++i) {
        s.X[static_cast<std::size_t>(i)] = v[i];
        s.Y[static_cast<std::size_t>(i)] = v[n + i];
        s.Z[static_cast<std::size_t>(i)] = v[2 * n + i];
    }
    return s;
}

/// (ψ, η, τ) = componentwise difference of two solution triples.
struct DifferenceState {
    Vec psi, eta, tau;

    DifferenceState() = default;
    DifferenceState(Vec p, Vec e, Vec t)
        : psi(std::move(p)), eta(std::move(e)), tau(std::move(t)) {
        if (psi.size() != eta.size() || psi.size() != tau.size())
            throw input_error("DifferenceState: components must share a dimension");
    }

    int n() const { return static_cast<int>(psi.size()); }
};

// ---------------------------------------------------------------------------
// system definition
// ---------------------------------------------------------------------------

/// Construction-time probes of the structural assumptions; violations are
/// recorded here, never turned into construction failures.
struct SystemFlags {
    bool h_zero_at_origin = true;    // ‖H(0)‖ ≤ 1e-12
    double h_origin_norm = 0.0;
    bool p_periodic = true;          // ‖P(t+ω,·) − P(t,·)‖ ≤ 1e-9 at sampled points
    double p_period_defect = 0.0;
    bool p_time_only = true;         // P(t, X, Y, Z) independent of (X, Y, Z) at sampled points
    double p_state_dependence = 0.0;
};

/// The system x''' + F(x,x',x'')x'' + G(x,x')x' + H(x) = P(t,x,x',x'') in the
/// first-order variables (X, Y, Z), together with the constant comparison
/// matrices A, B of the energy function and the forcing period ω.
///
/// Fields are evaluated through callbacks that write into caller-owned
/// buffers; integration loops run allocation-free.
class SystemDef {
public:
    using MatFn3 = std::function<void(const double* X, const double* Y, const double* Z, SymMatrix&)>;
    using MatFn2 = std::function<void(const double* X, const double* Y, SymMatrix&)>;
    using VecFn1 = std::function<void(const double* X, double*)>;
    using ForcingFn =
        std::function<void(double t, const double* X, const double* Y, const double* Z, double*)>;

    SystemDef(int n, MatFn3 F, MatFn2 G, VecFn1 H, ForcingFn P, double omega,
              std::optional<SymMatrix> A, std::optional<SymMatrix> B, double eps,
              std::string family)
        : n_(n),
          omega_(omega),
          eps_(eps),
          F_(std::move(F)),
          G_(std::move(G)),
          H_(std::move(H)),
          P_(std::move(P)),
          family_(std::move(family)) {
        if (n_ < 1 || n_ > 16) throw input_error("SystemDef: dimension must be in [1, 16]");
        if (!(omega_ > 0.0)) throw input_error("SystemDef: omega must be positive");
        if (!(eps_ > 0.0) || eps_ > 1.0) throw input_error("SystemDef: eps must lie in (0, 1]");

        const Vec zero(static_cast<std::size_t>(n_), 0.0);
        SymMatrix f0(n_), g0(n_);
        eval_F(zero.data(), zero.data(), zero.data(), f0);
        eval_G(zero.data(), zero.data(), g0);

        const double offset = 0.25 * std::sqrt(eps_);
        if (A) {
            if (A->n() != n_) throw input_error("SystemDef: A has wrong dimension");
            A_ = *A;
        } else {
            A_ = f0 - offset * SymMatrix::identity(n_);
        }
        if (B) {
            if (B->n() != n_) throw input_error("SystemDef: B has wrong dimension");
            B_ = *B;
        } else {
            B_ = g0 - offset * SymMatrix::identity(n_);
        }

        probe_structure();
    }

    int n() const { return n_; }
    double omega() const { return omega_; }
    double eps() const { return eps_; }
    const SymMatrix& A() const { return A_; }
    const SymMatrix& B() const { return B_; }
    const SystemFlags& flags() const { return flags_; }
    const std::string& family() const { return family_; }

    void eval_F(const double* X, const double* Y, const double* Z, SymMatrix& out) const {
        if (out.n() != n_) out = SymMatrix(n_);
        F_(X, Y, Z, out);
        if (!all_finite(out.entries())) throw eval_error("F", "SystemDef: F produced a non-finite entry");
    }

    void eval_G(const double* X, const double* Y, SymMatrix& out) const {
        if (out.n() != n_) out = SymMatrix(n_);
        G_(X, Y, out);
        if (!all_finite(out.entries())) throw eval_error("G", "SystemDef: G produced a non-finite entry");
    }

    void eval_H(const double* X, double* out) const {
        H_(X, out);
        if (!all_finite(out, static_cast<std::size_t>(n_)))
            throw eval_error("H", "SystemDef: H produced a non-finite entry");
    }

    void eval_P(double t, const double* X, const double* Y, const double* Z, double* out) const {
        P_(t, X, Y, Z, out);
        if (!all_finite(out, static_cast<std::size_t>(n_)))
            throw eval_error("P", "SystemDef: P produced a non-finite entry");
    }

private:
    void probe_structure() {
        const std::size_t un = static_cast<std::size_t>(n_);
        Vec h0(un, 0.0);
        const Vec zero(un, 0.0);
        eval_H(zero.data(), h0.data());
        flags_.h_origin_norm = norm(h0);
        flags_.h_zero_at_origin = flags_.h_origin_norm <= 1e-12;

        // Forcing probes on a deterministic sample cloud.
        SplitMix64 rng(0xA5A5A5A5ull);
        const int n_states = 8, n_times = 5;
        Vec p_a(un), p_b(un);
        std::vector<Vec> xs, ys, zs;
        for (int k = 0; k < n_states; ++k) {
            Vec x(un), y(un), z(un);
            for (std::size_t i = 0; i < un; ++i) {
                x[i] = rng.uniform(-1.0, 1.0);
                y[i] = rng.uniform(-1.0, 1.0);
                z[i] = rng.uniform(-1.0, 1.0);
            }
            xs.push_back(x);
            ys.push_back(y);
            zs.push_back(z);
        }
        double period_defect = 0.0, state_dep = 0.0, p_scale = 0.0;
        for (int j = 0; j < n_times; ++j) {
            const double t = 0.3 + 0.9 * omega_ * j / n_times;
            for (int k = 0; k < n_states; ++k) {
                eval_P(t, xs[k].data(), ys[k].data(), zs[k].data(), p_a.data());
                p_scale = std::max(p_scale, norm(p_a));
                eval_P(t + omega_, xs[k].data(), ys[k].data(), zs[k].data(), p_b.data());
                double d = 0.0;
                for (std::size_t i = 0; i < un; ++i) d += (p_a[i] - p_b[i]) * (p_a[i] - p_b[i]);
                period_defect = std::max(period_defect, std::sqrt(d));
                eval_P(t, zero.data(), zero.data(), zero.data(), p_b.data());
                d = 0.0;
                for (std::size_t i = 0; i < un; ++i) d += (p_a[i] - p_b[i]) * (p_a[i] - p_b[i]);
                state_dep = std::max(state_dep, std::sqrt(d));
            }
        }
        flags_.p_period_defect = period_defect;
        flags_.p_periodic = period_defect <= 1e-9 * (1.0 + p_scale);
        flags_.p_state_dependence = state_dep;
        flags_.p_time_only = state_dep <= 1e-9 * (1.0 + p_scale);
    }

    int n_ = 0;
    double omega_ = 0.0;
    double eps_ = 1e-4;
    MatFn3 F_;
    MatFn2 G_;
    VecFn1 H_;
    ForcingFn P_;
    SymMatrix A_, B_;
    SystemFlags flags_;
    std::string family_;
};

// ---------------------------------------------------------------------------
// right-hand sides
// ---------------------------------------------------------------------------

/// Scratch buffers for one right-hand-side evaluation; reuse across calls.
struct RhsWorkspace {
    SymMatrix F, G;
    Vec H, P, tmp;

    void resize(int n) {
        const std::size_t un = static_cast<std::size_t>(n);
        if (F.n() != n) F = SymMatrix(n);
        if (G.n() != n) G = SymMatrix(n);
        H.assign(un, 0.0);
        P.assign(un, 0.0);
        tmp.assign(un, 0.0);
    }
};

/// ds = (Y, Z, −F(X,Y,Z)Z − G(X,Y)Y − H(X) + P(t,X,Y,Z)) on packed storage.
inline void eval_rhs_into(const SystemDef& sys, double t, const double* s, double* ds,
                          RhsWorkspace& ws) {
    const int n = sys.n();
    const double* X = s;
    const double* Y = s + n;
    const double* Z = s + 2 * n;
    for (int i = 0; i < n; ++i) {
        ds[i] = Y[i];
        ds[n + i] = Z[i];
    }
    sys.eval_F(X, Y, Z, ws.F);
    sys.eval_G(X, Y, ws.G);
    sys.eval_H(X, ws.H.data());
    sys.eval_P(t, X, Y, Z, ws.P.data());
    ws.F.apply_into(Z, ds + 2 * n);          // F Z
    ws.G.apply_into(Y, ws.tmp.data());       // G Y
    for (int i = 0; i < n; ++i)
        ds[2 * n + i] = -ds[2 * n + i] - ws.tmp[static_cast<std::size_t>(i)] -
                        ws.H[static_cast<std::size_t>(i)] + ws.P[static_cast<std::size_t>(i)];
}

/// Convenience form returning a fresh packed 3n-vector.
inline Vec eval_rhs(const SystemDef& sys, double t, const State& s) {
    if (s.n() != sys.n()) throw input_error("eval_rhs: state dimension mismatch");
    if (!s.finite()) throw input_error("eval_rhs: non-finite state");
    RhsWorkspace ws;
    ws.resize(sys.n());
    const Vec packed = pack(s);
    Vec ds(packed.size());
    eval_rhs_into(sys, t, packed.data(), ds.data(), ws);
    return ds;
}

/// The idealized difference dynamics with F, G, H evaluated at the difference
/// variables themselves: (η, τ, −F(ψ,η,τ)τ − G(ψ,η)η − H(ψ)). This is not the
/// subtraction of two solution copies unless F and G are constant; the paired
/// integration in integrate.hpp supplies the ground truth.
inline Vec difference_rhs(const SystemDef& sys, const DifferenceState& d) {
    if (d.n() != sys.n()) throw input_error("difference_rhs: dimension mismatch");
    if (!all_finite(d.psi) || !all_finite(d.eta) || !all_finite(d.tau))
        throw input_error("difference_rhs: non-finite difference state");
    const int n = sys.n();
    RhsWorkspace ws;
    ws.resize(n);
    Vec ds(static_cast<std::size_t>(3 * n));
    for (int i = 0; i < n; ++i) {
        ds[static_cast<std::size_t>(i)] = d.eta[static_cast<std::size_t>(i)];
        ds[static_cast<std::size_t>(n + i)] = d.tau[static_cast<std::size_t>(i)];
    }
    sys.eval_F(d.psi.data(), d.eta.data(), d.tau.data(), ws.F);
    sys.eval_G(d.psi.data(), d.eta.data(), ws.G);
    sys.eval_H(d.psi.data(), ws.H.data());
    ws.F.apply_into(d.tau.data(), ds.data() + 2 * n);
    ws.G.apply_into(d.eta.data(), ws.tmp.data());
    for (int i = 0; i < n; ++i)
        ds[static_cast<std::size_t>(2 * n + i)] =
            -ds[static_cast<std::size_t>(2 * n + i)] - ws.tmp[static_cast<std::size_t>(i)] -
            ws.H[static_cast<std::size_t>(i)];
    return ds;
}

// ---------------------------------------------------------------------------
// secant operator
// ---------------------------------------------------------------------------

/// Central-difference Jacobian of H at `point`, step max(1e-6, 1e-6·|coord|).
inline Matrix fd_jacobian_h(const SystemDef& sys, const Vec& point) {
    const int n = sys.n();
    Matrix J(n);
    Vec p = point, hp(static_cast<std::size_t>(n)), hm(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double xj = point[static_cast<std::size_t>(j)];
        const double h = std::max(1e-6, 1e-6 * std::abs(xj));
        p[static_cast<std::size_t>(j)] = xj + h;
        sys.eval_H(p.data(), hp.data());
        p[static_cast<std::size_t>(j)] = xj - h;
        sys.eval_H(p.data(), hm.data());
        p[static_cast<std::size_t>(j)] = xj;
        for (int i = 0; i < n; ++i)
            J.at(i, j) = (hp[static_cast<std::size_t>(i)] - hm[static_cast<std::size_t>(i)]) / (2.0 * h);
    }
    return J;
}

/// Averaged Jacobian Â(X,Y) = ∫₀¹ J_H(Y + s(X−Y)) ds by Gauss-Legendre
/// quadrature, so that Â(X,Y)(X−Y) = H(X) − H(Y) up to quadrature and
/// finite-difference error. Equal arguments collapse to the Jacobian at the
/// point. The result is returned as evaluated; callers that need eigenvalue
/// information symmetrize and also look at asymmetry_norm(), since nothing
/// forces a general H to have a symmetric Jacobian.
inline Matrix secant_operator(const SystemDef& sys, const Vec& X, const Vec& Yv,
                              int quad_order = 8, double residual_rel_tol = 1e-6) {
    const int n = sys.n();
    if (static_cast<int>(X.size()) != n || static_cast<int>(Yv.size()) != n)
        throw input_error("secant_operator: dimension mismatch");
    if (quad_order < 1) throw input_error("secant_operator: quad_order must be >= 1");

    Vec nodes, weights;
    gauss_legendre_01(quad_order, nodes, weights);

    Matrix acc(n);
    Vec point(static_cast<std::size_t>(n));
    for (int q = 0; q < quad_order; ++q) {
        const double s = nodes[static_cast<std::size_t>(q)];
        for (int i = 0; i < n; ++i)
            point[static_cast<std::size_t>(i)] =
                Yv[static_cast<std::size_t>(i)] +
                s * (X[static_cast<std::size_t>(i)] - Yv[static_cast<std::size_t>(i)]);
        const Matrix J = fd_jacobian_h(sys, point);
        const double w = weights[static_cast<std::size_t>(q)];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc.at(i, j) += w * J(i, j);
    }

    // The defining identity must hold; a violation means the quadrature or the
    // finite differences are not resolving H.
    Vec hx(static_cast<std::size_t>(n)), hy(static_cast<std::size_t>(n));
    sys.eval_H(X.data(), hx.data());
    sys.eval_H(Yv.data(), hy.data());
    Vec diff(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        diff[static_cast<std::size_t>(i)] =
            X[static_cast<std::size_t>(i)] - Yv[static_cast<std::size_t>(i)];
    Vec adx = acc.apply(diff);
    double res = 0.0, rhs_scale = 0.0;
    for (int i = 0; i < n; ++i) {
        const double want = hx[static_cast<std::size_t>(i)] - hy[static_cast<std::size_t>(i)];
        res += (adx[static_cast<std::size_t>(i)] - want) * (adx[static_cast<std::size_t>(i)] - want);
        rhs_scale += want * want;
    }
    res = std::sqrt(res);
    if (res > residual_rel_tol * (1.0 + std::sqrt(rhs_scale)))
        throw secant_residual_error("secant_operator: identity residual " + std::to_string(res) +
                                        " exceeds tolerance",
                                    res);
    return acc;
}

// ---------------------------------------------------------------------------
// built-in system families
// ---------------------------------------------------------------------------

constexpr double kDefaultEps = 1e-4;
constexpr double kTwoPi = 6.283185307179586;

/// Constant coefficient matrices with sinusoidal forcing:
/// x''' + F0 x'' + G0 x' + H0 x = amp·cos(nu·t + w).
struct LinearConstantParams {
    SymMatrix F0, G0, H0;
    Vec amp;          // forcing amplitude vector; empty means zero forcing
    double nu = 1.0;  // forcing angular frequency
    double w = 0.0;   // forcing phase
};

inline SystemDef make_linear_constant(const LinearConstantParams& p, double omega,
                                      std::optional<SymMatrix> A = std::nullopt,
                                      std::optional<SymMatrix> B = std::nullopt,
                                      double eps = kDefaultEps) {
    const int n = p.F0.n();
    if (p.G0.n() != n || p.H0.n() != n)
        throw input_error("linear-constant: F0, G0, H0 must share a dimension");
    Vec amp = p.amp;
    if (amp.empty()) amp.assign(static_cast<std::size_t>(n), 0.0);
    if (static_cast<int>(amp.size()) != n)
        throw input_error("linear-constant: amp has wrong dimension");

    SymMatrix F0 = p.F0, G0 = p.G0, H0 = p.H0;
    const double nu = p.nu, w = p.w;
    return SystemDef(
        n,
        [F0](const double*, const double*, const double*, SymMatrix& out) { out = F0; },
        [G0](const double*, const double*, SymMatrix& out) { out = G0; },
        [H0, n](const double* X, double* out) { H0.apply_into(X, out); },
        [amp, nu, w, n](double t, const double*, const double*, const double*, double* out) {
            const double c = std::cos(nu * t + w);
            for (int i = 0; i < n; ++i) out[i] = amp[static_cast<std::size_t>(i)] * c;
        },
        omega, std::move(A), std::move(B), eps, "linear-constant");
}

/// Scalar third-order equation x''' + a x'' + b x' + c x = amp·cos(nu t + w)
/// as a 1-dimensional system.
inline SystemDef make_scalar_linear(double a, double b, double c, double amp, double nu,
                                    double w, double omega,
                                    std::optional<SymMatrix> A = std::nullopt,
                                    std::optional<SymMatrix> B = std::nullopt,
                                    double eps = kDefaultEps) {
    LinearConstantParams p;
    p.F0 = SymMatrix::diagonal({a});
    p.G0 = SymMatrix::diagonal({b});
    p.H0 = SymMatrix::diagonal({c});
    p.amp = {amp};
    p.nu = nu;
    p.w = w;
    return make_linear_constant(p, omega, std::move(A), std::move(B), eps);
}

enum class Example4Forcing { xyz_cos, time_only, none };

/// The two-dimensional worked example: diagonal F and G growing quadratically
/// in the first components, H = (x², 2x²), forcing proportional to
/// xyz·cos(t + w), or its state-independent / zero variants for experiments.
struct Example4Params {
    double w = 0.0;
    Example4Forcing forcing = Example4Forcing::xyz_cos;
};

inline SystemDef make_example4(const Example4Params& p, double omega = kTwoPi,
                               std::optional<SymMatrix> A = std::nullopt,
                               std::optional<SymMatrix> B = std::nullopt,
                               double eps = kDefaultEps) {
    const double w = p.w;
    const Example4Forcing mode = p.forcing;
    return SystemDef(
        2,
        [](const double* X, const double* Y, const double* Z, SymMatrix& out) {
            const double q = X[0] * X[0] + Y[0] * Y[0] + Z[0] * Z[0];
            out.set(0, 0, 2.0 + q);
            out.set(1, 1, 2.0 * (2.0 + q));
            out.set(0, 1, 0.0);
        },
        [](const double* X, const double* Y, SymMatrix& out) {
            const double q = X[0] * X[0] + Y[0] * Y[0];
            out.set(0, 0, 1.0 + q);
            out.set(1, 1, 2.0 * (1.0 + q));
            out.set(0, 1, 0.0);
        },
        [](const double* X, double* out) {
            out[0] = X[0] * X[0];
            out[1] = 2.0 * X[0] * X[0];
        },
        [w, mode](double t, const double* X, const double* Y, const double* Z, double* out) {
            double f = 0.0;
            switch (mode) {
                case Example4Forcing::xyz_cos: f = X[0] * Y[0] * Z[0] * std::cos(t + w); break;
                case Example4Forcing::time_only: f = std::cos(t + w); break;
                case Example4Forcing::none: f = 0.0; break;
            }
            out[0] = f;
            out[1] = 2.0 * f;
        },
        omega, std::move(A), std::move(B), eps, "example4");
}

/// Diagonal polynomial family: F_ii = f0 + f1 x_i² + f2 y_i² + f3 z_i²,
/// G_ii = g0 + g1 x_i² + g2 y_i², H_i = h_lin x_i + h_cub x_i³, sinusoidal
/// time-only forcing.
struct DiagonalPolynomialParams {
    double f_coef[4] = {2.0, 1.0, 1.0, 1.0};
    double g_coef[3] = {1.0, 1.0, 1.0};
    double h_lin = 1.0;
    double h_cub = 1.0;
    Vec amp;
    double nu = 1.0;
    double w = 0.0;
};

inline SystemDef make_diagonal_polynomial(int n, const DiagonalPolynomialParams& p, double omega,
                                          std::optional<SymMatrix> A = std::nullopt,
                                          std::optional<SymMatrix> B = std::nullopt,
                                          double eps = kDefaultEps) {
    Vec amp = p.amp;
    if (amp.empty()) amp.assign(static_cast<std::size_t>(n), 0.0);
    if (static_cast<int>(amp.size()) != n)
        throw input_error("diagonal-polynomial: amp has wrong dimension");
    const double f0 = p.f_coef[0], f1 = p.f_coef[1], f2 = p.f_coef[2], f3 = p.f_coef[3];
    const double g0 = p.g_coef[0], g1 = p.g_coef[1], g2 = p.g_coef[2];
    const double hl = p.h_lin, hc = p.h_cub;
    const double nu = p.nu, w = p.w;
    return SystemDef(
        n,
        [f0, f1, f2, f3, n](const double* X, const double* Y, const double* Z, SymMatrix& out) {
            for (int i = 0; i < n; ++i)
                out.set(i, i, f0 + f1 * X[i] * X[i] + f2 * Y[i] * Y[i] + f3 * Z[i] * Z[i]);
        },
        [g0, g1, g2, n](const double* X, const double* Y, SymMatrix& out) {
            for (int i = 0; i < n; ++i) out.set(i, i, g0 + g1 * X[i] * X[i] + g2 * Y[i] * Y[i]);
        },
        [hl, hc, n](const double* X, double* out) {
            for (int i = 0; i < n; ++i) out[i] = hl * X[i] + hc * X[i] * X[i] * X[i];
        },
        [amp, nu, w, n](double t, const double*, const double*, const double*, double* out) {
            const double c = std::cos(nu * t + w);
            for (int i = 0; i < n; ++i) out[i] = amp[static_cast<std::size_t>(i)] * c;
        },
        omega, std::move(A), std::move(B), eps, "diagonal-polynomial");
}

}  // namespace lyapcert
