#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lyapcert/linalg.hpp"
#include "lyapcert/random.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

// ---------------------------------------------------------------------------
// sampling domain
// ---------------------------------------------------------------------------

/// Axis-aligned box in the 3n state coordinates, sampled by a full tensor
/// grid (m points per axis, total capped at 1e6 points) plus r uniform random
/// points. Every theorem condition is quantified over all of R^n in the
/// source material; a box with dense sampling is the computable surrogate and
/// is recorded in every report.
struct DomainBox {
    std::vector<std::pair<double, double>> x_bounds, y_bounds, z_bounds;  // n intervals each
    int grid_m = 5;
    int random_r = 64;
    std::uint64_t seed = 1;

    static DomainBox cube(int n, double radius, int m = 5, int r = 64, std::uint64_t seed = 1) {
        DomainBox b;
        b.x_bounds.assign(static_cast<std::size_t>(n), {-radius, radius});
        b.y_bounds = b.x_bounds;
        b.z_bounds = b.x_bounds;
        b.grid_m = m;
        b.random_r = r;
        b.seed = seed;
        return b;
    }

    int n() const { return static_cast<int>(x_bounds.size()); }

    void validate(int sys_n) const {
        if (n() != sys_n || static_cast<int>(y_bounds.size()) != sys_n ||
            static_cast<int>(z_bounds.size()) != sys_n)
            throw input_error("DomainBox: bounds must have one interval per coordinate");
        auto check = [](const std::vector<std::pair<double, double>>& b, const char* name) {
            for (const auto& [lo, hi] : b) {
                if (!(lo < hi)) throw input_error(std::string("DomainBox: ") + name +
                                                  " interval must have lower < upper");
                if (!std::isfinite(lo) || !std::isfinite(hi))
                    throw input_error("DomainBox: non-finite bound");
            }
        };
        check(x_bounds, "x");
        check(y_bounds, "y");
        check(z_bounds, "z");
        if (grid_m < 2) throw input_error("DomainBox: grid_m must be >= 2");
        if (random_r < 0) throw input_error("DomainBox: random_r must be >= 0");
    }

    /// Largest per-axis count m' ≤ grid_m with m'^axes ≤ 1e6.
    int effective_m(int axes) const {
        int m = grid_m;
        auto total = [axes](int mm) {
            double t = 1.0;
            for (int a = 0; a < axes; ++a) {
                t *= mm;
                if (t > 1e6) return t;
            }
            return t;
        };
        while (m > 2 && total(m) > 1e6) --m;
        return m;
    }
};

namespace detail {

/// Odometer over a tensor grid; calls visit(coords) for every point.
inline void tensor_grid(const std::vector<std::pair<double, double>>& bounds, int m,
                        const std::function<void(const Vec&)>& visit) {
    const int axes = static_cast<int>(bounds.size());
    std::vector<int> idx(static_cast<std::size_t>(axes), 0);
    Vec coords(static_cast<std::size_t>(axes));
    std::vector<Vec> ticks;
    ticks.reserve(static_cast<std::size_t>(axes));
    for (const auto& [lo, hi] : bounds) ticks.push_back(linspace(lo, hi, m));
    while (true) {
        for (int a = 0; a < axes; ++a)
            coords[static_cast<std::size_t>(a)] =
                ticks[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
        visit(coords);
        int a = 0;
        for (; a < axes; ++a) {
            if (++idx[static_cast<std::size_t>(a)] < m) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
        if (a == axes) break;
    }
}

inline Vec random_point(const std::vector<std::pair<double, double>>& bounds, SplitMix64& rng) {
    Vec v(bounds.size());
    for (std::size_t i = 0; i < bounds.size(); ++i)
        v[i] = rng.uniform(bounds[i].first, bounds[i].second);
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// spectral bounds
// ---------------------------------------------------------------------------

/// Extremes of every spectrum the theorem constrains, sampled over a box,
/// plus the commutation and secant-symmetry diagnostics that hypothesis (ii)
/// needs. Violations are carried as values and flags, never clamped.
struct SpectralBounds {
    int n = 0;
    // δa/Δa over λ(A) ∪ λ(F(samples)); δb/Δb over λ(B) ∪ λ(G(samples)).
    double delta_a = 0.0, Delta_a = 0.0;
    double delta_b = 0.0, Delta_b = 0.0;
    // Secant spectrum extremes over one-sided A(X,0) and pairwise A(X,X') samples.
    double delta_h = 0.0, Delta_h = 0.0;
    // Sandwich terms λ(F−A), λ(G−B).
    double fa_min = 0.0, fa_max = 0.0;
    double gb_min = 0.0, gb_max = 0.0;
    // Spectrum extremes of F and G alone (positivity of hypothesis (ii)).
    double f_min = 0.0, f_max = 0.0;
    double g_min = 0.0, g_max = 0.0;
    // Largest relative commutator norms over sampled pairs.
    double comm_ff = 0.0, comm_gg = 0.0, comm_fg = 0.0, comm_fa = 0.0, comm_ga = 0.0;
    // Largest relative asymmetry of a sampled secant operator.
    double secant_asymmetry = 0.0;
    // k variants and the ε budget.
    double k_printed = 0.0, k_proof = 0.0;
    double sqrt_eps_budget = 0.0;
    double eps = 0.0;
    // Structural flags copied from the system probes.
    bool h_zero_at_origin = true;
    double h_origin_norm = 0.0;
    bool p_periodic = true;
    double p_period_defect = 0.0;
    bool p_time_only = true;
    // Sampling provenance.
    long grid_points = 0;
    long random_points = 0;
    int effective_m = 0;
    std::uint64_t seed = 0;
};

/// Fills k_printed, k_proof and the √ε budget from the δ/Δ fields.
inline void compute_derived_bounds(SpectralBounds& b) {
    b.k_printed = std::min(0.5, b.delta_b / (b.delta_a * b.Delta_a));
    b.k_proof = 0.125 * b.k_printed;
    b.sqrt_eps_budget = std::min(std::min(b.delta_b * b.delta_h / (4.0 * b.Delta_b + 4.0),
                                          b.delta_a * b.delta_b / (6.0 * b.Delta_a + 7.0)),
                                 std::min(0.5 * b.delta_a, 1.0));
}

inline SpectralBounds spectral_bounds(const SystemDef& sys, const DomainBox& box) {
    box.validate(sys.n());
    const int n = sys.n();
    SpectralBounds out;
    out.n = n;
    out.eps = sys.eps();
    out.seed = box.seed;
    out.h_zero_at_origin = sys.flags().h_zero_at_origin;
    out.h_origin_norm = sys.flags().h_origin_norm;
    out.p_periodic = sys.flags().p_periodic;
    out.p_period_defect = sys.flags().p_period_defect;
    out.p_time_only = sys.flags().p_time_only;

    const double inf = std::numeric_limits<double>::infinity();
    double f_lo = inf, f_hi = -inf, g_lo = inf, g_hi = -inf;
    double fa_lo = inf, fa_hi = -inf, gb_lo = inf, gb_hi = -inf;
    double h_lo = inf, h_hi = -inf;

    SymMatrix fbuf(n), gbuf(n);
    RhsWorkspace ws;
    ws.resize(n);

    // Keep a small stride of sampled matrices for pairwise commutator checks.
    std::vector<SymMatrix> f_samples, g_samples;
    std::vector<Matrix> secants;
    const std::size_t max_kept = 24;

    auto comm_rel = [](const SymMatrix& a, const SymMatrix& b) {
        const double s = std::max(a.frob_norm() * b.frob_norm(), 1e-300);
        return commutator_norm(a, b) / s;
    };

    auto take_f = [&](const Vec& X, const Vec& Y, const Vec& Z) {
        sys.eval_F(X.data(), Y.data(), Z.data(), fbuf);
        const Spectrum sp = sym_eigenvalues(fbuf);
        f_lo = std::min(f_lo, sp.min());
        f_hi = std::max(f_hi, sp.max());
        const Spectrum spa = sym_eigenvalues(fbuf - sys.A());
        fa_lo = std::min(fa_lo, spa.min());
        fa_hi = std::max(fa_hi, spa.max());
        if (f_samples.size() < max_kept) f_samples.push_back(fbuf);
    };
    auto take_g = [&](const Vec& X, const Vec& Y) {
        sys.eval_G(X.data(), Y.data(), gbuf);
        const Spectrum sp = sym_eigenvalues(gbuf);
        g_lo = std::min(g_lo, sp.min());
        g_hi = std::max(g_hi, sp.max());
        const Spectrum spb = sym_eigenvalues(gbuf - sys.B());
        gb_lo = std::min(gb_lo, spb.min());
        gb_hi = std::max(gb_hi, spb.max());
        if (g_samples.size() < max_kept) g_samples.push_back(gbuf);
    };
    auto take_secant = [&](const Vec& X, const Vec& Yv) {
        const Matrix sec = secant_operator(sys, X, Yv);
        const double scale = std::max(sec.frob_norm(), 1e-300);
        out.secant_asymmetry = std::max(out.secant_asymmetry, sec.asymmetry_norm() / scale);
        const Spectrum sp = sym_eigenvalues(sec.symmetric_part());
        h_lo = std::min(h_lo, sp.min());
        h_hi = std::max(h_hi, sp.max());
        if (secants.size() < max_kept) secants.push_back(sec);
    };

    // F over the full 3n grid; G over the (X,Y) marginal; secants over the X
    // marginal against the origin.
    const int m_f = box.effective_m(3 * n);
    const int m_g = box.effective_m(2 * n);
    const int m_h = box.effective_m(n);
    out.effective_m = m_f;

    std::vector<std::pair<double, double>> xyz = box.x_bounds;
    xyz.insert(xyz.end(), box.y_bounds.begin(), box.y_bounds.end());
    xyz.insert(xyz.end(), box.z_bounds.begin(), box.z_bounds.end());
    std::vector<std::pair<double, double>> xy = box.x_bounds;
    xy.insert(xy.end(), box.y_bounds.begin(), box.y_bounds.end());

    long grid_count = 0;
    detail::tensor_grid(xyz, m_f, [&](const Vec& c) {
        const Vec X(c.begin(), c.begin() + n);
        const Vec Y(c.begin() + n, c.begin() + 2 * n);
        const Vec Z(c.begin() + 2 * n, c.end());
        take_f(X, Y, Z);
        ++grid_count;
    });
    detail::tensor_grid(xy, m_g, [&](const Vec& c) {
        const Vec X(c.begin(), c.begin() + n);
        const Vec Y(c.begin() + n, c.end());
        take_g(X, Y);
    });
    const Vec origin(static_cast<std::size_t>(n), 0.0);
    detail::tensor_grid(box.x_bounds, m_h, [&](const Vec& X) { take_secant(X, origin); });
    out.grid_points = grid_count;

    // Random samples: full states for F/G, plus pairwise secants.
    SplitMix64 rng(box.seed);
    Vec x_prev;
    for (int k = 0; k < box.random_r; ++k) {
        const Vec X = detail::random_point(box.x_bounds, rng);
        const Vec Y = detail::random_point(box.y_bounds, rng);
        const Vec Z = detail::random_point(box.z_bounds, rng);
        take_f(X, Y, Z);
        take_g(X, Y);
        take_secant(X, origin);
        if (!x_prev.empty()) take_secant(X, x_prev);
        x_prev = X;
    }
    out.random_points = box.random_r;

    // Hypothesis (ii): F and G commute with themselves (across sample points),
    // with each other, and with the secant operator.
    std::vector<SymMatrix> secants_sym;
    secants_sym.reserve(secants.size());
    for (const auto& s : secants) secants_sym.push_back(s.symmetric_part());
    for (std::size_t i = 0; i + 1 < f_samples.size(); ++i)
        out.comm_ff = std::max(out.comm_ff, comm_rel(f_samples[i], f_samples[i + 1]));
    for (std::size_t i = 0; i + 1 < g_samples.size(); ++i)
        out.comm_gg = std::max(out.comm_gg, comm_rel(g_samples[i], g_samples[i + 1]));
    for (std::size_t i = 0; i < std::min(f_samples.size(), g_samples.size()); ++i)
        out.comm_fg = std::max(out.comm_fg, comm_rel(f_samples[i], g_samples[i]));
    for (std::size_t i = 0; i < secants_sym.size(); ++i) {
        if (i < f_samples.size())
            out.comm_fa = std::max(out.comm_fa, comm_rel(f_samples[i], secants_sym[i]));
        if (i < g_samples.size())
            out.comm_ga = std::max(out.comm_ga, comm_rel(g_samples[i], secants_sym[i]));
    }

    out.f_min = f_lo;
    out.f_max = f_hi;
    out.g_min = g_lo;
    out.g_max = g_hi;
    out.fa_min = fa_lo;
    out.fa_max = fa_hi;
    out.gb_min = gb_lo;
    out.gb_max = gb_hi;
    out.delta_h = h_lo;
    out.Delta_h = h_hi;

    const Spectrum spa = sym_eigenvalues(sys.A());
    const Spectrum spb = sym_eigenvalues(sys.B());
    out.delta_a = std::min(spa.min(), f_lo);
    out.Delta_a = std::max(spa.max(), f_hi);
    out.delta_b = std::min(spb.min(), g_lo);
    out.Delta_b = std::max(spb.max(), g_hi);

    compute_derived_bounds(out);
    return out;
}

// ---------------------------------------------------------------------------
// forcing bounds
// ---------------------------------------------------------------------------

/// Envelopes for the two admissible forcing growth bounds: the linear one
/// ‖P‖ ≤ δ0 + δ1(‖X‖+‖Y‖+‖Z‖) and the quadratic-mean alternative
/// ‖P‖ ≤ θ1(t) + θ2(t)·(‖X‖²+‖Y‖²+‖Z‖²)^½ with θ1 < α0, θ2 < α1.
struct ForcingBound {
    double delta_0 = 0.0;
    double delta_1 = 0.0;
    double alpha_0 = 0.0;
    double alpha_1 = 0.0;
};

inline ForcingBound forcing_bound_fit(const SystemDef& sys, const DomainBox& box,
                                      int t_samples = 8) {
    box.validate(sys.n());
    if (t_samples < 2) throw input_error("forcing_bound_fit: t_samples must be >= 2");
    const int n = sys.n();
    const std::size_t un = static_cast<std::size_t>(n);

    Vec t_grid(static_cast<std::size_t>(t_samples));
    for (int k = 0; k < t_samples; ++k)
        t_grid[static_cast<std::size_t>(k)] = sys.omega() * k / t_samples;

    const Vec origin(un, 0.0);
    Vec p(un);

    // Pass 1: δ0 = α0 = envelope of ‖P(t, 0, 0, 0)‖ over the period.
    ForcingBound fb;
    Vec theta1(static_cast<std::size_t>(t_samples), 0.0);
    for (int k = 0; k < t_samples; ++k) {
        sys.eval_P(t_grid[static_cast<std::size_t>(k)], origin.data(), origin.data(), origin.data(),
                   p.data());
        theta1[static_cast<std::size_t>(k)] = norm(p);
        fb.delta_0 = std::max(fb.delta_0, theta1[static_cast<std::size_t>(k)]);
    }
    fb.alpha_0 = fb.delta_0;

    // Pass 2: slope envelopes over grid + random states, restricted to
    // samples with state norm at least 1 so near-zero denominators cannot
    // blow the estimate up.
    const int axes = 3 * n;
    const int m = box.effective_m(axes);
    std::vector<std::pair<double, double>> xyz = box.x_bounds;
    xyz.insert(xyz.end(), box.y_bounds.begin(), box.y_bounds.end());
    xyz.insert(xyz.end(), box.z_bounds.begin(), box.z_bounds.end());

    auto absorb = [&](const Vec& c) {
        const double* X = c.data();
        const double* Y = c.data() + n;
        const double* Z = c.data() + 2 * n;
        double s1 = 0.0, s2 = 0.0;
        double nx = 0.0, ny = 0.0, nz = 0.0;
        for (int i = 0; i < n; ++i) {
            nx += X[i] * X[i];
            ny += Y[i] * Y[i];
            nz += Z[i] * Z[i];
        }
        s1 = std::sqrt(nx) + std::sqrt(ny) + std::sqrt(nz);
        s2 = std::sqrt(nx + ny + nz);
        for (int k = 0; k < t_samples; ++k) {
            sys.eval_P(t_grid[static_cast<std::size_t>(k)], X, Y, Z, p.data());
            const double pn = norm(p);
            if (s1 >= 1.0) fb.delta_1 = std::max(fb.delta_1, (pn - fb.delta_0) / s1);
            if (s2 >= 1.0)
                fb.alpha_1 =
                    std::max(fb.alpha_1, (pn - theta1[static_cast<std::size_t>(k)]) / s2);
        }
    };

    detail::tensor_grid(xyz, m, absorb);
    SplitMix64 rng(box.seed ^ 0x50f0f0f0ull);
    for (int k = 0; k < box.random_r; ++k) {
        Vec c = detail::random_point(box.x_bounds, rng);
        const Vec y = detail::random_point(box.y_bounds, rng);
        const Vec z = detail::random_point(box.z_bounds, rng);
        c.insert(c.end(), y.begin(), y.end());
        c.insert(c.end(), z.begin(), z.end());
        absorb(c);
    }
    fb.delta_1 = std::max(fb.delta_1, 0.0);
    fb.alpha_1 = std::max(fb.alpha_1, 0.0);
    return fb;
}

// ---------------------------------------------------------------------------
// condition report
// ---------------------------------------------------------------------------

/// One theorem hypothesis, with strict and non-strict verdicts where the
/// source mixes them.
struct ConditionVerdict {
    bool strict = false;
    bool non_strict = false;
};

struct ConditionReport {
    SpectralBounds bounds;

    ConditionVerdict secant_positive;      // 0 < δh (strict) / 0 ≤ δh
    bool product_bound_printed = false;    // Δh ≤ k_printed δa δb
    bool product_bound_proof = false;      // Δh ≤ k_proof δa δb
    ConditionVerdict sandwich_fa_lower;    // 0 < λ(F−A)
    bool sandwich_fa_upper = false;        // λ(F−A) ≤ √ε/2
    ConditionVerdict sandwich_gb_lower;
    bool sandwich_gb_upper = false;
    bool eps_in_range = false;             // 0 < ε ≤ 1
    bool eps_within_budget = false;        // √ε ≤ min{...}
    bool f_positive = false;               // λ(F) > 0 over samples
    bool g_positive = false;
    bool a_positive = false;               // δa > 0 (min over λ(A), λ(F))
    bool b_positive = false;
    bool commutation_ok = false;
    bool secant_symmetric = false;
    bool h_zero_at_origin = false;
    bool p_periodic = false;

    double commutation_tol = 1e-9;
    bool overall = false;
};

/// Independent pass/fail per condition; `overall` takes the conservative side
/// of every resolved ambiguity (proof k, strict inequalities).
inline ConditionReport check_theorem_conditions(const SpectralBounds& b) {
    ConditionReport r;
    r.bounds = b;

    r.secant_positive.strict = b.delta_h > 0.0;
    r.secant_positive.non_strict = b.delta_h >= 0.0;

    r.product_bound_printed = b.Delta_h <= b.k_printed * b.delta_a * b.delta_b;
    r.product_bound_proof = b.Delta_h <= b.k_proof * b.delta_a * b.delta_b;

    const double half_sqrt_eps = 0.5 * std::sqrt(b.eps);
    r.sandwich_fa_lower.strict = b.fa_min > 0.0;
    r.sandwich_fa_lower.non_strict = b.fa_min >= 0.0;
    r.sandwich_fa_upper = b.fa_max <= half_sqrt_eps;
    r.sandwich_gb_lower.strict = b.gb_min > 0.0;
    r.sandwich_gb_lower.non_strict = b.gb_min >= 0.0;
    r.sandwich_gb_upper = b.gb_max <= half_sqrt_eps;

    r.eps_in_range = b.eps > 0.0 && b.eps <= 1.0;
    r.eps_within_budget = std::sqrt(b.eps) <= b.sqrt_eps_budget;

    r.f_positive = b.f_min > 0.0;
    r.g_positive = b.g_min > 0.0;
    r.a_positive = b.delta_a > 0.0;
    r.b_positive = b.delta_b > 0.0;

    const double ctol = r.commutation_tol;
    r.commutation_ok = b.comm_ff <= ctol && b.comm_gg <= ctol && b.comm_fg <= ctol &&
                       b.comm_fa <= ctol && b.comm_ga <= ctol;
    r.secant_symmetric = b.secant_asymmetry <= 1e-6;

    r.h_zero_at_origin = b.h_zero_at_origin;
    r.p_periodic = b.p_periodic;

    r.overall = r.secant_positive.strict && r.product_bound_proof &&
                r.sandwich_fa_lower.strict && r.sandwich_fa_upper &&
                r.sandwich_gb_lower.strict && r.sandwich_gb_upper && r.eps_in_range &&
                r.eps_within_budget && r.f_positive && r.g_positive && r.a_positive &&
                r.b_positive && r.commutation_ok && r.secant_symmetric && r.h_zero_at_origin &&
                r.p_periodic;
    return r;
}

}  // namespace lyapcert
