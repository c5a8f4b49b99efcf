#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lyapcert/integrate.hpp"
#include "lyapcert/linalg.hpp"
#include "lyapcert/random.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

// ---------------------------------------------------------------------------
// periodic orbits by Poincaré-map shooting
// ---------------------------------------------------------------------------

struct OrbitResult {
    State s_star;
    double residual = std::numeric_limits<double>::infinity();  // ‖Φ_ω(s*) − s*‖
    int newton_iters = 0;
    bool converged = false;
    double tol = 0.0;
    std::optional<double> floquet_radius;  // largest singular value of dΦ_ω, diagnostic only
};

/// Shooting options: the flow tolerances must resolve better than the Newton
/// tolerance or the residual is meaningless.
struct ShootingOptions {
    double tol = 1e-10;
    int max_iters = 20;
    IntegratorOptions flow = {.abs_tol = 1e-13, .rel_tol = 1e-12, .output_points = 2,
                              .record_v = false};
    bool compute_floquet = true;
};

namespace detail {

inline Vec period_map_defect(const SystemDef& sys, const Vec& s, const ShootingOptions& o) {
    const State st = unpack(sys.n(), s.data());
    const State mapped = flow_map(sys, st, 0.0, sys.omega(), o.flow);
    Vec g = pack(mapped);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s[i];
    return g;
}

}  // namespace detail

/// Newton iteration on g(s) = Φ_ω(s) − s with a forward-difference Jacobian
/// (3n+1 flow evaluations per step) and a damped line search that halves the
/// step up to 8 times when the residual would grow.
inline OrbitResult find_periodic(const SystemDef& sys, const State& guess,
                                 const ShootingOptions& opts = {}) {
    if (guess.n() != sys.n()) throw input_error("find_periodic: guess dimension mismatch");
    if (!(opts.tol > 0.0)) throw input_error("find_periodic: tolerance must be positive");
    const int dim = 3 * sys.n();

    OrbitResult out;
    out.tol = opts.tol;

    Vec s = pack(guess);
    Vec g = detail::period_map_defect(sys, s, opts);
    double res = norm(g);

    for (int iter = 0; iter < opts.max_iters && res > opts.tol; ++iter) {
        // Forward-difference Jacobian of the defect.
        Matrix J(dim);
        Vec s_pert = s;
        for (int j = 0; j < dim; ++j) {
            const double delta = 1e-6 * (1.0 + norm(s));
            s_pert[static_cast<std::size_t>(j)] += delta;
            const Vec gj = detail::period_map_defect(sys, s_pert, opts);
            s_pert[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)];
            for (int i = 0; i < dim; ++i)
                J.at(i, j) = (gj[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(i)]) / delta;
        }
        const double cond = condition_estimate(J);
        if (cond > 1e12)
            throw singular_jacobian_error(
                "find_periodic: period-map Jacobian condition " + std::to_string(cond) +
                    "; try a different initial guess",
                cond);

        Vec rhs = g;
        for (auto& v : rhs) v = -v;
        const Vec step = lu_solve(J, rhs);

        double alpha = 1.0;
        Vec s_next(s.size());
        Vec g_next;
        double res_next = std::numeric_limits<double>::infinity();
        for (int halving = 0; halving <= 8; ++halving) {
            for (std::size_t i = 0; i < s.size(); ++i) s_next[i] = s[i] + alpha * step[i];
            g_next = detail::period_map_defect(sys, s_next, opts);
            res_next = norm(g_next);
            if (res_next < res) break;
            alpha *= 0.5;
        }
        out.newton_iters = iter + 1;
        if (res_next >= res) break;  // stalled; report best iterate
        s = s_next;
        g = g_next;
        res = res_next;
    }

    out.s_star = unpack(sys.n(), s.data());
    out.residual = res;
    out.converged = res <= opts.tol;

    if (out.converged && opts.compute_floquet) {
        Matrix Jphi(dim);
        Vec s_pert = s;
        for (int j = 0; j < dim; ++j) {
            const double delta = 1e-6 * (1.0 + norm(s));
            s_pert[static_cast<std::size_t>(j)] += delta;
            const Vec gj = detail::period_map_defect(sys, s_pert, opts);
            s_pert[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)];
            for (int i = 0; i < dim; ++i)
                Jphi.at(i, j) =
                    (gj[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(i)]) / delta +
                    (i == j ? 1.0 : 0.0);  // dΦ = dg + I
        }
        out.floquet_radius = spectral_norm(Jphi);
    }
    return out;
}

/// Re-integrates a second period and reports the worst mismatch between
/// state(t) and state(t+ω) over uniform samples; pass iff ≤ 10·tol.
struct PeriodicityCheck {
    double max_mismatch = 0.0;
    int samples = 0;
    bool pass = false;
};

inline PeriodicityCheck verify_periodic(const SystemDef& sys, const OrbitResult& orbit,
                                        int samples = 64,
                                        const IntegratorOptions& flow_opts = {
                                            .abs_tol = 1e-13, .rel_tol = 1e-12,
                                            .record_v = false}) {
    if (!orbit.converged) throw input_error("verify_periodic: orbit did not converge");
    if (samples < 2) throw input_error("verify_periodic: samples must be >= 2");

    IntegratorOptions o = flow_opts;
    o.output_points = 2 * samples - 1;  // step ω/(samples−1), covers both periods aligned
    const Trajectory traj = integrate(sys, orbit.s_star, 0.0, 2.0 * sys.omega(), o);
    if (traj.meta.diverged)
        throw divergence_error("verify_periodic: trajectory diverged at t = " +
                                   std::to_string(traj.meta.t_last),
                               traj.meta.t_last);

    PeriodicityCheck chk;
    chk.samples = samples;
    const std::size_t un = static_cast<std::size_t>(sys.n());
    for (int k = 0; k < samples; ++k) {
        const State& a = traj.states[static_cast<std::size_t>(k)];
        const State& b = traj.states[static_cast<std::size_t>(k + samples - 1)];
        double d2 = 0.0;
        for (std::size_t i = 0; i < un; ++i) {
            d2 += (a.X[i] - b.X[i]) * (a.X[i] - b.X[i]);
            d2 += (a.Y[i] - b.Y[i]) * (a.Y[i] - b.Y[i]);
            d2 += (a.Z[i] - b.Z[i]) * (a.Z[i] - b.Z[i]);
        }
        chk.max_mismatch = std::max(chk.max_mismatch, std::sqrt(d2));
    }
    chk.pass = chk.max_mismatch <= 10.0 * orbit.tol;
    return chk;
}

// ---------------------------------------------------------------------------
// contraction of solution differences
// ---------------------------------------------------------------------------

/// Least-squares fit of log‖difference‖(t) = log K − δ·t over the trailing
/// window, with r² as the quality measure. The raw state-difference norm is
/// fitted; the same fit on the V(ψ,η,τ) series is reported alongside (its
/// rate is about 2δ for a norm-equivalent quadratic V).
struct DecayFit {
    double K_fit = 0.0;
    double delta_fit = 0.0;
    double window_lo = 0.0, window_hi = 0.0;
    double r_squared = 0.0;
    double v_rate = 0.0;         // decay rate fitted on the V series
    bool degenerate_equal = false;  // identical starts: difference is identically 0
    bool floor_reached = false;     // differences hit the rounding floor inside the window
    bool non_contracting = false;   // delta_fit ≤ 0
    bool weak_fit = false;          // r² < 0.9: not a credible exponential
};

namespace detail {

struct LineFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline LineFit least_squares(const Vec& t, const Vec& v) {
    const double n = static_cast<double>(t.size());
    double st = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sv += v[i];
    }
    const double mt = st / n, mv = sv / n;
    double stt = 0.0, stv = 0.0, svv = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        stv += (t[i] - mt) * (v[i] - mv);
        svv += (v[i] - mv) * (v[i] - mv);
    }
    LineFit f;
    f.slope = stv / stt;
    f.intercept = mv - f.slope * mt;
    f.r2 = svv > 0.0 ? (stv * stv) / (stt * svv) : 1.0;
    return f;
}

}  // namespace detail

inline DecayFit uniqueness_decay(const SystemDef& sys, const State& s1, const State& s2,
                                 double horizon, double fit_window_fraction = 0.5,
                                 int samples = 512) {
    if (!(horizon > 0.0)) throw input_error("uniqueness_decay: horizon must be positive");
    if (!(fit_window_fraction > 0.0) || fit_window_fraction >= 1.0)
        throw input_error("uniqueness_decay: fit window fraction must lie in (0, 1)");

    const PairedDifference pd = paired_difference_trajectory(sys, s1, s2, horizon, samples);

    DecayFit fit;
    double d0 = 0.0;
    for (double v : pd.norms) d0 = std::max(d0, v);
    if (d0 == 0.0) {
        fit.degenerate_equal = true;
        return fit;
    }

    const double floor = 1e-13;
    double window_lo = horizon * (1.0 - fit_window_fraction);
    // Shrink the window ahead of the rounding floor, then flag if it hits
    // anyway.
    double t_floor = horizon;
    for (std::size_t i = 0; i < pd.times.size(); ++i) {
        if (pd.norms[i] < floor) {
            t_floor = pd.times[i];
            break;
        }
    }
    if (t_floor < horizon) {
        fit.floor_reached = true;
        window_lo = std::min(window_lo, t_floor * (1.0 - fit_window_fraction));
    }
    const double window_hi = std::min(horizon, t_floor);

    Vec ts, ln, lv;
    for (std::size_t i = 0; i < pd.times.size(); ++i) {
        if (pd.times[i] < window_lo || pd.times[i] > window_hi) continue;
        if (pd.norms[i] < floor) continue;
        ts.push_back(pd.times[i]);
        ln.push_back(std::log(pd.norms[i]));
        lv.push_back(pd.v_values[i] > 0.0 ? std::log(pd.v_values[i]) : std::log(floor * floor));
    }
    if (ts.size() < 8) {
        fit.floor_reached = true;
        fit.non_contracting = false;
        return fit;
    }

    const detail::LineFit lf = detail::least_squares(ts, ln);
    fit.K_fit = std::exp(lf.intercept);
    fit.delta_fit = -lf.slope;
    fit.r_squared = lf.r2;
    fit.window_lo = ts.front();
    fit.window_hi = ts.back();
    fit.v_rate = -detail::least_squares(ts, lv).slope;
    fit.non_contracting = fit.delta_fit <= 0.0;
    fit.weak_fit = fit.r_squared < 0.9;
    return fit;
}

// ---------------------------------------------------------------------------
// ultimate boundedness
// ---------------------------------------------------------------------------

/// sup over the tail window of ‖X‖²+‖Y‖²+‖Z‖² across many starts; diverged
/// runs are counted, never dropped silently.
struct BoundEstimate {
    double Delta_1_est = 0.0;
    double horizon = 0.0;
    int start_count = 0;
    int diverged_count = 0;
};

inline BoundEstimate ultimate_bound(const SystemDef& sys, const std::vector<State>& starts,
                                    double horizon, double tail_fraction = 0.25,
                                    const IntegratorOptions& opts = {.abs_tol = 1e-9,
                                                                     .rel_tol = 1e-6,
                                                                     .output_points = 401,
                                                                     .record_v = false}) {
    if (starts.empty()) throw input_error("ultimate_bound: no starts given");
    if (!(horizon > 0.0)) throw input_error("ultimate_bound: horizon must be positive");
    if (!(tail_fraction > 0.0) || tail_fraction > 1.0)
        throw input_error("ultimate_bound: tail fraction must lie in (0, 1]");

    const double tail_t = horizon * (1.0 - tail_fraction);

    // One start = one independent run. A bounded pool pulls starts off a
    // shared counter; per-start results land in a slot vector, so the merge
    // order (and therefore the estimate) is scheduling-independent.
    auto run_one = [&](const State& s0) -> std::pair<bool, double> {
        const Trajectory traj = integrate(sys, s0, 0.0, horizon, opts);
        if (traj.meta.diverged) return {true, 0.0};
        double sup = 0.0;
        for (std::size_t k = 0; k < traj.times.size(); ++k)
            if (traj.times[k] >= tail_t) sup = std::max(sup, traj.states[k].norm_sq());
        return {false, sup};
    };

    std::vector<std::pair<bool, double>> results(starts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= starts.size()) return;
            results[i] = run_one(starts[i]);
        }
    };
    const unsigned pool =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(starts.size())));
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (unsigned w = 0; w < pool; ++w) threads.emplace_back(worker);
    for (auto& th : threads) th.join();

    BoundEstimate be;
    be.horizon = horizon;
    be.start_count = static_cast<int>(starts.size());
    for (const auto& [diverged, sup] : results) {
        if (diverged)
            ++be.diverged_count;
        else
            be.Delta_1_est = std::max(be.Delta_1_est, sup);
    }
    return be;
}

/// Multistart shooting: deterministic seeded guesses in a ball, every
/// converged fixed point kept, duplicates (distance ≤ 1e-6) merged.
struct MultistartResult {
    std::vector<OrbitResult> distinct;
    int attempted = 0;
    int failed = 0;  // threw (divergence, singular Jacobian) or did not converge
};

inline MultistartResult multistart_orbits(const SystemDef& sys, const State& primary_guess,
                                          int extra_starts, double radius, std::uint64_t seed,
                                          const ShootingOptions& opts = {}) {
    MultistartResult out;
    std::vector<State> guesses{primary_guess};
    SplitMix64 rng(seed);
    for (int k = 0; k < extra_starts; ++k) {
        const Vec v = rng.in_ball(3 * sys.n(), radius);
        guesses.push_back(unpack(sys.n(), v.data()));
    }
    out.attempted = static_cast<int>(guesses.size());
    for (const State& g : guesses) {
        try {
            OrbitResult r = find_periodic(sys, g, opts);
            if (!r.converged) {
                ++out.failed;
                continue;
            }
            bool duplicate = false;
            for (const OrbitResult& seen : out.distinct) {
                double d2 = 0.0;
                const Vec a = pack(r.s_star), b = pack(seen.s_star);
                for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
                if (std::sqrt(d2) <= 1e-6) {
                    duplicate = true;
                    break;
                }
            }
            if (!duplicate) out.distinct.push_back(std::move(r));
        } catch (const numeric_error&) {
            ++out.failed;
        }
    }
    return out;
}

}  // namespace lyapcert
