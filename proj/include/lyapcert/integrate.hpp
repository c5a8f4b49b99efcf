#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "lyapcert/lyapunov.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

// ---------------------------------------------------------------------------
// options and trajectory record
// ---------------------------------------------------------------------------

struct IntegratorOptions {
    bool adaptive = true;
    double h = 1e-2;           // fixed-step size (adaptive == false)
    double abs_tol = 1e-10;    // adaptive per-step tolerances
    double rel_tol = 1e-8;
    double h_init = 0.0;       // 0 picks span/100
    double blowup_norm = 1e12; // ‖state‖ beyond this flags divergence
    int output_points = 201;   // uniform samples including both endpoints (>= 2)
    bool record_v = true;      // fill v_series from the system's A, B
};

struct TrajectoryMeta {
    std::string method;        // "rk4" or "rkf45"
    double h = 0.0;            // fixed step, when used
    double abs_tol = 0.0, rel_tol = 0.0;
    long steps = 0;
    long rejected = 0;
    bool diverged = false;
    double t_last = 0.0;       // last time with a finite recorded state
};

/// Uniformly sampled solution record. A blow-up truncates the record and sets
/// meta.diverged instead of storing non-finite states.
struct Trajectory {
    Vec times;
    std::vector<State> states;
    Vec v_series;  // empty unless record_v
    TrajectoryMeta meta;
};

// ---------------------------------------------------------------------------
// steppers
// ---------------------------------------------------------------------------

namespace detail {

/// Classical 4th-order Runge-Kutta, one step of size h.
class Rk4Stepper {
public:
    explicit Rk4Stepper(int dim)
        : k1_(d(dim)), k2_(d(dim)), k3_(d(dim)), k4_(d(dim)), tmp_(d(dim)) {}

    void step(const SystemDef& sys, double t, const double* y, double h, double* out,
              RhsWorkspace& ws) {
        const std::size_t m = k1_.size();
        eval_rhs_into(sys, t, y, k1_.data(), ws);
        for (std::size_t i = 0; i < m; ++i) tmp_[i] = y[i] + 0.5 * h * k1_[i];
        eval_rhs_into(sys, t + 0.5 * h, tmp_.data(), k2_.data(), ws);
        for (std::size_t i = 0; i < m; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
        eval_rhs_into(sys, t + 0.5 * h, tmp_.data(), k3_.data(), ws);
        for (std::size_t i = 0; i < m; ++i) tmp_[i] = y[i] + h * k3_[i];
        eval_rhs_into(sys, t + h, tmp_.data(), k4_.data(), ws);
        for (std::size_t i = 0; i < m; ++i)
            out[i] = y[i] + h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    static std::size_t d(int dim) { return static_cast<std::size_t>(dim); }
    Vec k1_, k2_, k3_, k4_, tmp_;
};

/// Runge-Kutta-Fehlberg embedded 4(5) pair. Propagates the 5th-order
/// solution; the error estimate is the difference of the two orders.
class Rkf45Stepper {
public:
    explicit Rkf45Stepper(int dim) : tmp_(d(dim)) {
        for (auto& k : k_) k.assign(d(dim), 0.0);
    }

    void step(const SystemDef& sys, double t, const double* y, double h, double* y5,
              double* err, RhsWorkspace& ws) {
        static constexpr double c[6] = {0.0, 1.0 / 4, 3.0 / 8, 12.0 / 13, 1.0, 1.0 / 2};
        static constexpr double a[6][5] = {
            {0, 0, 0, 0, 0},
            {1.0 / 4, 0, 0, 0, 0},
            {3.0 / 32, 9.0 / 32, 0, 0, 0},
            {1932.0 / 2197, -7200.0 / 2197, 7296.0 / 2197, 0, 0},
            {439.0 / 216, -8.0, 3680.0 / 513, -845.0 / 4104, 0},
            {-8.0 / 27, 2.0, -3544.0 / 2565, 1859.0 / 4104, -11.0 / 40}};
        static constexpr double b4[6] = {25.0 / 216, 0.0, 1408.0 / 2565, 2197.0 / 4104,
                                         -1.0 / 5, 0.0};
        static constexpr double b5[6] = {16.0 / 135,      0.0,       6656.0 / 12825,
                                         28561.0 / 56430, -9.0 / 50, 2.0 / 55};
        const std::size_t m = tmp_.size();
        eval_rhs_into(sys, t, y, k_[0].data(), ws);
        for (int s = 1; s < 6; ++s) {
            for (std::size_t i = 0; i < m; ++i) {
                double acc = 0.0;
                for (int j = 0; j < s; ++j) acc += a[s][j] * k_[static_cast<std::size_t>(j)][i];
                tmp_[i] = y[i] + h * acc;
            }
            eval_rhs_into(sys, t + c[s] * h, tmp_.data(), k_[static_cast<std::size_t>(s)].data(),
                          ws);
        }
        for (std::size_t i = 0; i < m; ++i) {
            double s5 = 0.0, s4 = 0.0;
            for (int j = 0; j < 6; ++j) {
                s5 += b5[j] * k_[static_cast<std::size_t>(j)][i];
                s4 += b4[j] * k_[static_cast<std::size_t>(j)][i];
            }
            y5[i] = y[i] + h * s5;
            err[i] = h * (s5 - s4);
        }
    }

private:
    static std::size_t d(int dim) { return static_cast<std::size_t>(dim); }
    Vec k_[6];
    Vec tmp_;
};

inline bool state_admissible(const double* y, std::size_t m, double blowup) {
    double n2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!std::isfinite(y[i])) return false;
        n2 += y[i] * y[i];
    }
    return n2 <= blowup * blowup;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// integrate / flow map
// ---------------------------------------------------------------------------

/// Integrates from t0 to t1 (either direction) and samples the solution at
/// output_points uniform times. Dense output lands on every requested time by
/// step truncation, not interpolation.
inline Trajectory integrate(const SystemDef& sys, const State& s0, double t0, double t1,
                            const IntegratorOptions& opts = {}) {
    if (s0.n() != sys.n()) throw input_error("integrate: state dimension mismatch");
    if (!s0.finite()) throw input_error("integrate: non-finite initial state");
    if (t1 == t0) throw input_error("integrate: empty time span");
    if (opts.output_points < 2) throw input_error("integrate: output_points must be >= 2");
    if (!opts.adaptive && !(opts.h > 0.0)) throw input_error("integrate: fixed step must be positive");

    const int dim = 3 * sys.n();
    const std::size_t m = static_cast<std::size_t>(dim);
    const double span = t1 - t0;
    const double dir = span > 0.0 ? 1.0 : -1.0;
    const double h_min = 1e-14 * std::abs(span);

    RhsWorkspace ws;
    ws.resize(sys.n());
    detail::Rk4Stepper rk4(dim);
    detail::Rkf45Stepper rkf(dim);

    Trajectory traj;
    traj.meta.method = opts.adaptive ? "rkf45" : "rk4";
    traj.meta.h = opts.adaptive ? 0.0 : opts.h;
    traj.meta.abs_tol = opts.adaptive ? opts.abs_tol : 0.0;
    traj.meta.rel_tol = opts.adaptive ? opts.rel_tol : 0.0;

    Vec y = pack(s0);
    Vec y_new(m), err(m);
    double t = t0;
    double h = opts.adaptive ? (opts.h_init > 0.0 ? dir * opts.h_init : span / 100.0)
                             : dir * opts.h;
    bool just_rejected = false;

    auto record = [&](double tt, const double* yy) {
        traj.times.push_back(tt);
        traj.states.push_back(unpack(sys.n(), yy));
        if (opts.record_v) traj.v_series.push_back(v_value(sys.A(), sys.B(), traj.states.back()));
        traj.meta.t_last = tt;
    };

    if (!detail::state_admissible(y.data(), m, opts.blowup_norm)) {
        traj.meta.diverged = true;
        return traj;
    }
    record(t0, y.data());

    const int K = opts.output_points;
    for (int k = 1; k < K && !traj.meta.diverged; ++k) {
        const double t_target = (k == K - 1) ? t1 : t0 + span * k / (K - 1);
        while (dir * (t_target - t) > 0.0) {
            const double remaining = t_target - t;
            double h_try = dir * std::min(std::abs(h), std::abs(remaining));

            if (!opts.adaptive) {
                // Overflow inside a step on an escaping trajectory counts as
                // the blow-up itself; the last finite time is kept.
                try {
                    rk4.step(sys, t, y.data(), h_try, y_new.data(), ws);
                } catch (const eval_error&) {
                    traj.meta.diverged = true;
                    traj.meta.t_last = t;
                    break;
                }
                ++traj.meta.steps;
                if (!detail::state_admissible(y_new.data(), m, opts.blowup_norm)) {
                    traj.meta.diverged = true;
                    traj.meta.t_last = t;
                    break;
                }
                t += h_try;
                y.swap(y_new);
                continue;
            }

            double en = 0.0;
            bool finite = true;
            try {
                rkf.step(sys, t, y.data(), h_try, y_new.data(), err.data(), ws);
            } catch (const eval_error&) {
                finite = false;  // treat mid-step overflow as a rejected trial
            }
            if (finite) {
                for (std::size_t i = 0; i < m; ++i) {
                    if (!std::isfinite(y_new[i]) || !std::isfinite(err[i])) {
                        finite = false;
                        break;
                    }
                    const double sc =
                        opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
                    const double q = err[i] / sc;
                    en += q * q;
                }
            }
            en = finite ? std::sqrt(en / static_cast<double>(m))
                        : std::numeric_limits<double>::infinity();

            if (en <= 1.0) {
                ++traj.meta.steps;
                if (!detail::state_admissible(y_new.data(), m, opts.blowup_norm)) {
                    traj.meta.diverged = true;
                    traj.meta.t_last = t;
                    break;
                }
                t += h_try;
                y.swap(y_new);
                double factor = en > 0.0 ? std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0) : 5.0;
                if (just_rejected) factor = std::min(factor, 1.0);  // damp accept/reject churn
                just_rejected = false;
                h = dir * std::min(std::abs(h_try) * factor, std::abs(span));
            } else {
                ++traj.meta.rejected;
                just_rejected = true;
                const double factor =
                    std::isfinite(en) ? std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0) : 0.2;
                h = dir * std::abs(h_try) * factor;
                if (std::abs(h) < h_min)
                    throw stiffness_error("integrate: adaptive step size underflow at t = " +
                                              std::to_string(t),
                                          t, h);
            }
        }
        if (!traj.meta.diverged) record(t_target, y.data());
    }
    return traj;
}

/// State after time T, identical to the last state of integrate() with the
/// same options. Throws divergence_error where integrate() would flag.
inline State flow_map(const SystemDef& sys, const State& s0, double t0, double T,
                      const IntegratorOptions& opts = {}) {
    if (T == 0.0) return s0;
    IntegratorOptions o = opts;
    o.record_v = false;
    const Trajectory traj = integrate(sys, s0, t0, t0 + T, o);
    if (traj.meta.diverged)
        throw divergence_error("flow_map: trajectory diverged at t = " +
                                   std::to_string(traj.meta.t_last),
                               traj.meta.t_last);
    return traj.states.back();
}

// ---------------------------------------------------------------------------
// paired systems
// ---------------------------------------------------------------------------

/// ‖(ψ,η,τ)‖ and V(ψ,η,τ) sampled uniformly along two copies of the flow
/// driven by the same time-only forcing: the ground-truth difference
/// dynamics (contrast with difference_rhs, the printed idealization).
struct PairedDifference {
    Vec times;
    Vec norms;    // ‖(ψ, η, τ)‖
    Vec v_values; // V(ψ, η, τ) with the system's A, B
};

inline PairedDifference paired_difference_trajectory(const SystemDef& sys, const State& s1,
                                                     const State& s2, double t1, int steps,
                                                     const IntegratorOptions& opts = {
                                                         .abs_tol = 1e-13,
                                                         .rel_tol = 1e-11,
                                                     }) {
    if (!sys.flags().p_time_only)
        throw input_error(
            "paired_difference_trajectory: forcing depends on the state (sampled deviation " +
            std::to_string(sys.flags().p_state_dependence) + "); the uniqueness branch needs P = P(t)");
    if (s1.n() != sys.n() || s2.n() != sys.n())
        throw input_error("paired_difference_trajectory: state dimension mismatch");
    if (steps < 1) throw input_error("paired_difference_trajectory: steps must be >= 1");

    IntegratorOptions o = opts;
    o.output_points = steps + 1;
    o.record_v = false;
    const Trajectory a = integrate(sys, s1, 0.0, t1, o);
    if (a.meta.diverged)
        throw divergence_error("paired_difference_trajectory: first copy diverged at t = " +
                                   std::to_string(a.meta.t_last),
                               a.meta.t_last);
    const Trajectory b = integrate(sys, s2, 0.0, t1, o);
    if (b.meta.diverged)
        throw divergence_error("paired_difference_trajectory: second copy diverged at t = " +
                                   std::to_string(b.meta.t_last),
                               b.meta.t_last);

    PairedDifference out;
    out.times = a.times;
    out.norms.reserve(a.times.size());
    out.v_values.reserve(a.times.size());
    const std::size_t un = static_cast<std::size_t>(sys.n());
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        State d = State::zero(sys.n());
        for (std::size_t i = 0; i < un; ++i) {
            d.X[i] = a.states[k].X[i] - b.states[k].X[i];
            d.Y[i] = a.states[k].Y[i] - b.states[k].Y[i];
            d.Z[i] = a.states[k].Z[i] - b.states[k].Z[i];
        }
        out.norms.push_back(d.norm());
        out.v_values.push_back(v_value(sys.A(), sys.B(), d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

/// Header `t,x1..xn,y1..yn,z1..zn[,V]`, 17 significant digits. A diverged
/// trajectory ends with a `# diverged at t=...` comment line.
inline std::string trajectory_csv(const Trajectory& traj) {
    std::string out;
    if (traj.states.empty()) return out;
    const int n = traj.states.front().n();
    const bool with_v = !traj.v_series.empty();
    out += "t";
    for (int i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
    for (int i = 1; i <= n; ++i) out += ",y" + std::to_string(i);
    for (int i = 1; i <= n; ++i) out += ",z" + std::to_string(i);
    if (with_v) out += ",V";
    out += "\n";
    char buf[40];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
    };
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        emit(traj.times[k]);
        const State& s = traj.states[k];
        for (int i = 0; i < n; ++i) {
            out += ",";
            emit(s.X[static_cast<std::size_t>(i)]);
        }
        for (int i = 0; i < n; ++i) {
            out += ",";
            emit(s.Y[static_cast<std::size_t>(i)]);
        }
        for (int i = 0; i < n; ++i) {
            out += ",";
            emit(s.Z[static_cast<std::size_t>(i)]);
        }
        if (with_v) {
            out += ",";
            emit(traj.v_series[k]);
        }
        out += "\n";
    }
    if (traj.meta.diverged) {
        out += "# diverged at t=";
        emit(traj.meta.t_last);
        out += "\n";
    }
    return out;
}

}  // namespace lyapcert
