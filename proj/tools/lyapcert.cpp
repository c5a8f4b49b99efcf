// lyapcert: numerical certification of existence/uniqueness hypotheses for
// periodic solutions of third-order nonlinear vector ODEs
//
//   x''' + F(x,x',x'')x'' + G(x,x')x' + H(x) = P(t,x,x',x'')
//
// Subcommands: check, simulate, find-orbit, uniqueness, certify, example4.
// Exit codes: 0 pass, 1 hypothesis/conclusion fail, 2 numeric failure,
// 3 bad input.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lyapcert/config.hpp"
#include "lyapcert/hypothesis.hpp"
#include "lyapcert/integrate.hpp"
#include "lyapcert/lyapunov.hpp"
#include "lyapcert/orbits.hpp"
#include "lyapcert/system.hpp"

namespace {

using namespace lyapcert;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitInput = 3;

/// Atomic write: temp file in the target directory, then rename.
void write_output(const std::string& out_path, const std::string& payload) {
    if (out_path.empty()) {
        std::fwrite(payload.data(), 1, payload.size(), stdout);
        return;
    }
    namespace fs = std::filesystem;
    const fs::path target(out_path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw input_error("cannot open output file '" + tmp.string() + "'");
        f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!f) throw input_error("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

Vec parse_csv_vector(const std::string& text, const std::string& what) {
    Vec out;
    std::string cur;
    std::stringstream ss(text);
    while (std::getline(ss, cur, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(cur, &pos));
            while (pos < cur.size() && std::isspace(static_cast<unsigned char>(cur[pos]))) ++pos;
            if (pos != cur.size()) throw std::invalid_argument(cur);
        } catch (const std::exception&) {
            throw input_error("cannot parse '" + cur + "' in " + what);
        }
    }
    if (out.empty()) throw input_error(what + " is empty");
    return out;
}

struct CommonFlags {
    std::string config_path;
    std::string out_path;
    std::optional<double> box_radius;
    std::optional<int> grid;
    std::optional<int> random;
    std::optional<std::uint64_t> seed;
    std::optional<double> eps;
    std::optional<double> omega;
};

void add_common(CLI::App* cmd, CommonFlags& fl, bool with_box = true) {
    cmd->add_option("--config", fl.config_path, "system config JSON")->required();
    cmd->add_option("--out", fl.out_path, "write the report here instead of stdout");
    if (with_box) {
        cmd->add_option("--box", fl.box_radius, "override the box with a symmetric radius");
        cmd->add_option("--grid", fl.grid, "grid points per axis");
        cmd->add_option("--rand", fl.random, "extra random sample count");
        cmd->add_option("--eps", fl.eps, "epsilon for the spectral sandwich conditions");
    }
    cmd->add_option("--seed", fl.seed, "RNG seed (falls back to config, then LYAPCERT_SEED)");
    cmd->add_option("--omega", fl.omega, "override the forcing period");
}

/// Loads the config, applies CLI overrides, builds the system and the box.
/// Seed precedence: --seed flag, then config, then LYAPCERT_SEED, then 1.
struct Loaded {
    SystemConfig cfg;
    SystemDef sys;
    DomainBox box;
    std::uint64_t seed = 1;
};

Loaded load(const CommonFlags& fl) {
    SystemConfig cfg = load_config_file(fl.config_path);
    if (fl.eps) {
        if (!(*fl.eps > 0.0) || *fl.eps > 1.0) throw input_error("--eps must lie in (0, 1]");
        cfg.eps = *fl.eps;
    }
    if (fl.omega) {
        if (!(*fl.omega > 0.0)) throw input_error("--omega must be positive");
        cfg.omega = *fl.omega;
    }
    DomainBox box = cfg.box;
    if (fl.box_radius) {
        if (!(*fl.box_radius > 0.0)) throw input_error("--box must be positive");
        box = DomainBox::cube(cfg.n, *fl.box_radius, box.grid_m, box.random_r, box.seed);
    }
    if (fl.grid) box.grid_m = *fl.grid;
    if (fl.random) box.random_r = *fl.random;
    const std::uint64_t seed = [&] {
        if (fl.seed) return *fl.seed;
        if (cfg.seed_explicit) return cfg.box.seed;
        if (const char* env = std::getenv("LYAPCERT_SEED")) {
            try {
                return static_cast<std::uint64_t>(std::stoull(env));
            } catch (const std::exception&) {
                throw input_error("LYAPCERT_SEED is not an unsigned integer");
            }
        }
        return std::uint64_t{1};
    }();
    box.seed = seed;
    box.validate(cfg.n);
    return Loaded{cfg, build_system(cfg), box, seed};
}

ordered_json report_header(const char* command, const Loaded& L) {
    ordered_json j;
    j["tool"] = "lyapcert";
    j["command"] = command;
    j["family"] = L.cfg.family;
    j["n"] = L.cfg.n;
    j["omega"] = L.cfg.omega;
    j["eps"] = L.cfg.eps;
    j["seed"] = L.seed;
    return j;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int run_check(const CommonFlags& fl, int t_samples) {
    const Loaded L = load(fl);
    const SpectralBounds bounds = spectral_bounds(L.sys, L.box);
    const ForcingBound forcing = forcing_bound_fit(L.sys, L.box, t_samples);
    const ConditionReport cond = check_theorem_conditions(bounds);
    const DecayConstants decay = decay_constants(bounds, forcing);

    ordered_json j = report_header("check", L);
    j["box"] = box_json(L.box);
    j["spectral"] = bounds_json(bounds);
    j["forcing"] = forcing_json(forcing);
    j["conditions"] = conditions_json(cond);
    j["decay"] = decay_json(decay);
    j["overall_pass"] = cond.overall;
    write_output(fl.out_path, j.dump(2) + "\n");
    return cond.overall ? kExitPass : kExitFail;
}

int run_certify(const CommonFlags& fl, int t_samples, int decrease_samples) {
    const Loaded L = load(fl);
    const SpectralBounds bounds = spectral_bounds(L.sys, L.box);
    const ForcingBound forcing = forcing_bound_fit(L.sys, L.box, t_samples);
    const ConditionReport cond = check_theorem_conditions(bounds);
    const DecayConstants decay = decay_constants(bounds, forcing);
    const DecreaseTest decrease = decrease_spot_test(
        L.sys, decay.delta_6_corrected, decay.delta_8_corrected, decrease_samples, L.seed ^ 0xDEC);

    // The decrease shell may lie outside the sampled box; flag that honestly.
    double corner2 = 0.0;
    auto add_axis = [&corner2](const std::vector<std::pair<double, double>>& b) {
        for (const auto& [lo, hi] : b) corner2 += std::max(lo * lo, hi * hi);
    };
    add_axis(L.box.x_bounds);
    add_axis(L.box.y_bounds);
    add_axis(L.box.z_bounds);
    const bool shell_outside_box = decrease.radius_lo > std::sqrt(corner2);

    const bool certified = cond.overall && !decrease.skipped && decrease.pass;

    ordered_json j = report_header("certify", L);
    j["box"] = box_json(L.box);
    j["spectral"] = bounds_json(bounds);
    j["forcing"] = forcing_json(forcing);
    j["conditions"] = conditions_json(cond);
    j["decay"] = decay_json(decay);
    j["decrease_test"] = decrease_json(decrease);
    j["decrease_shell_outside_box"] = shell_outside_box;
    j["certificate_pass"] = certified;
    write_output(fl.out_path, j.dump(2) + "\n");
    return certified ? kExitPass : kExitFail;
}

int run_simulate(const CommonFlags& fl, const std::string& x0, const std::string& y0,
                 const std::string& z0, double t1, std::optional<double> dt,
                 std::optional<double> rtol, std::optional<double> atol, int points) {
    const Loaded L = load(fl);
    const int n = L.cfg.n;
    State s0 = State::zero(n);
    auto fill = [&](const std::string& text, Vec& dst, const char* what) {
        if (text.empty()) return;
        const Vec v = parse_csv_vector(text, what);
        if (static_cast<int>(v.size()) != n)
            throw input_error(std::string(what) + " must have " + std::to_string(n) + " components");
        dst = v;
    };
    fill(x0, s0.X, "--x0");
    fill(y0, s0.Y, "--y0");
    fill(z0, s0.Z, "--z0");

    IntegratorOptions opts;
    if (dt) {
        opts.adaptive = false;
        opts.h = *dt;
    } else {
        opts.adaptive = true;
        if (rtol) opts.rel_tol = *rtol;
        if (atol) opts.abs_tol = *atol;
    }
    if (points < 2) throw input_error("--points must be >= 2");
    opts.output_points = points;
    opts.record_v = true;

    const Trajectory traj = integrate(L.sys, s0, 0.0, t1, opts);
    write_output(fl.out_path, trajectory_csv(traj));
    return traj.meta.diverged ? kExitNumeric : kExitPass;
}

int run_find_orbit(const CommonFlags& fl, const std::string& guess_text, double tol,
                   int max_iters, int starts, double radius) {
    const Loaded L = load(fl);
    const int dim = 3 * L.cfg.n;
    State guess = State::zero(L.cfg.n);
    if (!guess_text.empty()) {
        const Vec v = parse_csv_vector(guess_text, "--guess");
        if (static_cast<int>(v.size()) != dim)
            throw input_error("--guess must have 3n = " + std::to_string(dim) + " components");
        guess = unpack(L.cfg.n, v.data());
    }
    ShootingOptions opts;
    opts.tol = tol;
    opts.max_iters = max_iters;

    ordered_json j = report_header("find-orbit", L);
    bool any_converged = false;
    bool primary_numeric_failure = false;

    ordered_json primary;
    try {
        const OrbitResult orbit = find_periodic(L.sys, guess, opts);
        primary = orbit_json(orbit);
        if (orbit.converged) {
            any_converged = true;
            const PeriodicityCheck chk = verify_periodic(L.sys, orbit);
            primary["verify"] = ordered_json{{"max_mismatch", chk.max_mismatch},
                                             {"samples", chk.samples},
                                             {"pass", chk.pass}};
        }
    } catch (const numeric_error& e) {
        primary = ordered_json{{"converged", false}, {"error", e.what()}};
        primary_numeric_failure = true;
    }
    j["orbit"] = primary;

    if (starts > 0) {
        const MultistartResult ms = multistart_orbits(L.sys, guess, starts, radius, L.seed, opts);
        ordered_json list = ordered_json::array();
        for (const OrbitResult& r : ms.distinct) {
            list.push_back(orbit_json(r));
            if (r.converged) any_converged = true;
        }
        j["multistart"] = ordered_json{
            {"attempted", ms.attempted}, {"failed", ms.failed}, {"distinct", list}};
    }

    write_output(fl.out_path, j.dump(2) + "\n");
    if (any_converged) return kExitPass;
    return primary_numeric_failure ? kExitNumeric : kExitFail;
}

int run_uniqueness(const CommonFlags& fl, int pairs, double horizon, double window,
                   double radius) {
    const Loaded L = load(fl);
    if (pairs < 1) throw input_error("--pairs must be >= 1");

    SplitMix64 rng(L.seed);
    ordered_json list = ordered_json::array();
    bool all_pass = true;
    double min_delta = std::numeric_limits<double>::infinity();
    for (int k = 0; k < pairs; ++k) {
        const Vec a = rng.in_ball(3 * L.cfg.n, radius);
        const Vec b = rng.in_ball(3 * L.cfg.n, radius);
        const State s1 = unpack(L.cfg.n, a.data());
        const State s2 = unpack(L.cfg.n, b.data());
        const DecayFit fit = uniqueness_decay(L.sys, s1, s2, horizon, window);
        ordered_json jf = fit_json(fit);
        const bool pair_pass =
            !fit.degenerate_equal && fit.delta_fit > 0.0 && !fit.weak_fit;
        jf["pass"] = pair_pass;
        list.push_back(jf);
        all_pass = all_pass && pair_pass;
        min_delta = std::min(min_delta, fit.delta_fit);
    }

    ordered_json j = report_header("uniqueness", L);
    j["horizon"] = horizon;
    j["fit_window_fraction"] = window;
    j["pairs"] = list;
    j["min_delta_fit"] = cfgdetail::num_or_null(min_delta);
    j["pass"] = all_pass;
    write_output(fl.out_path, j.dump(2) + "\n");
    return all_pass ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"certification and experiments for periodic solutions of third-order "
                 "nonlinear vector ODEs"};
    app.require_subcommand(1);

    // check
    CommonFlags fl_check;
    int t_samples = 8;
    CLI::App* cmd_check = app.add_subcommand("check", "check the spectral/forcing hypotheses");
    add_common(cmd_check, fl_check);
    cmd_check->add_option("--tsamples", t_samples, "forcing-envelope time samples per period");

    // certify
    CommonFlags fl_cert;
    int cert_t_samples = 8;
    int decrease_samples = 1000;
    CLI::App* cmd_cert =
        app.add_subcommand("certify", "check + decay constants + pointwise decrease test");
    add_common(cmd_cert, fl_cert);
    cmd_cert->add_option("--tsamples", cert_t_samples, "forcing-envelope time samples per period");
    cmd_cert->add_option("--samples", decrease_samples, "decrease spot-test sample count");

    // simulate
    CommonFlags fl_sim;
    std::string x0, y0, z0;
    double t1 = 0.0;
    std::optional<double> dt, rtol, atol;
    int points = 1001;
    CLI::App* cmd_sim = app.add_subcommand("simulate", "integrate and emit a CSV trajectory");
    add_common(cmd_sim, fl_sim, /*with_box=*/false);
    cmd_sim->add_option("--x0", x0, "initial position, comma separated");
    cmd_sim->add_option("--y0", y0, "initial velocity, comma separated");
    cmd_sim->add_option("--z0", z0, "initial acceleration, comma separated");
    cmd_sim->add_option("--t1", t1, "final time")->required();
    cmd_sim->add_option("--dt", dt, "fixed RK4 step (default: adaptive RKF45)");
    cmd_sim->add_option("--rtol", rtol, "adaptive relative tolerance (default 1e-8)");
    cmd_sim->add_option("--atol", atol, "adaptive absolute tolerance (default 1e-10)");
    cmd_sim->add_option("--points", points, "uniform output samples");

    // find-orbit
    CommonFlags fl_orbit;
    std::string guess_text;
    double tol = 1e-10;
    int max_iters = 20;
    int starts = 16;
    double orbit_radius = 1.0;
    CLI::App* cmd_orbit =
        app.add_subcommand("find-orbit", "Newton shooting on the period map");
    add_common(cmd_orbit, fl_orbit, /*with_box=*/false);
    cmd_orbit->add_option("--guess", guess_text, "initial state, 3n comma-separated values");
    cmd_orbit->add_option("--tol", tol, "residual tolerance");
    cmd_orbit->add_option("--max-iters", max_iters, "Newton iteration cap");
    cmd_orbit->add_option("--starts", starts, "extra random multistart guesses (0 disables)");
    cmd_orbit->add_option("--radius", orbit_radius, "multistart sampling ball radius");

    // uniqueness
    CommonFlags fl_uni;
    int pairs = 5;
    double horizon = 30.0;
    double window = 0.5;
    double uni_radius = 1.0;
    CLI::App* cmd_uni = app.add_subcommand(
        "uniqueness", "fit the contraction rate of solution differences (needs P = P(t))");
    add_common(cmd_uni, fl_uni, /*with_box=*/false);
    cmd_uni->add_option("--pairs", pairs, "number of random start pairs");
    cmd_uni->add_option("--horizon", horizon, "integration horizon");
    cmd_uni->add_option("--window", window, "trailing fit-window fraction");
    cmd_uni->add_option("--radius", uni_radius, "start sampling ball radius");

    // example4
    std::string ex4_out;
    CLI::App* cmd_ex4 =
        app.add_subcommand("example4", "emit the canonical worked-example config");
    cmd_ex4->add_option("--out", ex4_out, "write the config here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }

    try {
        if (cmd_check->parsed()) return run_check(fl_check, t_samples);
        if (cmd_cert->parsed()) return run_certify(fl_cert, cert_t_samples, decrease_samples);
        if (cmd_sim->parsed())
            return run_simulate(fl_sim, x0, y0, z0, t1, dt, rtol, atol, points);
        if (cmd_orbit->parsed())
            return run_find_orbit(fl_orbit, guess_text, tol, max_iters, starts, orbit_radius);
        if (cmd_uni->parsed()) return run_uniqueness(fl_uni, pairs, horizon, window, uni_radius);
        if (cmd_ex4->parsed()) {
            write_output(ex4_out, example4_config().dump(2) + "\n");
            return kExitPass;
        }
    } catch (const input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitInput;
}
