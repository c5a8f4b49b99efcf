#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lyapcert/hypothesis.hpp"
#include "lyapcert/lyapunov.hpp"
#include "lyapcert/orbits.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config schema
// ---------------------------------------------------------------------------

/// Parsed, validated system configuration. Families are built-in and
/// parameterized; configs cannot carry code.
struct SystemConfig {
    int n = 0;
    std::string family;
    json params;
    std::optional<SymMatrix> A, B;
    double omega = 0.0;
    double eps = kDefaultEps;
    DomainBox box;
    bool box_explicit = false;
    bool seed_explicit = false;
};

namespace cfgdetail {

inline void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw input_error("config: expected an object at " + where);
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw input_error("config: unknown key '" + it.key() + "' at " + where);
    }
}

inline double get_num(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        throw input_error("config: missing key '" + std::string(key) + "' at " + where);
    const json& v = obj.at(key);
    if (!v.is_number()) throw input_error("config: '" + std::string(key) + "' must be a number at " + where);
    return v.get<double>();
}

inline double get_num_or(const json& obj, const char* key, double fallback,
                         const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw input_error("config: '" + std::string(key) + "' must be a number at " + where);
    return v.get<double>();
}

inline long get_int(const json& obj, const char* key, long fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw input_error("config: '" + std::string(key) + "' must be an integer at " + where);
    return v.get<long>();
}

inline SymMatrix get_matrix(const json& v, int n, const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        throw input_error("config: expected an " + std::to_string(n) + "x" + std::to_string(n) +
                          " matrix at " + where);
    Vec entries;
    entries.reserve(static_cast<std::size_t>(n) * n);
    for (const json& row : v) {
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw input_error("config: ragged matrix at " + where);
        for (const json& e : row) {
            if (!e.is_number()) throw input_error("config: non-numeric matrix entry at " + where);
            entries.push_back(e.get<double>());
        }
    }
    try {
        return SymMatrix(n, entries);
    } catch (const input_error& e) {
        throw input_error("config: " + std::string(e.what()) + " at " + where);
    }
}

inline Vec get_vector(const json& v, int n, const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        throw input_error("config: expected a length-" + std::to_string(n) + " array at " + where);
    Vec out;
    out.reserve(static_cast<std::size_t>(n));
    for (const json& e : v) {
        if (!e.is_number()) throw input_error("config: non-numeric entry at " + where);
        out.push_back(e.get<double>());
    }
    return out;
}

inline std::vector<std::pair<double, double>> get_intervals(const json& v, int n,
                                                            const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        throw input_error("config: expected " + std::to_string(n) + " [lo, hi] intervals at " + where);
    std::vector<std::pair<double, double>> out;
    for (const json& e : v) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw input_error("config: interval must be [lo, hi] at " + where);
        out.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return out;
}

}  // namespace cfgdetail

inline SystemConfig parse_config(const json& j) {
    using namespace cfgdetail;
    require_object(j, "/");
    reject_unknown(j, {"n", "family", "params", "A", "B", "omega", "eps", "box"}, "/");

    SystemConfig cfg;
    const long n = get_int(j, "n", -1, "/");
    if (n < 1 || n > 16) throw input_error("config: 'n' must be an integer in [1, 16]");
    cfg.n = static_cast<int>(n);

    if (!j.contains("family") || !j.at("family").is_string())
        throw input_error("config: 'family' must be a string");
    cfg.family = j.at("family").get<std::string>();
    if (cfg.family != "linear-constant" && cfg.family != "example4" &&
        cfg.family != "diagonal-polynomial")
        throw input_error("config: unknown family '" + cfg.family + "'");
    if (cfg.family == "example4" && cfg.n != 2)
        throw input_error("config: family 'example4' requires n = 2");

    cfg.params = j.contains("params") ? j.at("params") : json::object();
    require_object(cfg.params, "/params");

    cfg.omega = get_num(j, "omega", "/");
    if (!(cfg.omega > 0.0)) throw input_error("config: 'omega' must be positive");

    cfg.eps = get_num_or(j, "eps", kDefaultEps, "/");
    if (!(cfg.eps > 0.0) || cfg.eps > 1.0) throw input_error("config: 'eps' must lie in (0, 1]");

    if (j.contains("A")) cfg.A = get_matrix(j.at("A"), cfg.n, "/A");
    if (j.contains("B")) cfg.B = get_matrix(j.at("B"), cfg.n, "/B");

    cfg.box = DomainBox::cube(cfg.n, 1.0);
    if (j.contains("box")) {
        const json& b = j.at("box");
        require_object(b, "/box");
        reject_unknown(b, {"radius", "x", "y", "z", "grid", "random", "seed"}, "/box");
        cfg.box_explicit = true;
        const bool has_axes = b.contains("x") || b.contains("y") || b.contains("z");
        if (b.contains("radius") && has_axes)
            throw input_error("config: box takes either 'radius' or explicit axes, not both");
        if (has_axes) {
            if (!(b.contains("x") && b.contains("y") && b.contains("z")))
                throw input_error("config: box axes need all of 'x', 'y', 'z'");
            cfg.box.x_bounds = get_intervals(b.at("x"), cfg.n, "/box/x");
            cfg.box.y_bounds = get_intervals(b.at("y"), cfg.n, "/box/y");
            cfg.box.z_bounds = get_intervals(b.at("z"), cfg.n, "/box/z");
        } else {
            const double radius = get_num_or(b, "radius", 1.0, "/box");
            if (!(radius > 0.0)) throw input_error("config: box radius must be positive");
            cfg.box = DomainBox::cube(cfg.n, radius);
        }
        cfg.box.grid_m = static_cast<int>(get_int(b, "grid", 5, "/box"));
        cfg.box.random_r = static_cast<int>(get_int(b, "random", 64, "/box"));
        if (b.contains("seed")) {
            cfg.box.seed = static_cast<std::uint64_t>(get_int(b, "seed", 1, "/box"));
            cfg.seed_explicit = true;
        }
        cfg.box.validate(cfg.n);
    }
    return cfg;
}

inline SystemConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw input_error("config: " + std::string(e.what()));
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// building systems from configs
// ---------------------------------------------------------------------------

inline SystemDef build_system(const SystemConfig& cfg) {
    using namespace cfgdetail;
    const std::string where = "/params";
    if (cfg.family == "linear-constant") {
        reject_unknown(cfg.params, {"F0", "G0", "H0", "amp", "nu", "w"}, where);
        LinearConstantParams p;
        if (!cfg.params.contains("F0") || !cfg.params.contains("G0") || !cfg.params.contains("H0"))
            throw input_error("config: linear-constant needs 'F0', 'G0', 'H0'");
        p.F0 = get_matrix(cfg.params.at("F0"), cfg.n, where + "/F0");
        p.G0 = get_matrix(cfg.params.at("G0"), cfg.n, where + "/G0");
        p.H0 = get_matrix(cfg.params.at("H0"), cfg.n, where + "/H0");
        if (cfg.params.contains("amp"))
            p.amp = get_vector(cfg.params.at("amp"), cfg.n, where + "/amp");
        p.nu = get_num_or(cfg.params, "nu", 1.0, where);
        p.w = get_num_or(cfg.params, "w", 0.0, where);
        return make_linear_constant(p, cfg.omega, cfg.A, cfg.B, cfg.eps);
    }
    if (cfg.family == "example4") {
        reject_unknown(cfg.params, {"w", "forcing"}, where);
        Example4Params p;
        p.w = get_num_or(cfg.params, "w", 0.0, where);
        std::string mode = "xyz-cos";
        if (cfg.params.contains("forcing")) {
            if (!cfg.params.at("forcing").is_string())
                throw input_error("config: 'forcing' must be a string");
            mode = cfg.params.at("forcing").get<std::string>();
        }
        if (mode == "xyz-cos")
            p.forcing = Example4Forcing::xyz_cos;
        else if (mode == "time-only")
            p.forcing = Example4Forcing::time_only;
        else if (mode == "none")
            p.forcing = Example4Forcing::none;
        else
            throw input_error("config: forcing must be 'xyz-cos', 'time-only' or 'none'");
        return make_example4(p, cfg.omega, cfg.A, cfg.B, cfg.eps);
    }
    // diagonal-polynomial
    reject_unknown(cfg.params, {"f", "g", "h_lin", "h_cub", "amp", "nu", "w"}, where);
    DiagonalPolynomialParams p;
    if (cfg.params.contains("f")) {
        const Vec f = get_vector(cfg.params.at("f"), 4, where + "/f");
        for (int i = 0; i < 4; ++i) p.f_coef[i] = f[static_cast<std::size_t>(i)];
    }
    if (cfg.params.contains("g")) {
        const Vec g = get_vector(cfg.params.at("g"), 3, where + "/g");
        for (int i = 0; i < 3; ++i) p.g_coef[i] = g[static_cast<std::size_t>(i)];
    }
    p.h_lin = get_num_or(cfg.params, "h_lin", 1.0, where);
    p.h_cub = get_num_or(cfg.params, "h_cub", 1.0, where);
    if (cfg.params.contains("amp")) p.amp = get_vector(cfg.params.at("amp"), cfg.n, where + "/amp");
    p.nu = get_num_or(cfg.params, "nu", 1.0, where);
    p.w = get_num_or(cfg.params, "w", 0.0, where);
    return make_diagonal_polynomial(cfg.n, p, cfg.omega, cfg.A, cfg.B, cfg.eps);
}

/// The canonical worked-example config; stable byte-for-byte across runs.
inline ordered_json example4_config() {
    ordered_json j;
    j["n"] = 2;
    j["family"] = "example4";
    j["params"] = ordered_json{{"w", 0.0}, {"forcing", "xyz-cos"}};
    j["omega"] = kTwoPi;
    j["eps"] = kDefaultEps;
    j["box"] = ordered_json{{"radius", 1.0}, {"grid", 5}, {"random", 64}, {"seed", 1}};
    return j;
}

// ---------------------------------------------------------------------------
// report serialization
// ---------------------------------------------------------------------------

namespace cfgdetail {

inline ordered_json num_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace cfgdetail

inline ordered_json box_json(const DomainBox& box) {
    ordered_json j;
    auto ivals = [](const std::vector<std::pair<double, double>>& b) {
        ordered_json a = ordered_json::array();
        for (const auto& [lo, hi] : b) a.push_back(ordered_json::array({lo, hi}));
        return a;
    };
    j["x"] = ivals(box.x_bounds);
    j["y"] = ivals(box.y_bounds);
    j["z"] = ivals(box.z_bounds);
    j["grid"] = box.grid_m;
    j["random"] = box.random_r;
    j["seed"] = box.seed;
    return j;
}

inline ordered_json bounds_json(const SpectralBounds& b) {
    using cfgdetail::num_or_null;
    ordered_json j;
    j["delta_a"] = num_or_null(b.delta_a);
    j["Delta_a"] = num_or_null(b.Delta_a);
    j["delta_b"] = num_or_null(b.delta_b);
    j["Delta_b"] = num_or_null(b.Delta_b);
    j["delta_h"] = num_or_null(b.delta_h);
    j["Delta_h"] = num_or_null(b.Delta_h);
    j["lambda_f"] = ordered_json{{"min", num_or_null(b.f_min)}, {"max", num_or_null(b.f_max)}};
    j["lambda_g"] = ordered_json{{"min", num_or_null(b.g_min)}, {"max", num_or_null(b.g_max)}};
    j["sandwich_f_minus_a"] =
        ordered_json{{"min", num_or_null(b.fa_min)}, {"max", num_or_null(b.fa_max)}};
    j["sandwich_g_minus_b"] =
        ordered_json{{"min", num_or_null(b.gb_min)}, {"max", num_or_null(b.gb_max)}};
    j["commutators"] = ordered_json{{"ff", num_or_null(b.comm_ff)},
                                    {"gg", num_or_null(b.comm_gg)},
                                    {"fg", num_or_null(b.comm_fg)},
                                    {"f_secant", num_or_null(b.comm_fa)},
                                    {"g_secant", num_or_null(b.comm_ga)}};
    j["secant_asymmetry"] = num_or_null(b.secant_asymmetry);
    j["k_printed"] = num_or_null(b.k_printed);
    j["k_proof"] = num_or_null(b.k_proof);
    j["sqrt_eps_budget"] = num_or_null(b.sqrt_eps_budget);
    j["eps"] = num_or_null(b.eps);
    j["h_origin_norm"] = num_or_null(b.h_origin_norm);
    j["p_period_defect"] = num_or_null(b.p_period_defect);
    j["p_time_only"] = b.p_time_only;
    j["samples"] = ordered_json{{"grid_points", b.grid_points},
                                {"random_points", b.random_points},
                                {"grid_m_effective", b.effective_m},
                                {"seed", b.seed}};
    return j;
}

inline ordered_json forcing_json(const ForcingBound& f) {
    using cfgdetail::num_or_null;
    return ordered_json{{"delta_0", num_or_null(f.delta_0)},
                        {"delta_1", num_or_null(f.delta_1)},
                        {"alpha_0", num_or_null(f.alpha_0)},
                        {"alpha_1", num_or_null(f.alpha_1)}};
}

inline ordered_json conditions_json(const ConditionReport& r) {
    ordered_json j;
    auto verdict = [](const ConditionVerdict& v) {
        return ordered_json{{"strict", v.strict}, {"non_strict", v.non_strict}};
    };
    j["secant_positive"] = verdict(r.secant_positive);
    j["product_bound"] =
        ordered_json{{"printed_k", r.product_bound_printed}, {"proof_k", r.product_bound_proof}};
    j["sandwich_f_lower"] = verdict(r.sandwich_fa_lower);
    j["sandwich_f_upper"] = r.sandwich_fa_upper;
    j["sandwich_g_lower"] = verdict(r.sandwich_gb_lower);
    j["sandwich_g_upper"] = r.sandwich_gb_upper;
    j["eps_in_range"] = r.eps_in_range;
    j["eps_within_budget"] = r.eps_within_budget;
    j["f_positive"] = r.f_positive;
    j["g_positive"] = r.g_positive;
    j["a_positive"] = r.a_positive;
    j["b_positive"] = r.b_positive;
    j["commutation"] = r.commutation_ok;
    j["secant_symmetric"] = r.secant_symmetric;
    j["h_zero_at_origin"] = r.h_zero_at_origin;
    j["p_periodic"] = r.p_periodic;
    j["overall"] = r.overall;
    return j;
}

inline ordered_json decay_json(const DecayConstants& d) {
    using cfgdetail::num_or_null;
    ordered_json j;
    j["k1"] = num_or_null(d.k1);
    j["k2"] = num_or_null(d.k2);
    j["k3"] = num_or_null(d.k3);
    j["k4"] = num_or_null(d.k4);
    j["k5"] = num_or_null(d.k5);
    j["k6"] = num_or_null(d.k6);
    j["delta_4"] = num_or_null(d.delta_4);
    j["delta_4_feasible"] = d.delta_4_feasible;
    j["delta_5"] = num_or_null(d.delta_5);
    j["delta_6_printed"] = num_or_null(d.delta_6_printed);
    j["delta_6_corrected"] = num_or_null(d.delta_6_corrected);
    j["delta_6_feasible"] = d.delta_6_feasible;
    j["delta_7"] = num_or_null(d.delta_7);
    j["delta_8_printed"] = num_or_null(d.delta_8_printed);
    j["delta_8_corrected"] = num_or_null(d.delta_8_corrected);
    j["delta_h_caps"] = ordered_json{{"printed_k", num_or_null(d.dh_cap_printed_k)},
                                     {"proof_k", num_or_null(d.dh_cap_proof_k)},
                                     {"via_k1_choice", num_or_null(d.dh_cap_k1)},
                                     {"via_k2_choice", num_or_null(d.dh_cap_k2)},
                                     {"binding", d.dh_binding_cap}};
    return j;
}

inline ordered_json decrease_json(const DecreaseTest& t) {
    using cfgdetail::num_or_null;
    ordered_json j;
    j["samples"] = t.samples;
    j["radius"] = ordered_json::array({num_or_null(t.radius_lo), num_or_null(t.radius_hi)});
    j["violations"] = t.violations;
    j["worst_margin"] = num_or_null(t.worst_margin);
    j["skipped"] = t.skipped;
    j["pass"] = t.pass;
    return j;
}

inline ordered_json state_json(const State& s) {
    ordered_json j;
    j["x"] = s.X;
    j["y"] = s.Y;
    j["z"] = s.Z;
    return j;
}

inline ordered_json orbit_json(const OrbitResult& o) {
    using cfgdetail::num_or_null;
    ordered_json j;
    j["converged"] = o.converged;
    j["newton_iters"] = o.newton_iters;
    j["residual"] = num_or_null(o.residual);
    j["tol"] = num_or_null(o.tol);
    j["s_star"] = state_json(o.s_star);
    j["floquet_radius"] = o.floquet_radius ? cfgdetail::num_or_null(*o.floquet_radius)
                                           : ordered_json(nullptr);
    return j;
}

inline ordered_json fit_json(const DecayFit& f) {
    using cfgdetail::num_or_null;
    ordered_json j;
    j["K_fit"] = num_or_null(f.K_fit);
    j["delta_fit"] = num_or_null(f.delta_fit);
    j["window"] = ordered_json::array({num_or_null(f.window_lo), num_or_null(f.window_hi)});
    j["r_squared"] = num_or_null(f.r_squared);
    j["v_rate"] = num_or_null(f.v_rate);
    j["degenerate_equal"] = f.degenerate_equal;
    j["floor_reached"] = f.floor_reached;
    j["non_contracting"] = f.non_contracting;
    j["weak_fit"] = f.weak_fit;
    return j;
}

inline ordered_json bound_json(const BoundEstimate& b) {
    using cfgdetail::num_or_null;
    ordered_json j;
    j["Delta_1_est"] = num_or_null(b.Delta_1_est);
    j["horizon"] = num_or_null(b.horizon);
    j["start_count"] = b.start_count;
    j["diverged_count"] = b.diverged_count;
    return j;
}

}  // namespace lyapcert
