#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lyapcert/config.hpp"

using namespace lyapcert;
namespace fs = std::filesystem;

namespace {

const std::string& cli_path() {
    static const std::string p = [] {
        const char* env = std::getenv("LYAPCERT_CLI");
        REQUIRE_MESSAGE(env != nullptr, "LYAPCERT_CLI must point at the built binary");
        return std::string(env);
    }();
    return p;
}

const fs::path& tmp_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("lyapcert_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path out_file = tmp_dir() / ("stdout_" + std::to_string(counter++) + ".txt");
    const std::string cmd = env_prefix + "\"" + cli_path() + "\" " + args + " > \"" +
                            out_file.string() + "\" 2> /dev/null";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(out_file);
    std::stringstream ss;
    ss << f.rdbuf();
    r.out = ss.str();
    return r;
}

std::string write_config(const std::string& name, const json& j) {
    const fs::path p = tmp_dir() / name;
    std::ofstream f(p);
    f << j.dump(2) << "\n";
    return p.string();
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json oracle_config() {
    return json{{"n", 1},
                {"family", "linear-constant"},
                {"params",
                 {{"F0", {{2.0}}}, {"G0", {{2.0}}}, {"H0", {{1.0}}}, {"amp", {1.0}}}},
                {"omega", kTwoPi}};
}

/// Scalar linear system that passes every hypothesis: F=G=2, H slope 0.05,
/// forcing amplitude 0.01, sqrt(eps) = 1/240.
json certified_config() {
    const double eps = (1.0 / 240.0) * (1.0 / 240.0);
    return json{{"n", 1},
                {"family", "linear-constant"},
                {"params",
                 {{"F0", {{2.0}}}, {"G0", {{2.0}}}, {"H0", {{0.05}}}, {"amp", {0.01}}}},
                {"omega", kTwoPi},
                {"eps", eps}};
}

json anti_damped_config() {
    return json{{"n", 1},
                {"family", "linear-constant"},
                {"params", {{"F0", {{-1.0}}}, {"G0", {{1.0}}}, {"H0", {{1.0}}}}},
                {"omega", kTwoPi}};
}

json passing_nonlinear_config() {
    return json{{"n", 2},
                {"family", "diagonal-polynomial"},
                {"params", {{"h_lin", 0.05}, {"h_cub", 0.05}, {"amp", {0.001, 0.001}}}},
                {"omega", kTwoPi},
                {"eps", 1e-5},
                {"box", {{"radius", 0.015}, {"grid", 4}, {"random", 32}, {"seed", 1}}}};
}

}  // namespace

TEST_CASE("example4 emits a schema-valid, byte-stable config") {
    const CliResult a = run_cli("example4");
    const CliResult b = run_cli("example4");
    CHECK(a.exit_code == 0);
    CHECK(a.out == b.out);

    const json j = json::parse(a.out);
    const SystemConfig cfg = parse_config(j);
    CHECK(cfg.n == 2);
    CHECK(cfg.family == "example4");
    CHECK(cfg.omega == doctest::Approx(kTwoPi));

    // F and G at the origin per the worked example
    const SystemDef sys = build_system(cfg);
    SymMatrix f(2), g(2);
    const Vec zero(2, 0.0);
    sys.eval_F(zero.data(), zero.data(), zero.data(), f);
    sys.eval_G(zero.data(), zero.data(), g);
    CHECK(f(0, 0) == doctest::Approx(2.0));
    CHECK(f(1, 1) == doctest::Approx(4.0));
    CHECK(g(0, 0) == doctest::Approx(1.0));
    CHECK(g(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("check: worked example fails with the secant-positivity flag raised") {
    const fs::path cfg_path = tmp_dir() / "ex4.json";
    REQUIRE(run_cli("example4 --out \"" + cfg_path.string() + "\"").exit_code == 0);
    const CliResult r = run_cli("check --config \"" + cfg_path.string() + "\"");
    CHECK(r.exit_code == 1);
    const json rep = json::parse(r.out);
    CHECK_FALSE(rep["overall_pass"].get<bool>());
    CHECK_FALSE(rep["conditions"]["secant_positive"]["strict"].get<bool>());
    CHECK(rep["conditions"]["f_positive"].get<bool>());
    CHECK(rep["conditions"]["g_positive"].get<bool>());
    CHECK(rep["spectral"]["lambda_f"]["min"].get<double>() == doctest::Approx(2.0));
    CHECK(rep["spectral"]["lambda_f"]["max"].get<double>() == doctest::Approx(10.0));
}

TEST_CASE("check: certified linear config exits 0") {
    const std::string path = write_config("certified.json", certified_config());
    const CliResult r = run_cli("check --config \"" + path + "\"");
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.out);
    CHECK(rep["overall_pass"].get<bool>());
    CHECK(rep["spectral"]["delta_h"].get<double>() == doctest::Approx(0.05));
    CHECK(rep["forcing"]["delta_0"].get<double>() == doctest::Approx(0.01));
    CHECK(rep["forcing"]["delta_1"].get<double>() == 0.0);
}

TEST_CASE("check: nonlinear config passing on its small box exits 0") {
    const std::string path = write_config("nonlinear.json", passing_nonlinear_config());
    const CliResult r = run_cli("check --config \"" + path + "\"");
    CHECK(r.exit_code == 0);
    CHECK(json::parse(r.out)["overall_pass"].get<bool>());
}

TEST_CASE("check: schema violations exit 3") {
    json bad = oracle_config();
    bad["unexpected"] = 1;
    const std::string p1 = write_config("bad_key.json", bad);
    CHECK(run_cli("check --config \"" + p1 + "\"").exit_code == 3);

    json wrong_dims = oracle_config();
    wrong_dims["A"] = {{1.0, 0.0}, {0.0, 1.0}};  // 2x2 for n = 1
    const std::string p2 = write_config("bad_dims.json", wrong_dims);
    CHECK(run_cli("check --config \"" + p2 + "\"").exit_code == 3);

    json asym = oracle_config();
    asym["n"] = 2;
    asym["params"] = {{"F0", {{2.0, 1.0}, {0.0, 2.0}}},
                      {"G0", {{2.0, 0.0}, {0.0, 2.0}}},
                      {"H0", {{1.0, 0.0}, {0.0, 1.0}}}};
    const std::string p3 = write_config("asym.json", asym);
    CHECK(run_cli("check --config \"" + p3 + "\"").exit_code == 3);

    const fs::path garbled = tmp_dir() / "garbled.json";
    std::ofstream(garbled) << "{ not json";
    CHECK(run_cli("check --config \"" + garbled.string() + "\"").exit_code == 3);

    CHECK(run_cli("check --config /nonexistent/x.json").exit_code == 3);
    CHECK(run_cli("check").exit_code == 3);            // missing required flag
    CHECK(run_cli("no-such-command").exit_code == 3);  // unknown subcommand
}

TEST_CASE("simulate: equilibrium start of the worked example emits zero rows") {
    const fs::path cfg_path = tmp_dir() / "ex4_sim.json";
    REQUIRE(run_cli("example4 --out \"" + cfg_path.string() + "\"").exit_code == 0);
    const CliResult r =
        run_cli("simulate --config \"" + cfg_path.string() + "\" --t1 5 --points 6");
    CHECK(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "t,x1,x2,y1,y2,z1,z2,V");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        const auto first_comma = line.find(',');
        CHECK(line.substr(first_comma) == ",0,0,0,0,0,0,0");
    }
    CHECK(rows == 6);
}

TEST_CASE("simulate: oracle settles on the 1/sqrt(2) response amplitude") {
    const std::string path = write_config("oracle_sim.json", oracle_config());
    const CliResult r = run_cli("simulate --config \"" + path +
                                "\" --t1 100 --points 4001 --rtol 1e-10 --atol 1e-12");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);  // header
    std::vector<double> ts, xs;
    while (std::getline(lines, line)) {
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        ts.push_back(std::stod(cell));
        std::getline(row, cell, ',');
        xs.push_back(std::stod(cell));
    }
    // Refine the sampled peak of |x| over the final period with a three-point
    // parabola; the raw grid max alone is only dt²-accurate.
    double amp = 0.0;
    for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
        if (ts[i] < 100.0 - kTwoPi) continue;
        const double y0 = std::abs(xs[i - 1]), y1 = std::abs(xs[i]), y2 = std::abs(xs[i + 1]);
        if (y1 < y0 || y1 < y2) continue;
        const double denom = y0 - 2.0 * y1 + y2;
        const double vertex = denom < 0.0 ? y1 - (y0 - y2) * (y0 - y2) / (8.0 * denom) : y1;
        amp = std::max(amp, vertex);
    }
    CHECK(amp == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("simulate: divergence exits 2 with a trailing comment") {
    const std::string path = write_config("anti.json", anti_damped_config());
    const CliResult r =
        run_cli("simulate --config \"" + path + "\" --x0 1 --t1 200 --points 51");
    CHECK(r.exit_code == 2);
    CHECK(r.out.find("# diverged at t=") != std::string::npos);
}

TEST_CASE("find-orbit: worked example returns the zero solution") {
    const fs::path cfg_path = tmp_dir() / "ex4_orbit.json";
    REQUIRE(run_cli("example4 --out \"" + cfg_path.string() + "\"").exit_code == 0);
    const CliResult r =
        run_cli("find-orbit --config \"" + cfg_path.string() + "\" --starts 0");
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.out);
    CHECK(rep["orbit"]["converged"].get<bool>());
    CHECK(rep["orbit"]["residual"].get<double>() <= 1e-10);
    for (double v : rep["orbit"]["s_star"]["x"].get<Vec>()) CHECK(v == 0.0);
    CHECK(rep["orbit"]["verify"]["pass"].get<bool>());
}

TEST_CASE("find-orbit: oracle hits the closed-form state, multistart dedups") {
    const std::string path = write_config("oracle_orbit.json", oracle_config());
    const CliResult r = run_cli("find-orbit --config \"" + path + "\" --starts 6 --seed 3");
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.out);
    CHECK(rep["orbit"]["newton_iters"].get<int>() <= 20);
    CHECK(rep["orbit"]["s_star"]["x"][0].get<double>() == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(rep["orbit"]["s_star"]["y"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rep["orbit"]["s_star"]["z"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rep["multistart"]["distinct"].size() == 1);
}

TEST_CASE("find-orbit: shooting that blows up within one period exits 2") {
    // anti-damped growth ~ e^{0.77 t}: over omega = 50 the flow passes the
    // blow-up norm, so the period map itself fails numerically
    const std::string path = write_config("anti_orbit.json", anti_damped_config());
    const CliResult r = run_cli("find-orbit --config \"" + path +
                                "\" --guess 1,0,0 --starts 0 --omega 50");
    CHECK(r.exit_code == 2);
    const json rep = json::parse(r.out);
    CHECK_FALSE(rep["orbit"]["converged"].get<bool>());
    CHECK(rep["orbit"].contains("error"));
}

TEST_CASE("uniqueness: oracle contracts, state-dependent forcing is refused") {
    const std::string path = write_config("oracle_uni.json", oracle_config());
    const CliResult r = run_cli("uniqueness --config \"" + path + "\" --pairs 3 --seed 5");
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.out);
    CHECK(rep["pass"].get<bool>());
    for (const json& pair : rep["pairs"]) {
        CHECK(pair["delta_fit"].get<double>() == doctest::Approx(0.5).epsilon(0.1));
        CHECK(pair["r_squared"].get<double>() >= 0.99);
    }

    const fs::path ex4 = tmp_dir() / "ex4_uni.json";
    REQUIRE(run_cli("example4 --out \"" + ex4.string() + "\"").exit_code == 0);
    CHECK(run_cli("uniqueness --config \"" + ex4.string() + "\"").exit_code == 3);
}

TEST_CASE("certify: certified config passes the decrease test") {
    const std::string path = write_config("certified2.json", certified_config());
    const CliResult r = run_cli("certify --config \"" + path + "\" --samples 300 --seed 5");
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.out);
    CHECK(rep["certificate_pass"].get<bool>());
    CHECK(rep["decrease_test"]["violations"].get<int>() == 0);
    CHECK(rep["decay"]["delta_6_feasible"].get<bool>());
    CHECK(rep["decay"]["delta_6_printed"].get<double>() == 0.0);
    CHECK(rep["decay"]["delta_8_printed"].is_null());  // printed delta_6 is zero
}

TEST_CASE("certify: worked example fails with the full evidence trail") {
    const fs::path cfg_path = tmp_dir() / "ex4_cert.json";
    REQUIRE(run_cli("example4 --out \"" + cfg_path.string() + "\"").exit_code == 0);
    const CliResult r = run_cli("certify --config \"" + cfg_path.string() + "\"");
    CHECK(r.exit_code == 1);
    const json rep = json::parse(r.out);
    CHECK_FALSE(rep["certificate_pass"].get<bool>());
    CHECK(rep.contains("spectral"));
    CHECK(rep.contains("decay"));
    CHECK(rep.contains("conditions"));
}

TEST_CASE("certify: identical seeds give byte-identical reports") {
    const std::string path = write_config("certified3.json", certified_config());
    const fs::path out1 = tmp_dir() / "cert_a.json";
    const fs::path out2 = tmp_dir() / "cert_b.json";
    CHECK(run_cli("certify --config \"" + path + "\" --seed 7 --out \"" + out1.string() +
                  "\"").exit_code == 0);
    CHECK(run_cli("certify --config \"" + path + "\" --seed 7 --out \"" + out2.string() +
                  "\"").exit_code == 0);
    const std::string a = read_file(out1.string());
    const std::string b = read_file(out2.string());
    CHECK(a == b);
    CHECK_FALSE(a.empty());
}

TEST_CASE("seed precedence: environment variable is the fallback") {
    const std::string path = write_config("oracle_seed.json", oracle_config());
    const CliResult env_run =
        run_cli("check --config \"" + path + "\"", "LYAPCERT_SEED=123 ");
    CHECK(json::parse(env_run.out)["seed"].get<std::uint64_t>() == 123);
    const CliResult flag_run =
        run_cli("check --config \"" + path + "\" --seed 9", "LYAPCERT_SEED=123 ");
    CHECK(json::parse(flag_run.out)["seed"].get<std::uint64_t>() == 9);
}

TEST_CASE("box overrides reach the report") {
    const std::string path = write_config("oracle_box.json", oracle_config());
    const CliResult r =
        run_cli("check --config \"" + path + "\" --box 0.5 --grid 3 --rand 8 --seed 2");
    const json rep = json::parse(r.out);
    CHECK(rep["box"]["grid"].get<int>() == 3);
    CHECK(rep["box"]["random"].get<int>() == 8);
    CHECK(rep["box"]["x"][0][0].get<double>() == doctest::Approx(-0.5));
    CHECK(rep["box"]["x"][0][1].get<double>() == doctest::Approx(0.5));
}
