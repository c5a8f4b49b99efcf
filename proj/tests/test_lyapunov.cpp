#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "lyapcert/integrate.hpp"
#include "lyapcert/lyapunov.hpp"
#include "lyapcert/system.hpp"
#include "oracles.hpp"

using namespace lyapcert;

namespace {

State random_state(int n, SplitMix64& rng, double scale = 1.0) {
    State s = State::zero(n);
    for (int i = 0; i < n; ++i) {
        s.X[static_cast<std::size_t>(i)] = rng.uniform(-scale, scale);
        s.Y[static_cast<std::size_t>(i)] = rng.uniform(-scale, scale);
        s.Z[static_cast<std::size_t>(i)] = rng.uniform(-scale, scale);
    }
    return s;
}

SymMatrix random_posdef(int n, SplitMix64& rng) {
    SymMatrix m(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) m.set(i, j, rng.uniform(-0.3, 0.3));
    for (int i = 0; i < n; ++i) m.set(i, i, m(i, i) + 1.5);
    return m;
}

/// Finite-difference dV/dt along a short, very finely resolved RK4 path
/// through (t, s): the independent oracle for the chain rule.
double fd_vdot(const SystemDef& sys, double t, const State& s, double dt = 1e-6) {
    IntegratorOptions opts;
    opts.adaptive = false;
    opts.h = dt / 4.0;
    opts.output_points = 2;
    opts.record_v = false;
    const State fwd = integrate(sys, s, t, t + dt, opts).states.back();
    const State bwd = integrate(sys, s, t, t - dt, opts).states.back();
    return (v_value(sys.A(), sys.B(), fwd) - v_value(sys.A(), sys.B(), bwd)) / (2.0 * dt);
}

/// The certified linear system used for the decrease experiments:
/// F = G = 2, H slope 0.05, forcing envelope delta_0 = 0.01, delta_1 = 0.
SystemDef decrease_demo_system() {
    const double sqrt_eps = 1.0 / 240.0;
    return make_scalar_linear(2.0, 2.0, 0.05, 0.01, 1.0, 0.0, kTwoPi, std::nullopt, std::nullopt,
                              sqrt_eps * sqrt_eps);
}

}  // namespace

TEST_CASE("v_value: zero state, and direct scalar substitutions") {
    const SymMatrix one = SymMatrix::identity(1);
    CHECK(v_value(one, one, State::zero(1)) == 0.0);
    // 2V(1,0,0) = ¼ + ‖½‖² = ½, so V = ¼
    CHECK(v_value(one, one, State({1.0}, {0.0}, {0.0})) == doctest::Approx(0.25));
    // 2V(0,1,0) = 3/2 + 1 = 5/2, so V = 5/4
    CHECK(v_value(one, one, State({0.0}, {1.0}, {0.0})) == doctest::Approx(1.25));
}

TEST_CASE("v_gram_matrix: hand-expanded scalar case") {
    const SymMatrix one = SymMatrix::identity(1);
    const SymMatrix m = v_gram_matrix(one, one);
    // 2V = ½x² + 5/2·y² + 2z² + xy + xz + 2yz
    const double want[3][3] = {{0.5, 0.5, 0.5}, {0.5, 2.5, 1.0}, {0.5, 1.0, 2.0}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(m(i, j) == doctest::Approx(want[i][j]));
    const QuadraticBounds qb = v_gram_bounds(one, one);
    CHECK(qb.delta_2 > 0.0);
    CHECK(qb.delta_2 < qb.delta_3);
}

TEST_CASE("v_gram_matrix: block re-expansion oracle under scaling") {
    SplitMix64 rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 3);
        const SymMatrix a = random_posdef(n, rng);
        const SymMatrix b = random_posdef(n, rng);
        const double c = rng.uniform(0.5, 2.0);
        const SymMatrix scaled = v_gram_matrix(c * a, c * b);
        // independent block assembly from the definition of 2V
        const SymMatrix ca = c * a, cb = c * b;
        const Matrix cb2 = Matrix::product(cb, cb);
        const Matrix ca2 = Matrix::product(ca, ca);
        const Matrix cba = Matrix::product(cb, ca);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                CHECK(scaled(i, j) == doctest::Approx(0.5 * cb2(i, j)).scale(1.0));
                CHECK(scaled(n + i, n + j) ==
                      doctest::Approx(1.5 * cb(i, j) + ca2(i, j)).scale(1.0));
                CHECK(scaled(i, n + j) == doctest::Approx(0.5 * cba(i, j)).scale(1.0));
                CHECK(scaled(i, 2 * n + j) == doctest::Approx(0.5 * cb(i, j)).scale(1.0));
                CHECK(scaled(n + i, 2 * n + j) == doctest::Approx(ca(i, j)).scale(1.0));
                CHECK(scaled(2 * n + i, 2 * n + j) ==
                      doctest::Approx(i == j ? 2.0 : 0.0).scale(1.0));
            }
    }
}

TEST_CASE("gram consistency: v_value equals s'Ms/2 everywhere") {
    SplitMix64 rng(31);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 3);
        const SymMatrix a = random_posdef(n, rng);
        const SymMatrix b = random_posdef(n, rng);
        const SymMatrix m = v_gram_matrix(a, b);
        const State s = random_state(n, rng, 2.0);
        const double direct = v_value(a, b, s);
        const double via_gram = 0.5 * quadratic_form(m, pack(s));
        CHECK(direct == doctest::Approx(via_gram).epsilon(1e-12).scale(
                            std::max(1.0, std::abs(direct))));
    }
}

TEST_CASE("v_gram_bounds: sampling bracket over 1000 random states") {
    SplitMix64 rng(47);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 3);
        const SymMatrix a = random_posdef(n, rng);
        const SymMatrix b = random_posdef(n, rng);
        const QuadraticBounds qb = v_gram_bounds(a, b);
        for (int k = 0; k < 100; ++k) {
            const State s = random_state(n, rng, 3.0);
            const double two_v = 2.0 * v_value(a, b, s);
            const double s2 = s.norm_sq();
            CHECK(two_v >= qb.delta_2 * s2 - 1e-9 * std::max(1.0, s2));
            CHECK(two_v <= qb.delta_3 * s2 + 1e-9 * std::max(1.0, s2));
        }
    }
}

TEST_CASE("v_gram_bounds: indefinite comparison matrices are rejected") {
    const SymMatrix neg = -1.0 * SymMatrix::identity(2);
    CHECK_THROWS_AS(v_gram_bounds(neg, neg), not_positive_definite_error);
}

TEST_CASE("vdot_exact: zero at an unforced equilibrium") {
    const SystemDef sys = make_example4({.forcing = Example4Forcing::none});
    CHECK(vdot_exact(sys, 0.0, State::zero(2)) == 0.0);
}

TEST_CASE("vdot_exact: matches the finite-difference oracle on a scalar system") {
    const SymMatrix two = SymMatrix::diagonal({2.0});
    const SystemDef sys =
        make_scalar_linear(2.0, 2.0, 1.0, 0.0, 1.0, 0.0, kTwoPi, two, two);
    const State s({1.0}, {1.0}, {1.0});
    const double exact = vdot_exact(sys, 0.0, s);
    const double fd = fd_vdot(sys, 0.0, s);
    CHECK(exact == doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("vdot_exact: finite-difference agreement on 100 states per family") {
    SplitMix64 rng(2718);
    const SystemDef systems[] = {oracles::linear_oracle(), make_example4({}),
                                 make_diagonal_polynomial(2, {.amp = {0.1, 0.1}}, kTwoPi)};
    for (const SystemDef& sys : systems) {
        for (int rep = 0; rep < 100; ++rep) {
            const State s = random_state(sys.n(), rng);
            const double t = rng.uniform(0.0, kTwoPi);
            const double exact = vdot_exact(sys, t, s);
            const double fd = fd_vdot(sys, t, s);
            CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
        }
    }
}

TEST_CASE("vdot_exact: tracks dV/dt along a worked-example trajectory") {
    const SystemDef sys = make_example4({});
    IntegratorOptions opts;
    opts.abs_tol = 1e-12;
    opts.rel_tol = 1e-10;
    opts.output_points = 9;
    const Trajectory traj =
        integrate(sys, State({0.3, 0.1}, {0.0, 0.1}, {-0.1, 0.0}), 0.0, 4.0, opts);
    REQUIRE_FALSE(traj.meta.diverged);
    for (std::size_t k = 1; k + 1 < traj.states.size(); ++k) {
        const double exact = vdot_exact(sys, traj.times[k], traj.states[k]);
        const double fd = fd_vdot(sys, traj.times[k], traj.states[k]);
        CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
    }
}

TEST_CASE("vdot_decomposition: V4 vanishes without forcing and is the forcing product") {
    const SystemDef unforced = make_example4({.forcing = Example4Forcing::none});
    SplitMix64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const State s = random_state(2, rng);
        const LyapunovReport r = vdot_decomposition(unforced, 0.7, s);
        CHECK(r.V4 == 0.0);
    }

    const SystemDef forced = make_example4({});
    for (int rep = 0; rep < 20; ++rep) {
        const State s = random_state(2, rng);
        const double t = rng.uniform(0.0, kTwoPi);
        const LyapunovReport r = vdot_decomposition(forced, t, s);
        // recompute <½BX + AY + 2Z, P> with the same arithmetic
        Vec p(2);
        forced.eval_P(t, s.X.data(), s.Y.data(), s.Z.data(), p.data());
        const Vec bx = forced.B().apply(s.X);
        const Vec ay = forced.A().apply(s.Y);
        double v4 = 0.0;
        for (int i = 0; i < 2; ++i)
            v4 += (0.5 * bx[static_cast<std::size_t>(i)] + ay[static_cast<std::size_t>(i)] +
                   2.0 * s.Z[static_cast<std::size_t>(i)]) *
                  p[static_cast<std::size_t>(i)];
        CHECK(r.V4 == v4);
    }
}

TEST_CASE("vdot_decomposition: every term vanishes at the origin when H(0)=0") {
    const SystemDef sys = make_example4({});
    const LyapunovReport r = vdot_decomposition(sys, 1.3, State::zero(2));
    CHECK(r.V1 == 0.0);
    CHECK(r.V2 == 0.0);
    CHECK(r.V3 == 0.0);
    CHECK(r.V4 == 0.0);
    CHECK(r.V == 0.0);
}

TEST_CASE("vdot_decomposition: worked example at a fixed state is finite, residual logged") {
    const SystemDef sys = make_example4({});
    const State s({1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0});
    const LyapunovReport r = vdot_decomposition(sys, 0.0, s);
    CHECK(std::isfinite(r.V1));
    CHECK(std::isfinite(r.V2));
    CHECK(std::isfinite(r.V3));
    CHECK(std::isfinite(r.V4));
    CHECK(std::isfinite(r.decomposition_residual));
    // the residual is diagnostic output; record it without asserting a value
    MESSAGE("decomposition residual at the worked-example state: ",
            r.decomposition_residual, " (Vdot_exact = ", r.Vdot_exact, ")");
}

TEST_CASE("decay_constants: printed k formulas evaluated directly") {
    SpectralBounds b;
    b.delta_a = 2.0;
    b.Delta_a = 2.0;
    b.delta_b = 2.0;
    b.Delta_b = 1.0;
    b.delta_h = 0.05;
    b.Delta_h = 0.05;
    b.eps = 1e-6;
    compute_derived_bounds(b);
    ForcingBound f;
    f.delta_0 = 1.0;
    f.delta_1 = 0.0;
    DecayConstants d = decay_constants(b, f);
    // k3² = min{1/8, 8/3} = 1/8
    CHECK(d.k3 * d.k3 == doctest::Approx(0.125));

    b.Delta_b = 2.0;
    compute_derived_bounds(b);
    d = decay_constants(b, f);
    // delta_5 = max{1, 2, 2} = 2, delta_7 = sqrt(3)·1·2
    CHECK(d.delta_5 == doctest::Approx(2.0));
    CHECK(d.delta_7 == doctest::Approx(2.0 * std::sqrt(3.0)));
    CHECK(d.k1 * d.k1 == doctest::Approx(0.5));   // ½δb/Δa = ½
    CHECK(d.k2 * d.k2 == doctest::Approx(1.0));   // ½δa = 1
    CHECK(d.k4 * d.k4 == doctest::Approx(0.25));  // min{2/8, 14/2}
    CHECK(d.k5 * d.k5 == doctest::Approx(1.0 / 3.0));
    CHECK(d.k6 * d.k6 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("decay_constants: the boundary epsilon makes delta_4 exactly flag") {
    SpectralBounds b;
    b.delta_a = 2.0;
    b.Delta_a = 2.0;
    b.delta_b = 2.0;
    b.Delta_b = 2.0;
    b.delta_h = 0.05;
    b.Delta_h = 0.05;
    b.eps = (1.0 / 120.0) * (1.0 / 120.0);  // sqrt(eps) right at the budget
    compute_derived_bounds(b);
    CHECK(b.sqrt_eps_budget == doctest::Approx(1.0 / 120.0));
    ForcingBound f;
    const DecayConstants d = decay_constants(b, f);
    // min{0.025 - 3/120, 1 - 19/480, 1 - 1/120} = 0: infeasible boundary
    CHECK(d.delta_4 == doctest::Approx(0.0).scale(1.0));
    CHECK_FALSE(d.delta_4_feasible);
    CHECK(d.dh_binding_cap == "proof-k");
}

TEST_CASE("decay_constants: delta_6 variants and the radii") {
    SpectralBounds b;
    b.delta_a = 2.0;
    b.Delta_a = 2.0;
    b.delta_b = 2.0;
    b.Delta_b = 2.0;
    b.delta_h = 0.05;
    b.Delta_h = 0.05;
    b.eps = (1.0 / 240.0) * (1.0 / 240.0);
    compute_derived_bounds(b);
    ForcingBound f;
    f.delta_0 = 0.01;
    f.delta_1 = 0.0;
    const DecayConstants d = decay_constants(b, f);
    CHECK(d.delta_4 > 0.0);
    CHECK(d.delta_4_feasible);
    // delta_1 = 0 collapses the printed min to zero but not the corrected form
    CHECK(d.delta_6_printed == 0.0);
    CHECK(d.delta_6_corrected == doctest::Approx(0.5 * d.delta_4));
    CHECK(d.delta_6_feasible);
    CHECK(std::isinf(d.delta_8_printed));
    CHECK(d.delta_8_corrected == doctest::Approx(2.0 * d.delta_7 / d.delta_6_corrected));
}

TEST_CASE("decrease certificate holds outside the corrected radius") {
    const SystemDef sys = decrease_demo_system();
    const SpectralBounds b = spectral_bounds(sys, DomainBox::cube(1, 1.0, 5, 32, 1));
    const ForcingBound f = forcing_bound_fit(sys, DomainBox::cube(1, 1.0, 5, 32, 1));
    CHECK(f.delta_0 == doctest::Approx(0.01));
    CHECK(f.delta_1 == 0.0);
    const ConditionReport cond = check_theorem_conditions(b);
    CHECK(cond.overall);
    const DecayConstants d = decay_constants(b, f);
    REQUIRE(d.delta_6_feasible);
    const DecreaseTest t =
        decrease_spot_test(sys, d.delta_6_corrected, d.delta_8_corrected, 200, 99);
    CHECK_FALSE(t.skipped);
    CHECK(t.violations == 0);
    CHECK(t.pass);

    // With the printed delta_6 = 0 the radius is infinite and the test has
    // nothing to certify; that outcome is recorded, not hidden.
    const DecreaseTest printed =
        decrease_spot_test(sys, d.delta_6_printed, d.delta_8_printed, 50, 99);
    CHECK(printed.skipped);
}

TEST_CASE("vdot_decomposition guards") {
    const SystemDef sys = make_example4({});
    CHECK_THROWS_AS(vdot_decomposition(sys, SymMatrix::identity(3), SymMatrix::identity(3), 0.0,
                                       State::zero(2)),
                    input_error);
}
