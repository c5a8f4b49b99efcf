#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "lyapcert/hypothesis.hpp"
#include "lyapcert/linalg.hpp"
#include "lyapcert/random.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

// ---------------------------------------------------------------------------
// the energy function
//
//   2V = ¼⟨BX,BX⟩ + 3/2⟨BY,Y⟩ + ⟨Z,Z⟩ + ⟨Z + AY + ½BX, Z + AY + ½BX⟩
// ---------------------------------------------------------------------------

inline double v_value(const SymMatrix& A, const SymMatrix& B, const State& s) {
    const int n = A.n();
    if (B.n() != n || s.n() != n) throw input_error("v_value: dimension mismatch");
    const Vec bx = B.apply(s.X);
    const Vec ay = A.apply(s.Y);
    const Vec by = B.apply(s.Y);
    double w2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = s.Z[static_cast<std::size_t>(i)] + ay[static_cast<std::size_t>(i)] +
                         0.5 * bx[static_cast<std::size_t>(i)];
        w2 += w * w;
    }
    const double two_v = 0.25 * dot(bx, bx) + 1.5 * dot(by, s.Y) + dot(s.Z, s.Z) + w2;
    return 0.5 * two_v;
}

/// The symmetric 3n×3n matrix M with 2V = sᵀMs on packed (X, Y, Z) storage:
///
///   [ ½B²    ½BA        ½B ]
///   [ ½AB    3/2·B+A²   A  ]
///   [ ½B     A          2I ]
inline SymMatrix v_gram_matrix(const SymMatrix& A, const SymMatrix& B) {
    const int n = A.n();
    if (B.n() != n) throw input_error("v_gram_matrix: dimension mismatch");
    const Matrix bb = Matrix::product(B, B);
    const Matrix aa = Matrix::product(A, A);
    const Matrix ba = Matrix::product(B, A);
    SymMatrix M(3 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j >= i) {
                M.set(i, j, 0.5 * bb(i, j));                             // X-X
                M.set(n + i, n + j, 1.5 * B(i, j) + aa(i, j));           // Y-Y
                M.set(2 * n + i, 2 * n + j, i == j ? 2.0 : 0.0);         // Z-Z
            }
            M.set(i, n + j, 0.5 * ba(i, j));                             // X-Y
            M.set(i, 2 * n + j, 0.5 * B(i, j));                          // X-Z
            M.set(n + i, 2 * n + j, A(i, j));                            // Y-Z
        }
    return M;
}

/// Extreme eigenvalues (δ2, δ3) of the Gram matrix, i.e. the constants in
/// δ2·‖s‖² ≤ 2V ≤ δ3·‖s‖². Throws when the form is not positive definite.
struct QuadraticBounds {
    double delta_2 = 0.0;
    double delta_3 = 0.0;
};

inline QuadraticBounds v_gram_bounds(const SymMatrix& A, const SymMatrix& B) {
    const Spectrum sp = sym_eigenvalues(v_gram_matrix(A, B));
    if (sp.min() <= 0.0)
        throw not_positive_definite_error(
            "v_gram_bounds: energy form is not positive definite (lambda_min = " +
                std::to_string(sp.min()) + ")",
            sp.min());
    return {sp.min(), sp.max()};
}

// ---------------------------------------------------------------------------
// time derivative along the flow
// ---------------------------------------------------------------------------

/// Exact chain rule on the explicit quadratic form: V̇ = ⟨Ms, ṡ⟩ with M the
/// Gram matrix. This is the module's ground truth; no finite differences.
inline double vdot_exact_with(const SymMatrix& A, const SymMatrix& B, const SystemDef& sys,
                              double t, const State& s) {
    if (s.n() != sys.n()) throw input_error("vdot_exact: dimension mismatch");
    if (!s.finite()) throw input_error("vdot_exact: non-finite state");
    const SymMatrix M = v_gram_matrix(A, B);
    const Vec packed = pack(s);
    Vec grad(packed.size());
    M.apply_into(packed.data(), grad.data());
    const Vec rhs = eval_rhs(sys, t, s);
    return dot(grad, rhs);
}

inline double vdot_exact(const SystemDef& sys, double t, const State& s) {
    return vdot_exact_with(sys.A(), sys.B(), sys, t, s);
}

// ---------------------------------------------------------------------------
// printed decomposition V̇ = −V1 − V2 − V3 + V4
// ---------------------------------------------------------------------------

/// Every term evaluated literally as printed, including the repeated
/// ⟨BX, H(X)⟩ across V1, V2, V3. The residual against the chain rule is
/// measured and reported; it is never asserted to be small, because the
/// printed decomposition need not be an identity for non-commuting fields.
struct LyapunovReport {
    double V = 0.0;
    double Vdot_exact = 0.0;
    double V1 = 0.0, V2 = 0.0, V3 = 0.0, V4 = 0.0;
    double decomposition_residual = 0.0;
};

inline LyapunovReport vdot_decomposition(const SystemDef& sys, const SymMatrix& A,
                                         const SymMatrix& B, double t, const State& s) {
    const int n = sys.n();
    if (A.n() != n || B.n() != n || s.n() != n)
        throw input_error("vdot_decomposition: dimension mismatch");
    if (!s.finite()) throw input_error("vdot_decomposition: non-finite state");
    const std::size_t un = static_cast<std::size_t>(n);

    SymMatrix F(n), G(n);
    Vec H(un), P(un);
    sys.eval_F(s.X.data(), s.Y.data(), s.Z.data(), F);
    sys.eval_G(s.X.data(), s.Y.data(), G);
    sys.eval_H(s.X.data(), H.data());
    sys.eval_P(t, s.X.data(), s.Y.data(), s.Z.data(), P.data());

    const SymMatrix FmA = F - A;
    const SymMatrix GmB = G - B;

    const Vec bx = B.apply(s.X);
    const Vec ay = A.apply(s.Y);
    const Vec gy = G.apply(s.Y);
    const Vec fz = F.apply(s.Z);
    const Vec fmaz = FmA.apply(s.Z);
    const Vec gmby = GmB.apply(s.Y);

    const double bx_h = dot(bx, H);

    LyapunovReport rep;
    rep.V = v_value(A, B, s);
    rep.V1 = 0.125 * bx_h + dot(H, ay) + 0.25 * dot(ay, gy);
    rep.V2 = 0.125 * bx_h + 0.5 * dot(fz, s.Z) + 2.0 * dot(H, s.Z);
    rep.V3 = 0.25 * bx_h + 0.25 * dot(ay, gy) + 0.5 * dot(fz, s.Z) + 0.5 * dot(bx, fmaz) +
             0.5 * dot(bx, gmby) + dot(ay, fmaz) + 2.0 * dot(gmby, s.Z) + dot(fmaz, s.Z) +
             0.5 * dot(gmby, ay);
    rep.V4 = 0.0;
    for (int i = 0; i < n; ++i)
        rep.V4 += (0.5 * bx[static_cast<std::size_t>(i)] + ay[static_cast<std::size_t>(i)] +
                   2.0 * s.Z[static_cast<std::size_t>(i)]) *
                  P[static_cast<std::size_t>(i)];

    rep.Vdot_exact = vdot_exact_with(A, B, sys, t, s);
    rep.decomposition_residual =
        std::abs(rep.Vdot_exact - (-rep.V1 - rep.V2 - rep.V3 + rep.V4));
    return rep;
}

inline LyapunovReport vdot_decomposition(const SystemDef& sys, double t, const State& s) {
    return vdot_decomposition(sys, sys.A(), sys.B(), t, s);
}

// ---------------------------------------------------------------------------
// proof constants
// ---------------------------------------------------------------------------

/// The completing-the-square constants k1..k6 and the decrease constants
/// δ4..δ8. δ6 is carried in two variants: as printed, ½·min{δ4, 3δ1δ5},
/// and corrected to ½·(δ4 − 3δ1δ5), which is what the estimate
/// V̇ ≤ −(δ4 − 3δ1δ5)·S + δ7·√S actually yields. Infeasible values
/// (δ4 ≤ 0, δ6 ≤ 0) are returned and flagged, never clamped or thrown.
struct DecayConstants {
    double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0, k5 = 0.0, k6 = 0.0;
    double delta_4 = 0.0;
    double delta_5 = 0.0;
    double delta_6_printed = 0.0;
    double delta_6_corrected = 0.0;
    double delta_7 = 0.0;
    double delta_8_printed = 0.0;    // 2δ7/δ6 with δ6 as printed; inf when δ6 ≤ 0
    double delta_8_corrected = 0.0;  // 2δ7/δ6_corrected; inf when that is ≤ 0
    bool delta_4_feasible = false;
    bool delta_6_feasible = false;   // corrected variant positive

    // Caps on Δh implied by the k variants and by the k1/k2 choices in
    // the decrease estimates, and which one binds.
    double dh_cap_printed_k = 0.0;   // k_printed·δa·δb
    double dh_cap_proof_k = 0.0;     // k_proof·δa·δb
    double dh_cap_k1 = 0.0;          // δb²/(8Δa)
    double dh_cap_k2 = 0.0;          // δa·δb/16
    std::string dh_binding_cap;
};

inline DecayConstants decay_constants(const SpectralBounds& b, const ForcingBound& f) {
    DecayConstants d;
    const double sqrt_eps = std::sqrt(b.eps);

    d.k1 = std::sqrt(std::max(0.0, 0.5 * b.delta_b / b.Delta_a));
    d.k2 = std::sqrt(std::max(0.0, 0.5 * b.delta_a));
    d.k3 = std::sqrt(std::min(1.0 / 8.0, 8.0 / (3.0 * b.Delta_b)));
    d.k4 = std::sqrt(std::min(b.Delta_b / 8.0, 14.0 / b.Delta_b));
    d.k5 = std::sqrt(std::min(1.0 / 3.0, 4.0 / (3.0 * b.Delta_a)));
    d.k6 = std::sqrt(std::min(2.0 / (3.0 * b.Delta_a), 2.0 / 3.0));

    d.delta_4 = std::min({0.25 * b.delta_b * b.delta_h - (b.Delta_b + 1.0) * sqrt_eps,
                          0.25 * b.delta_a * b.delta_b - 0.25 * (6.0 * b.Delta_a + 7.0) * sqrt_eps,
                          0.5 * b.delta_a - sqrt_eps});
    d.delta_4_feasible = d.delta_4 > 0.0;

    d.delta_5 = std::max({0.5 * b.Delta_b, b.Delta_a, 2.0});
    d.delta_6_printed = 0.5 * std::min(d.delta_4, 3.0 * f.delta_1 * d.delta_5);
    d.delta_6_corrected = 0.5 * (d.delta_4 - 3.0 * f.delta_1 * d.delta_5);
    d.delta_6_feasible = d.delta_6_corrected > 0.0;
    d.delta_7 = std::sqrt(3.0) * f.delta_0 * d.delta_5;

    const double inf = std::numeric_limits<double>::infinity();
    d.delta_8_printed = d.delta_6_printed > 0.0 ? 2.0 * d.delta_7 / d.delta_6_printed : inf;
    d.delta_8_corrected =
        d.delta_6_corrected > 0.0 ? 2.0 * d.delta_7 / d.delta_6_corrected : inf;

    d.dh_cap_printed_k = b.k_printed * b.delta_a * b.delta_b;
    d.dh_cap_proof_k = b.k_proof * b.delta_a * b.delta_b;
    d.dh_cap_k1 = b.delta_b * b.delta_b / (8.0 * b.Delta_a);
    d.dh_cap_k2 = b.delta_a * b.delta_b / 16.0;
    const double caps[4] = {d.dh_cap_printed_k, d.dh_cap_proof_k, d.dh_cap_k1, d.dh_cap_k2};
    const char* names[4] = {"printed-k", "proof-k", "k1-choice", "k2-choice"};
    int binding = 0;
    for (int i = 1; i < 4; ++i)
        if (caps[i] < caps[binding]) binding = i;
    d.dh_binding_cap = names[binding];
    return d;
}

// ---------------------------------------------------------------------------
// decrease spot test
// ---------------------------------------------------------------------------

/// Samples states on the shell ‖s‖ ∈ [δ8, 2δ8] and random phases t ∈ [0, ω),
/// checking V̇ ≤ −δ6·‖s‖² pointwise. Used with the corrected (δ6, δ8) pair.
struct DecreaseTest {
    int samples = 0;
    double radius_lo = 0.0, radius_hi = 0.0;
    int violations = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();  // max of V̇ + δ6‖s‖²
    bool skipped = false;  // δ6 ≤ 0 or δ8 not finite: nothing to certify
    bool pass = false;
};

inline DecreaseTest decrease_spot_test(const SystemDef& sys, double delta_6, double delta_8,
                                       int samples = 1000, std::uint64_t seed = 1) {
    DecreaseTest t;
    t.samples = samples;
    if (!(delta_6 > 0.0) || !std::isfinite(delta_8)) {
        t.skipped = true;
        return t;
    }
    t.radius_lo = delta_8;
    t.radius_hi = 2.0 * delta_8;
    const int dim = 3 * sys.n();
    SplitMix64 rng(seed);
    for (int k = 0; k < samples; ++k) {
        Vec dir(static_cast<std::size_t>(dim));
        double nrm2 = 0.0;
        for (auto& c : dir) {
            c = rng.gaussian();
            nrm2 += c * c;
        }
        const double nrm = std::sqrt(nrm2);
        const double r = rng.uniform(t.radius_lo, t.radius_hi);
        for (auto& c : dir) c *= r / nrm;
        const State s = unpack(sys.n(), dir.data());
        const double phase = rng.uniform(0.0, sys.omega());
        const double vd = vdot_exact(sys, phase, s);
        const double margin = vd + delta_6 * s.norm_sq();
        t.worst_margin = std::max(t.worst_margin, margin);
        if (margin > 0.0) ++t.violations;
    }
    t.pass = t.violations == 0;
    return t;
}

}  // namespace lyapcert
