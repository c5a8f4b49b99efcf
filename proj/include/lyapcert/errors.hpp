#pragma once

#include <stdexcept>
#include <string>

namespace lyapcert {

/// Bad caller input: malformed config, dimension mismatch, violated precondition.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure inside an otherwise valid computation.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A system field (F, G, H or P) produced a non-finite value.
class eval_error : public numeric_error {
public:
    eval_error(std::string field_name, const std::string& msg)
        : numeric_error(msg), field(std::move(field_name)) {}
    std::string field;
};

/// Trajectory left the admissible region (norm above the blow-up threshold).
class divergence_error : public numeric_error {
public:
    divergence_error(const std::string& msg, double t)
        : numeric_error(msg), t_last(t) {}
    double t_last;  // last time with a finite state
};

/// Adaptive step size underflowed; the problem is too stiff for this method.
class stiffness_error : public numeric_error {
public:
    stiffness_error(const std::string& msg, double t, double h)
        : numeric_error(msg), t_stall(t), h_last(h) {}
    double t_stall;
    double h_last;
};

/// Secant construction failed its residual identity check.
class secant_residual_error : public numeric_error {
public:
    secant_residual_error(const std::string& msg, double r)
        : numeric_error(msg), residual(r) {}
    double residual;
};

/// Finite-difference period-map Jacobian too ill-conditioned for Newton.
class singular_jacobian_error : public numeric_error {
public:
    singular_jacobian_error(const std::string& msg, double cond)
        : numeric_error(msg), condition(cond) {}
    double condition;
};

/// Gram matrix of the energy function is not positive definite.
class not_positive_definite_error : public numeric_error {
public:
    not_positive_definite_error(const std::string& msg, double lmin)
        : numeric_error(msg), lambda_min(lmin) {}
    double lambda_min;
};

}  // namespace lyapcert
