#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "posterior.hpp"
#include "selector.hpp"

namespace sparse_eb {

enum class CenterMethod { Threshold, Shrinkage };

inline CenterMethod parse_center_method(std::string_view name) {
    if (name == "threshold") return CenterMethod::Threshold;
    if (name == "shrinkage") return CenterMethod::Shrinkage;
    throw ConfigError("unknown center method '" + std::string(name) + "'");
}

inline std::string_view to_string(CenterMethod m) {
    return m == CenterMethod::Threshold ? "threshold" : "shrinkage";
}

/// Closed Euclidean ball B(center, radius) with radius^2 = M * base_radius_sq.
struct ConfidenceBall {
    Signal center;
    double radius = 0.0;
    double inflation_factor = 1.0;  // M
    double base_radius_sq = 0.0;    // sigma^2 (1 + |I| log(en/|I|)) of the selector
    std::size_t selected_cardinality = 0;
};

inline ConfidenceBall confidence_ball(const Observation& x, double kappa, double M,
                                      CenterMethod center = CenterMethod::Threshold) {
    detail::require_positive(M, "M");
    const SubsetSelection sel = select(x, kappa);
    ConfidenceBall ball;
    ball.center = center == CenterMethod::Threshold ? hard_threshold_estimate(x, sel)
                                                    : shrinkage_mean(build(x, kappa), x);
    ball.inflation_factor = M;
    ball.base_radius_sq = sel.radius_sq;
    ball.radius = std::sqrt(M * sel.radius_sq);
    ball.selected_cardinality = sel.cardinality;
    return ball;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DomainError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// ||center - theta|| <= radius (boundary included).
inline bool covers(const ConfidenceBall& ball, const Signal& theta) {
    return std::sqrt(squared_distance(ball.center.values(), theta.values())) <= ball.radius;
}

/// Theory-side radius^2 = M2 (b_tau + tau) r_hat^2 + M sigma^2 for a
/// user-supplied M2 (the constant is not available in closed form).
inline double theory_radius_sq(double M2, double ebr_ratio, double tau, double radius_sq,
                               double M, double sigma) {
    return M2 * (ebr_ratio + tau) * radius_sq + M * sigma * sigma;
}

/// Constants for the sharper normal-noise analysis.
struct NormalCaseConstants {
    double kappa = 0.0;
    double h0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double kappa_bar_normal = kNormalKappaBound;
    bool c1_exceeds_two = false;
    bool kappa_exceeds_bound = false;

    /// alpha(tau, rho) = (tau/4)(1 - rho) - kappa (1 + rho) - 1/2
    double alpha(double tau, double rho) const {
        return tau / 4.0 * (1.0 - rho) - kappa * (1.0 + rho) - 0.5;
    }
};

struct TheoryConstants {
    double beta = 1.0;
    double B = 1.0;
    double kappa = 0.0;
    double kappa_bar = 0.0;  // (12 - beta + 4B) / (4 beta)
    bool kappa_exceeds_kappa_bar = false;
    NormalCaseConstants normal_case;

    /// (6 (kappa beta + B)(1 + rho) + 3 beta) / (2 beta (1 - rho)), rho in [0, 1).
    double tau_bar(double rho) const {
        if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("tau_bar: rho must lie in [0, 1)");
        return (6.0 * (kappa * beta + B) * (1.0 + rho) + 3.0 * beta) / (2.0 * beta * (1.0 - rho));
    }
};

inline NormalCaseConstants normal_case_constants(double kappa) {
    detail::require_positive(kappa, "kappa");
    NormalCaseConstants c;
    c.kappa = kappa;
    c.h0 = 2.0 * kappa / (2.0 * kappa + 1.0);
    c.c1 = kappa - 0.5 * std::log(2.0 * kappa + 1.0) - kappa / (4.0 * kappa + 1.0);
    c.c2 = kappa / (4.0 * kappa + 1.0);
    c.c3 = 4.0 * kappa + 1.0;
    c.c1_exceeds_two = c.c1 > 2.0;
    c.kappa_exceeds_bound = kappa > kNormalKappaBound;
    return c;
}

inline TheoryConstants theory_constants(double beta, double B, double kappa) {
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw DomainError("beta must lie in (0, 1] (got " + std::to_string(beta) + ")");
    }
    detail::require_positive(B, "B");
    detail::require_positive(kappa, "kappa");
    TheoryConstants t;
    t.beta = beta;
    t.B = B;
    t.kappa = kappa;
    t.kappa_bar = (12.0 - beta + 4.0 * B) / (4.0 * beta);
    t.kappa_exceeds_kappa_bar = kappa > t.kappa_bar;
    t.normal_case = normal_case_constants(kappa);
    return t;
}

}  // namespace sparse_eb
