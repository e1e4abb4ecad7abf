#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace sparse_eb {

/// The tau-oracle of a signal and the functionals derived from it.
struct OracleReport {
    double tau = 1.0;
    double sigma = 1.0;
    std::size_t n = 0;
    IndexSet oracle_set;
    std::size_t oracle_cardinality = 0;
    double rate_sq = 0.0;        // bias_part + variance_part
    double bias_part = 0.0;      // sum of theta_i^2 off the oracle set
    double variance_part = 0.0;  // tau sigma^2 |I| log(en/|I|)
    double ebr_ratio = 0.0;      // bias_part / (sigma^2 + sigma^2 |I| log(en/|I|))
};

namespace detail {

inline void require_tau(double tau) { require_positive(tau, "tau"); }

/// tail[k] = sum of the n-k smallest squares, summed from the smallest upward.
/// `order` is the decreasing-magnitude order of v.
inline std::vector<double> tail_square_sums(std::span<const double> v,
                                            std::span<const std::size_t> order) {
    const std::size_t n = v.size();
    std::vector<double> tail(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        const double x = v[order[k]];
        tail[k] = tail[k + 1] + x * x;
    }
    return tail;
}

/// Minimizes tail[k] + weight * penalty(k) over k in [k_min, n]; smallest k wins ties.
template <typename Penalty>
std::pair<std::size_t, double> argmin_cardinality(std::span<const double> tail,
                                                  std::size_t k_min, Penalty&& penalty) {
    const std::size_t n = tail.size() - 1;
    std::size_t best_k = k_min;
    double best = tail[k_min] + penalty(k_min);
    for (std::size_t k = k_min + 1; k <= n; ++k) {
        const double value = tail[k] + penalty(k);
        if (value < best) {
            best = value;
            best_k = k;
        }
    }
    return {best_k, best};
}

inline OracleReport make_report(const Signal& theta, double sigma, double tau,
                                std::span<const std::size_t> order,
                                std::span<const double> tail, std::size_t k) {
    const std::size_t n = theta.size();
    const double s2 = sigma * sigma;
    OracleReport r;
    r.tau = tau;
    r.sigma = sigma;
    r.n = n;
    r.oracle_set = to_index_set(order, k);
    r.oracle_cardinality = k;
    r.bias_part = tail[k];
    r.variance_part = tau * s2 * complexity_term(k, n);
    r.rate_sq = r.bias_part + r.variance_part;
    r.ebr_ratio = r.bias_part / (s2 + s2 * complexity_term(k, n));
    return r;
}

}  // namespace detail

/// r^2_tau(I, theta) = sum_{i not in I} theta_i^2 + tau sigma^2 |I| log(en/|I|).
inline double tau_rate(const IndexSet& subset, const Signal& theta, double sigma, double tau) {
    const std::size_t n = theta.size();
    std::vector<char> in(n, 0);
    for (std::size_t i : subset) {
        if (i >= n) throw DomainError("tau_rate: index " + std::to_string(i + 1) + " > n");
        in[i] = 1;
    }
    double bias = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!in[i]) bias += theta[i] * theta[i];
    }
    return bias + tau * sigma * sigma * complexity_term(subset.size(), n);
}

/// Best subset among those with at least k_min elements. k_min = 0 is the
/// unrestricted tau-oracle.
inline OracleReport restricted_tau_oracle(const Signal& theta, double sigma, double tau,
                                          std::size_t k_min) {
    detail::require_positive(sigma, "sigma");
    detail::require_tau(tau);
    const std::size_t n = theta.size();
    if (k_min > n) {
        throw DomainError("restricted_tau_oracle: k_min=" + std::to_string(k_min) + " > n=" +
                          std::to_string(n));
    }
    const auto order = order_by_magnitude(theta.values());
    const auto tail = detail::tail_square_sums(theta.values(), order);
    const double weight = tau * sigma * sigma;
    const auto [k, value] = detail::argmin_cardinality(
        tail, k_min, [&](std::size_t j) { return weight * complexity_term(j, n); });
    (void)value;
    return detail::make_report(theta, sigma, tau, order, tail, k);
}

inline OracleReport tau_oracle(const Signal& theta, double sigma, double tau) {
    return restricted_tau_oracle(theta, sigma, tau, 0);
}

struct ROracle {
    IndexSet oracle_set;
    double rate_sq = 0.0;
};

/// Minimizer of R^2(I, theta) = sum_{i not in I} theta_i^2 + sigma^2 |I|.
inline ROracle r_oracle(const Signal& theta, double sigma) {
    detail::require_positive(sigma, "sigma");
    const auto order = order_by_magnitude(theta.values());
    const auto tail = detail::tail_square_sums(theta.values(), order);
    const double s2 = sigma * sigma;
    const auto [k, value] = detail::argmin_cardinality(
        tail, 0, [&](std::size_t j) { return s2 * static_cast<double>(j); });
    return {to_index_set(order, k), value};
}

/// theta in the EBR class Theta_eb(t, tau), i.e. b_tau(theta) <= t.
inline bool ebr_member(const Signal& theta, double sigma, double tau, double t) {
    if (!(t >= 0.0)) throw ConfigError("ebr threshold t must be >= 0");
    return tau_oracle(theta, sigma, tau).ebr_ratio <= t;
}

}  // namespace sparse_eb
