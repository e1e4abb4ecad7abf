#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "core.hpp"
#include "oracle.hpp"

namespace sparse_eb {

/// Penalized subset selection: the k_hat largest |x_i| with k_hat minimizing
///   crit(k) = sum of the n-k smallest x_i^2 + (2 kappa + 1) sigma^2 k log(en/k).
struct SubsetSelection {
    IndexSet selected;
    std::size_t cardinality = 0;
    std::vector<double> criterion_values;  // crit(k), k = 0..n
    double threshold = 0.0;                // |x_[k_hat]|, 0 when nothing is selected
    double radius_sq = 0.0;                // sigma^2 (1 + k_hat log(en/k_hat))
};

namespace detail {

inline double penalty_weight(double kappa, double sigma) {
    return (2.0 * kappa + 1.0) * sigma * sigma;
}

}  // namespace detail

/// sigma^2 + sigma^2 |I| log(en/|I|) for a selection of size k out of n.
inline double radius_sq(std::size_t k, double sigma, std::size_t n) {
    return sigma * sigma * (1.0 + complexity_term(k, n));
}

inline double radius_sq(const SubsetSelection& sel, double sigma, std::size_t n) {
    return radius_sq(sel.cardinality, sigma, n);
}

/// crit(k, x) for a single k.
inline double criterion(std::size_t k, const Observation& x, double kappa) {
    const std::size_t n = x.size();
    if (k > n) {
        throw DomainError("criterion: k=" + std::to_string(k) + " outside [0, " +
                          std::to_string(n) + "]");
    }
    detail::require_positive(kappa, "kappa");
    const auto order = order_by_magnitude(x.values());
    const auto tail = detail::tail_square_sums(x.values(), order);
    return tail[k] + detail::penalty_weight(kappa, x.sigma()) * complexity_term(k, n);
}

/// Objective -sum_{i in I} x_i^2 + (2 kappa + 1) sigma^2 |I| log(en/|I|) of an
/// arbitrary subset, evaluated directly.
inline double selection_objective(const IndexSet& subset, const Observation& x, double kappa) {
    double s = 0.0;
    for (std::size_t i : subset) s += x[i] * x[i];
    return -s + detail::penalty_weight(kappa, x.sigma()) * complexity_term(subset.size(), x.size());
}

inline SubsetSelection select(const Observation& x, double kappa) {
    detail::require_positive(kappa, "kappa");
    const std::size_t n = x.size();
    const auto order = order_by_magnitude(x.values());
    const auto tail = detail::tail_square_sums(x.values(), order);
    const double weight = detail::penalty_weight(kappa, x.sigma());

    SubsetSelection sel;
    sel.criterion_values.resize(n + 1);
    std::size_t best = 0;
    for (std::size_t k = 0; k <= n; ++k) {
        sel.criterion_values[k] = tail[k] + weight * complexity_term(k, n);
        if (sel.criterion_values[k] < sel.criterion_values[best]) best = k;
    }
    sel.cardinality = best;
    sel.selected = to_index_set(order, best);
    sel.threshold = best == 0 ? 0.0 : std::abs(x[order[best - 1]]);
    sel.radius_sq = radius_sq(best, x.sigma(), n);
    return sel;
}

/// x restricted to the selected set, zero elsewhere.
inline Signal hard_threshold_estimate(const Observation& x, const SubsetSelection& sel) {
    std::vector<double> est(x.size(), 0.0);
    for (std::size_t i : sel.selected) est[i] = x[i];
    return Signal(std::move(est));
}

inline Signal hard_threshold_estimate(const Observation& x, double kappa) {
    return hard_threshold_estimate(x, select(x, kappa));
}

}  // namespace sparse_eb
