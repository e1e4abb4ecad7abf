#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace sparse_eb {

/// Index sets are stored 0-based and sorted ascending. All external artifacts
/// (CLI output, files) use 1-based indices.
using IndexSet = std::vector<std::size_t>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Smallest kappa for which the normal-noise theory constants are valid.
inline constexpr double kNormalKappaBound = 3.24;

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw ConfigError(std::string(what) + ": entry " + std::to_string(i + 1) +
                              " is not finite");
        }
    }
}

inline void require_positive(double value, const char* what) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ConfigError(std::string(what) + " must be positive and finite (got " +
                          std::to_string(value) + ")");
    }
}

}  // namespace detail

/// Unknown mean vector theta.
class Signal {
public:
    Signal() = default;
    explicit Signal(std::vector<double> theta) : theta_(std::move(theta)) {
        detail::require_finite(theta_, "theta");
    }

    std::size_t size() const noexcept { return theta_.size(); }
    std::span<const double> values() const noexcept { return theta_; }
    double operator[](std::size_t i) const { return theta_[i]; }

    /// Number of nonzero coordinates.
    std::size_t sparsity() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(theta_.begin(), theta_.end(), [](double t) { return t != 0.0; }));
    }

    IndexSet active_set() const {
        IndexSet out;
        for (std::size_t i = 0; i < theta_.size(); ++i) {
            if (theta_[i] != 0.0) out.push_back(i);
        }
        return out;
    }

    Signal scaled(double c) const {
        std::vector<double> t(theta_);
        for (auto& v : t) v *= c;
        return Signal(std::move(t));
    }

private:
    std::vector<double> theta_;
};

/// Data vector x_i = theta_i + sigma * xi_i with known noise scale sigma.
class Observation {
public:
    Observation(std::vector<double> x, double sigma) : x_(std::move(x)), sigma_(sigma) {
        if (x_.empty()) throw ConfigError("observation must have n >= 1 entries");
        detail::require_positive(sigma_, "sigma");
        detail::require_finite(x_, "x");
    }

    std::size_t size() const noexcept { return x_.size(); }
    double sigma() const noexcept { return sigma_; }
    std::span<const double> values() const noexcept { return x_; }
    double operator[](std::size_t i) const { return x_[i]; }

    Observation scaled(double c) const {
        std::vector<double> x(x_);
        for (auto& v : x) v *= c;
        return Observation(std::move(x), sigma_ * c);
    }

private:
    std::vector<double> x_;
    double sigma_;
};

struct PriorConfig {
    double kappa = 0.7;
    /// K of the product-prior variant; unset when the subset-mixture prior is used.
    std::optional<double> product_variance_factor;

    void validate() const {
        detail::require_positive(kappa, "kappa");
        if (product_variance_factor) detail::require_positive(*product_variance_factor, "K");
    }

    /// Whether kappa exceeds the normal-case bound under which the theory applies.
    /// Smaller values are allowed (the reference simulation uses 0.7).
    bool meets_normal_theory_bound() const noexcept { return kappa > kNormalKappaBound; }
};

enum class NoiseFamily { GaussianIid, UniformBounded, Rademacher, StudentTStress };

inline std::string_view to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::GaussianIid: return "gaussian-iid";
        case NoiseFamily::UniformBounded: return "uniform-bounded";
        case NoiseFamily::Rademacher: return "rademacher";
        case NoiseFamily::StudentTStress: return "student-t-stress";
    }
    return "unknown";
}

inline NoiseFamily parse_noise_family(std::string_view name) {
    if (name == "gaussian-iid" || name == "gaussian") return NoiseFamily::GaussianIid;
    if (name == "uniform-bounded" || name == "uniform") return NoiseFamily::UniformBounded;
    if (name == "rademacher") return NoiseFamily::Rademacher;
    if (name == "student-t-stress" || name == "student-t") return NoiseFamily::StudentTStress;
    throw ConfigError("unknown noise family '" + std::string(name) + "'");
}

/// Noise distribution of the xi_i. Every family has Var(xi_i) <= 1:
///   gaussian-iid      N(0,1)
///   uniform-bounded   U[-bound, bound], 0 < bound <= sqrt(3)
///   rademacher        +-1 with probability 1/2
///   student-t-stress  t_df * sqrt((df-2)/df), df > 2; heavy tails violate the
///                     exponential moment condition and exist only for stress tests
struct NoiseSpec {
    NoiseFamily family = NoiseFamily::GaussianIid;
    double bound = std::sqrt(3.0);
    double df = 5.0;

    void validate() const {
        switch (family) {
            case NoiseFamily::UniformBounded:
                if (!(bound > 0.0) || bound > std::sqrt(3.0) + 1e-12) {
                    throw ConfigError("uniform-bounded noise needs 0 < bound <= sqrt(3) (got " +
                                      std::to_string(bound) + ")");
                }
                break;
            case NoiseFamily::StudentTStress:
                if (!(df > 2.0) || !std::isfinite(df)) {
                    throw ConfigError("student-t-stress noise needs df > 2 (got " +
                                      std::to_string(df) + ")");
                }
                break;
            default: break;
        }
    }

    bool satisfies_exponential_moment_condition() const noexcept {
        return family != NoiseFamily::StudentTStress;
    }
};

/// One noise variate from the stream `rng`.
inline double draw_noise(const NoiseSpec& spec, CounterRng& rng) {
    switch (spec.family) {
        case NoiseFamily::GaussianIid: {
            std::normal_distribution<double> d(0.0, 1.0);
            return d(rng);
        }
        case NoiseFamily::UniformBounded:
            return spec.bound * (2.0 * rng.uniform() - 1.0);
        case NoiseFamily::Rademacher:
            return (rng() >> 63) ? 1.0 : -1.0;
        case NoiseFamily::StudentTStress: {
            std::student_t_distribution<double> d(spec.df);
            return d(rng) * std::sqrt((spec.df - 2.0) / spec.df);
        }
    }
    return 0.0;
}

/// Draws x_i = theta_i + sigma * xi_i. Coordinate i uses its own stream keyed by
/// (seed, stream, i), so the result does not depend on evaluation order.
inline Observation simulate(const Signal& theta, double sigma, const NoiseSpec& noise,
                            std::uint64_t seed, std::uint64_t stream = 0) {
    detail::require_positive(sigma, "sigma");
    noise.validate();
    if (theta.size() == 0) throw ConfigError("theta must have n >= 1 entries");
    std::vector<double> x(theta.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CounterRng rng(seed, stream, i);
        x[i] = theta[i] + sigma * draw_noise(noise, rng);
    }
    return Observation(std::move(x), sigma);
}

/// theta = (0, ..., 0, A, ..., A) with the last p coordinates equal to A.
inline Signal sparse_signal(std::size_t n, std::size_t p, double amplitude) {
    if (p > n) throw DomainError("sparse_signal: p > n");
    std::vector<double> t(n, 0.0);
    std::fill(t.end() - static_cast<std::ptrdiff_t>(p), t.end(), amplitude);
    return Signal(std::move(t));
}

/// Indices (0-based) sorted by decreasing |v_i|, ties by ascending index.
inline std::vector<std::size_t> order_by_magnitude(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(v[a]) > std::abs(v[b]);
    });
    return idx;
}

/// log(exp(a) + exp(b)).
inline double log_add(double a, double b) noexcept {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

/// log(sum exp(t_i)) with max subtraction. All -inf gives -inf.
inline double log_sum_exp(std::span<const double> terms) {
    if (terms.empty()) return kNegInf;
    const double m = *std::max_element(terms.begin(), terms.end());
    if (m == kNegInf) return kNegInf;
    if (std::isinf(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

/// k * log(e n / k), with 0 * log(a / 0) = 0.
inline double complexity_term(std::size_t k, std::size_t n) {
    if (k > n) {
        throw DomainError("complexity_term: k=" + std::to_string(k) + " outside [0, " +
                          std::to_string(n) + "]");
    }
    if (k == 0) return 0.0;
    if (k == n) return static_cast<double>(n);
    const double kd = static_cast<double>(k);
    return kd * (1.0 + std::log(static_cast<double>(n) / kd));
}

inline IndexSet to_index_set(std::span<const std::size_t> order, std::size_t k) {
    IndexSet out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::size_t> to_one_based(const IndexSet& set) {
    std::vector<std::size_t> out(set);
    for (auto& i : out) ++i;
    return out;
}

}  // namespace sparse_eb
