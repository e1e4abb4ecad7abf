#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "core.hpp"
#include "parallel.hpp"

namespace sparse_eb {

// Empirical Bayes subset posterior.
//
// With prior means replaced by the data, the posterior weight of a subset I is
//   w(I) = -(kappa + 1/2) |I| log(en/|I|) + sum_{i in I} x_i^2 / (2 sigma^2),
// i.e. pi(I|X) is proportional to G(|I|) * prod_{i in I} a_i with
// a_i = exp(x_i^2 / (2 sigma^2)). Summing over subsets of equal size turns the
// 2^n-term normalizer into sum_k G(k) e_k(a), where e_k is the k-th elementary
// symmetric polynomial. Everything is kept in natural-log domain.
//
// Two devices keep log magnitudes small, which is what limits precision here:
//
// * A coordinate whose exclusion has posterior probability below exp(-cutoff)
//   is conditioned into every subset. Adding i to a subset multiplies its
//   weight by a_i G(k+1)/G(k) >= a_i (en)^-(kappa+1/2), so
//   P(i not in I) <= exp(-(log a_i - (kappa + 1/2) log(en))); with the default
//   cutoff of 800 this is below the smallest double, so nothing is lost.
// * The remaining ("free") a_i are shifted by their maximum. Posterior
//   quantities are invariant to the shift because G(k) e_k(a) picks up the same
//   factor exp(k * max) in numerator and normalizer.

enum class InclusionMethod {
    /// Forward prefix polynomials against backward adjoint sums, O(n K).
    ForwardBackward,
    /// Fresh leave-one-out recursion per coordinate, O(n^2 K).
    LeaveOneOut,
};

struct BuildOptions {
    InclusionMethod inclusion = InclusionMethod::ForwardBackward;
    std::size_t threads = 1;
    /// Log-probability level treated as zero: cardinalities with log q_k below
    /// max - cutoff are dropped, and coordinates whose exclusion is less likely
    /// than exp(-cutoff) are always included. exp(-745) already underflows.
    double support_log_cutoff = 800.0;
};

struct SubsetPosterior {
    std::size_t n = 0;
    double sigma = 1.0;
    double kappa = 0.7;

    std::vector<double> log_a;     // x_i^2 / (2 sigma^2)
    std::vector<double> log_G;     // -(kappa + 1/2) k log(en/k), k = 0..n
    std::vector<double> log_esp;   // log e_k(a), k = 0..n
    std::vector<double> log_q;     // log posterior of |I| = k
    std::vector<double> cardinality_posterior;  // q_k
    std::vector<double> inclusion;              // p_i = pi(i in I | X)
    std::vector<double> conditional_sd;         // sigma sqrt(K_n(k) / (K_n(k) + 1))
    std::size_t support_limit = 0;              // largest k with non-negligible q_k

    IndexSet forced;             // coordinates in every subset of non-negligible mass
    IndexSet free;               // the others, ascending
    double log_a_shift = 0.0;    // max of log_a over `free`

    /// Suffix polynomials of the shifted free a: log e_r(a_free[j..]) for
    /// r = 0..free_limit(), row j = 0..free.size().
    std::vector<double> log_suffix_esp;

    std::size_t free_limit() const { return support_limit - forced.size(); }

    double log_suffix(std::size_t j, std::size_t r) const {
        return log_suffix_esp[j * (free_limit() + 1) + r];
    }

    double expected_cardinality() const {
        double s = 0.0;
        for (std::size_t k = 0; k <= n; ++k) s += static_cast<double>(k) * cardinality_posterior[k];
        return s;
    }
};

struct PosteriorDraw {
    IndexSet subset;
    std::vector<double> value;  // exactly 0 off the subset
};

/// Unnormalized log posterior weight of a subset (normalizing constants dropped).
inline double subset_log_weight(const IndexSet& subset, const Observation& x, double kappa) {
    const double s2 = x.sigma() * x.sigma();
    double w = -(kappa + 0.5) * complexity_term(subset.size(), x.size());
    for (std::size_t i : subset) {
        if (i >= x.size()) throw DomainError("subset_log_weight: index out of range");
        w += x[i] * x[i] / (2.0 * s2);
    }
    return w;
}

namespace detail {

/// In-place update of a truncated log-ESP vector with one more element.
inline void esp_push(std::vector<double>& e, double log_ai, std::size_t max_degree) {
    for (std::size_t k = max_degree; k >= 1; --k) {
        e[k] = log_add(e[k], log_ai + e[k - 1]);
    }
}

/// The exact p_i is nondecreasing in |x_i|. Rounding can break that by an ulp;
/// this restores it (ties get bit-identical values).
inline void enforce_magnitude_order(std::span<const double> x, std::vector<double>& p) {
    const auto order = order_by_magnitude(x);
    for (std::size_t j = 1; j < order.size(); ++j) {
        const std::size_t prev = order[j - 1], cur = order[j];
        if (std::abs(x[cur]) == std::abs(x[prev])) {
            p[cur] = p[prev];
        } else {
            p[cur] = std::min(p[cur], p[prev]);
        }
    }
}

// Both routes compute p_j = a_j sum_{k=1..K} w_k e_{k-1}(a without j) with
// w_k = q_k / e_k(a), for shifted log weights `la` and degrees up to K.

inline std::vector<double> inclusion_forward_backward(std::span<const double> la,
                                                      std::span<const double> log_w, std::size_t K) {
    const std::size_t m = la.size();
    std::vector<double> p(m, 0.0);
    if (K == 0) return p;
    // adjoint[j][l] = sum_r w_{l+r+1} e_r(a_j..a_{m-1}), l = 0..K-1
    std::vector<double> adjoint((m + 1) * K, kNegInf);
    for (std::size_t l = 0; l < K; ++l) adjoint[m * K + l] = log_w[l + 1];
    for (std::size_t j = m; j-- > 0;) {
        const double* next = &adjoint[(j + 1) * K];
        double* cur = &adjoint[j * K];
        for (std::size_t l = 0; l < K; ++l) {
            const double shifted = l + 1 < K ? la[j] + next[l + 1] : kNegInf;
            cur[l] = log_add(next[l], shifted);
        }
    }
    std::vector<double> prefix(K, kNegInf);
    prefix[0] = 0.0;
    std::vector<double> terms(K);
    for (std::size_t i = 0; i < m; ++i) {
        const double* next = &adjoint[(i + 1) * K];
        for (std::size_t l = 0; l < K; ++l) terms[l] = prefix[l] + next[l];
        p[i] = std::exp(la[i] + log_sum_exp(terms));
        if (K > 1) esp_push(prefix, la[i], std::min(K - 1, i + 1));
    }
    return p;
}

inline std::vector<double> inclusion_leave_one_out(std::span<const double> la,
                                                   std::span<const double> log_w, std::size_t K,
                                                   std::size_t threads) {
    const std::size_t m = la.size();
    std::vector<double> p(m, 0.0);
    if (K == 0) return p;
    parallel_for(m, threads, [&](std::size_t i) {
        std::vector<double> loo(K, kNegInf);
        loo[0] = 0.0;
        std::size_t used = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            ++used;
            if (K > 1) esp_push(loo, la[j], std::min(K - 1, used));
        }
        std::vector<double> terms(K);
        for (std::size_t k = 1; k <= K; ++k) terms[k - 1] = log_w[k] + loo[k - 1];
        p[i] = std::exp(la[i] + log_sum_exp(terms));
    });
    return p;
}

}  // namespace detail

/// Exact posterior over subsets, summarized by cardinality and coordinate.
inline SubsetPosterior build(const Observation& x, double kappa, const BuildOptions& options = {}) {
    detail::require_positive(kappa, "kappa");
    detail::require_positive(options.support_log_cutoff, "support_log_cutoff");
    const std::size_t n = x.size();
    const double s2 = x.sigma() * x.sigma();
    const double cutoff = options.support_log_cutoff;

    SubsetPosterior post;
    post.n = n;
    post.sigma = x.sigma();
    post.kappa = kappa;
    post.log_a.resize(n);
    for (std::size_t i = 0; i < n; ++i) post.log_a[i] = x[i] * x[i] / (2.0 * s2);
    post.log_G.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) post.log_G[k] = -(kappa + 0.5) * complexity_term(k, n);

    // Reported log e_k(a) over all coordinates.
    {
        const double top = *std::max_element(post.log_a.begin(), post.log_a.end());
        std::vector<double> e(n + 1, kNegInf);
        e[0] = 0.0;
        for (std::size_t i = 0; i < n; ++i) detail::esp_push(e, post.log_a[i] - top, i + 1);
        post.log_esp.resize(n + 1);
        for (std::size_t k = 0; k <= n; ++k) post.log_esp[k] = e[k] + static_cast<double>(k) * top;
    }

    const double force_level = (kappa + 0.5) * std::log(std::exp(1.0) * static_cast<double>(n)) + cutoff;
    for (std::size_t i = 0; i < n; ++i) {
        (post.log_a[i] > force_level ? post.forced : post.free).push_back(i);
    }
    const std::size_t h = post.forced.size();
    const std::size_t m = post.free.size();

    std::vector<double> la(m);
    post.log_a_shift = 0.0;
    if (m > 0) {
        post.log_a_shift = post.log_a[post.free[0]];
        for (std::size_t i : post.free) post.log_a_shift = std::max(post.log_a_shift, post.log_a[i]);
    }
    for (std::size_t j = 0; j < m; ++j) la[j] = post.log_a[post.free[j]] - post.log_a_shift;

    std::vector<double> esp(m + 1, kNegInf);  // shifted log e_j(a_free)
    esp[0] = 0.0;
    for (std::size_t j = 0; j < m; ++j) detail::esp_push(esp, la[j], j + 1);

    // Unnormalized log q_k with the forced block factored out (k = h + j).
    std::vector<double> log_mass(n + 1, kNegInf);
    for (std::size_t j = 0; j <= m; ++j) {
        log_mass[h + j] = post.log_G[h + j] + esp[j] + static_cast<double>(j) * post.log_a_shift;
    }
    const double log_norm = log_sum_exp(log_mass);
    if (!std::isfinite(log_norm)) throw NumericError("posterior normalizer is not finite");

    post.log_q.resize(n + 1);
    post.cardinality_posterior.resize(n + 1);
    double total = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        post.log_q[k] = log_mass[k] - log_norm;
        post.cardinality_posterior[k] = std::exp(post.log_q[k]);
        total += post.cardinality_posterior[k];
    }
    for (auto& q : post.cardinality_posterior) q /= total;

    const double max_log_q = *std::max_element(post.log_q.begin(), post.log_q.end());
    std::size_t K = h;
    for (std::size_t k = h; k <= n; ++k) {
        if (post.log_q[k] >= max_log_q - cutoff) K = k;
    }
    post.support_limit = K;
    const std::size_t Kf = K - h;

    const std::size_t width = Kf + 1;
    post.log_suffix_esp.assign((m + 1) * width, kNegInf);
    post.log_suffix_esp[m * width] = 0.0;
    for (std::size_t j = m; j-- > 0;) {
        const double* next = &post.log_suffix_esp[(j + 1) * width];
        double* cur = &post.log_suffix_esp[j * width];
        cur[0] = 0.0;
        const std::size_t top = std::min(Kf, m - j);
        for (std::size_t r = 1; r <= top; ++r) cur[r] = log_add(next[r], la[j] + next[r - 1]);
    }

    // w_j = q_{h+j} / e_j(a_free) in shifted units.
    std::vector<double> log_w(Kf + 1, kNegInf);
    for (std::size_t j = 1; j <= Kf; ++j) {
        const double q = post.cardinality_posterior[h + j];
        log_w[j] = q > 0.0 ? std::log(q) - esp[j] : kNegInf;
    }
    const std::vector<double> p_free =
        options.inclusion == InclusionMethod::ForwardBackward
            ? detail::inclusion_forward_backward(la, log_w, Kf)
            : detail::inclusion_leave_one_out(la, log_w, Kf, options.threads);

    post.inclusion.assign(n, 1.0);
    for (std::size_t j = 0; j < m; ++j) post.inclusion[post.free[j]] = std::clamp(p_free[j], 0.0, 1.0);
    detail::enforce_magnitude_order(x.values(), post.inclusion);

    post.conditional_sd.resize(n + 1);
    const double en = std::exp(1.0) * static_cast<double>(n);
    for (std::size_t k = 0; k <= n; ++k) {
        post.conditional_sd[k] = x.sigma() * std::sqrt(1.0 - static_cast<double>(k) / en);
    }
    return post;
}

/// Posterior mean (p_i x_i).
inline Signal shrinkage_mean(const SubsetPosterior& post, const Observation& x) {
    if (post.n != x.size()) throw DomainError("shrinkage_mean: dimension mismatch");
    std::vector<double> m(x.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = post.inclusion[i] * x[i];
    return Signal(std::move(m));
}

/// Two-stage draw: |I| ~ q, then I given |I| = k with probability proportional
/// to prod_{i in I} a_i (sequential conditional Bernoulli on suffix polynomials
/// of the free coordinates; forced ones are always in), then
/// theta_i ~ N(x_i, sigma^2 K/(K+1)) on I and 0 elsewhere. Draw d uses the
/// stream (seed, d). `visit` receives (subset, value) for each draw.
template <typename Visitor>
void for_each_draw(const SubsetPosterior& post, const Observation& x, std::uint64_t seed,
                   std::size_t first, std::size_t count, Visitor&& visit) {
    if (post.n != x.size()) throw DomainError("sample: dimension mismatch");
    const std::size_t n = post.n;
    const std::size_t h = post.forced.size();
    const std::size_t m = post.free.size();
    std::vector<double> cdf(post.support_limit + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k <= post.support_limit; ++k) {
        acc += post.cardinality_posterior[k];
        cdf[k] = acc;
    }
    std::vector<double> la(m);
    for (std::size_t j = 0; j < m; ++j) la[j] = post.log_a[post.free[j]] - post.log_a_shift;

    IndexSet subset;
    std::vector<char> in(n);
    std::vector<double> value(n, 0.0);
    for (std::size_t d = first; d < first + count; ++d) {
        CounterRng rng(seed, d);
        const double u = rng.uniform() * acc;
        std::size_t k = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        k = std::clamp(k, h, post.support_limit);

        std::fill(in.begin(), in.end(), 0);
        for (std::size_t i : post.forced) in[i] = 1;
        std::size_t remaining = k - h;
        for (std::size_t j = 0; j < m && remaining > 0; ++j) {
            bool take;
            if (remaining == m - j) {
                take = true;
            } else {
                const double log_prob = la[j] + post.log_suffix(j + 1, remaining - 1) -
                                        post.log_suffix(j, remaining);
                take = rng.uniform() < std::exp(log_prob);
            }
            if (take) {
                in[post.free[j]] = 1;
                --remaining;
            }
        }

        subset.clear();
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (in[i]) {
                subset.push_back(i);
                value[i] = x[i] + post.conditional_sd[k] * gauss(rng);
            } else {
                value[i] = 0.0;
            }
        }
        visit(static_cast<const IndexSet&>(subset), static_cast<const std::vector<double>&>(value));
    }
}

inline std::vector<PosteriorDraw> sample(const SubsetPosterior& post, const Observation& x,
                                         std::uint64_t seed, std::size_t count) {
    if (count < 1) throw ConfigError("sample: count must be >= 1");
    std::vector<PosteriorDraw> draws;
    draws.reserve(count);
    for_each_draw(post, x, seed, 0, count, [&](const IndexSet& s, const std::vector<double>& v) {
        draws.push_back({s, v});
    });
    return draws;
}

/// Coordinatewise posterior under the product prior with slab variance K sigma^2
/// and inclusion weight n^-kappa.
struct ProductPosterior {
    std::vector<double> inclusion;
    std::vector<double> mean;
    std::vector<double> median;
    double log_h = 0.0;  // kappa log n + log(K + 1) / 2
};

namespace detail {

inline double normal_quantile(double u) {
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

/// Median of p N(mu, s^2) + (1 - p) delta_0.
inline double spike_slab_median(double p, double mu, double s) {
    if (p <= 0.0) return 0.0;
    const double below_zero = p * 0.5 * std::erfc(mu / (s * std::sqrt(2.0)));  // F(0-)
    if (below_zero >= 0.5) return mu + s * normal_quantile(0.5 / p);
    if (below_zero + (1.0 - p) >= 0.5) return 0.0;
    return mu + s * normal_quantile(1.0 - 0.5 / p);
}

}  // namespace detail

inline ProductPosterior product_posterior(const Observation& x, double kappa, double K) {
    detail::require_positive(kappa, "kappa");
    detail::require_positive(K, "K");
    const std::size_t n = x.size();
    const double s2 = x.sigma() * x.sigma();
    const double slab_sd = x.sigma() * std::sqrt(K / (K + 1.0));
    ProductPosterior out;
    out.log_h = kappa * std::log(static_cast<double>(n)) + 0.5 * std::log1p(K);
    out.inclusion.resize(n);
    out.mean.resize(n);
    out.median.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // 1 / (1 + h exp(-x^2 / 2 sigma^2)) as a logistic of the log-odds.
        const double log_odds = x[i] * x[i] / (2.0 * s2) - out.log_h;
        const double p = log_odds >= 0.0 ? 1.0 / (1.0 + std::exp(-log_odds))
                                         : std::exp(log_odds) / (1.0 + std::exp(log_odds));
        out.inclusion[i] = p;
        out.mean[i] = p * x[i];
        out.median[i] = detail::spike_slab_median(p, x[i], slab_sd);
    }
    return out;
}

}  // namespace sparse_eb
