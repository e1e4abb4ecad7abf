#include "sparse_eb/posterior.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "enumeration.hpp"
#include "sparse_eb/selector.hpp"

namespace sparse_eb {
namespace {

std::vector<double> mixed_data(CounterRng& rng, std::size_t n, double sigma) {
    std::vector<double> x(n);
    std::normal_distribution<double> gauss;
    const double amp = 1.0 + 5.0 * rng.uniform();
    const double frac = rng.uniform();
    for (auto& v : x) v = sigma * ((rng.uniform() < frac ? amp : 0.0) + gauss(rng));
    return x;
}

TEST(SubsetLogWeight, Examples) {
    const Observation x({1.0, -2.0, 3.0}, 1.0);
    EXPECT_EQ(subset_log_weight({}, x, 0.7), 0.0);
    EXPECT_NEAR(subset_log_weight({0, 1, 2}, x, 0.7), -(0.7 + 0.5) * 3.0 + 14.0 / 2.0, 1e-12);
    const double crossing = std::sqrt(2.0 * (0.7 + 0.5));
    EXPECT_NEAR(subset_log_weight({0}, Observation({crossing}, 1.0), 0.7), 0.0, 1e-14);
    EXPECT_THROW(subset_log_weight({3}, x, 0.7), DomainError);
}

TEST(Build, SingleCoordinateClosedForm) {
    for (double kappa : {0.3, 0.7, 4.0}) {
        for (double v : {0.0, 0.5, 1.0, 2.0, 3.5, 10.0}) {
            const SubsetPosterior post = build(Observation({v}, 1.0), kappa);
            const double want = 1.0 / (1.0 + std::exp((kappa + 0.5) - v * v / 2.0));
            EXPECT_NEAR(post.inclusion[0], want, 1e-14);
            EXPECT_NEAR(post.cardinality_posterior[1], want, 1e-14);
        }
        const SubsetPosterior half = build(Observation({std::sqrt(2.0 * (kappa + 0.5))}, 1.0), kappa);
        EXPECT_NEAR(half.inclusion[0], 0.5, 1e-14);
    }
}

TEST(Build, ZeroDataIsExchangeable) {
    const std::size_t n = 40;
    const SubsetPosterior post = build(Observation(std::vector<double>(n, 0.0), 1.0), 0.7);
    for (std::size_t i = 1; i < n; ++i) EXPECT_EQ(post.inclusion[i], post.inclusion[0]);
    // q_k proportional to C(n,k) exp{-(kappa + 1/2) k log(en/k)}.
    std::vector<double> logw(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        logw[k] = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  1.2 * complexity_term(k, n);
    }
    const double z = log_sum_exp(logw);
    for (std::size_t k = 0; k <= n; ++k) {
        EXPECT_NEAR(post.cardinality_posterior[k], std::exp(logw[k] - z), 1e-13);
    }
    EXPECT_EQ(std::max_element(post.cardinality_posterior.begin(), post.cardinality_posterior.end()) -
                  post.cardinality_posterior.begin(),
              0);
    EXPECT_EQ(post.log_esp[0], 0.0);
}

TEST(Build, MatchesEnumeration) {
    CounterRng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 12);
        const double sigma = std::vector<double>{0.5, 1.0, 2.0}[rng() % 3];
        const double kappa = rng() % 2 ? 0.7 : 4.0;
        const auto data = mixed_data(rng, n, sigma);
        const Observation x(data, sigma);
        const auto brute = testing::brute_force_posterior(data, sigma, kappa);
        for (auto method : {InclusionMethod::ForwardBackward, InclusionMethod::LeaveOneOut}) {
            const SubsetPosterior post = build(x, kappa, {method, 1});
            for (std::size_t k = 0; k <= n; ++k) {
                if (brute.q[k] > 1e-250) {
                    EXPECT_LE(testing::relative_error(post.cardinality_posterior[k], brute.q[k]), 1e-9);
                }
            }
            const Signal mean = shrinkage_mean(post, x);
            for (std::size_t i = 0; i < n; ++i) {
                if (brute.p[i] > 1e-250) {
                    EXPECT_LE(testing::relative_error(post.inclusion[i], brute.p[i]), 1e-9);
                }
                EXPECT_NEAR(mean[i], brute.mean[i], 1e-9 * (1.0 + std::abs(brute.mean[i])));
            }
        }
        // The subset of largest weight is the penalized selector's choice.
        EXPECT_EQ(testing::mask_of(select(x, kappa).selected), brute.map_mask);
    }
}

TEST(Build, InclusionRoutesAgreeAtModerateSize) {
    CounterRng rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        const Observation x(mixed_data(rng, 150, 1.0), 1.0);
        const SubsetPosterior a = build(x, 0.7, {InclusionMethod::ForwardBackward, 1});
        const SubsetPosterior b = build(x, 0.7, {InclusionMethod::LeaveOneOut, 4});
        for (std::size_t i = 0; i < 150; ++i) {
            EXPECT_NEAR(a.inclusion[i], b.inclusion[i], 1e-10 * (1.0 + a.inclusion[i]));
        }
    }
}

void expect_identities(const Observation& x, const SubsetPosterior& post) {
    const double total = std::accumulate(post.cardinality_posterior.begin(),
                                         post.cardinality_posterior.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-12);
    const double sum_p = std::accumulate(post.inclusion.begin(), post.inclusion.end(), 0.0);
    EXPECT_NEAR(sum_p, post.expected_cardinality(), 1e-9 * std::max(1.0, sum_p));
    for (double p : post.inclusion) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
    const auto order = order_by_magnitude(x.values());
    for (std::size_t j = 1; j < order.size(); ++j) {
        EXPECT_GE(post.inclusion[order[j - 1]], post.inclusion[order[j]]);
    }
}

TEST(Build, NormalizationAndMonotonicity) {
    CounterRng rng(33);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 300);
        const Observation x(mixed_data(rng, n, 1.0), 1.0);
        expect_identities(x, build(x, 0.7));
    }
}

TEST(Build, ExtremeInputsStayFinite) {
    CounterRng rng(34);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 200;
        std::vector<double> v(n);
        for (auto& e : v) {
            const double u = rng.uniform();
            e = u < 0.2 ? 1000.0 : u < 0.3 ? -1000.0 : u < 0.6 ? 10.0 * rng.uniform() : 0.0;
        }
        const Observation x(v, 1.0);
        const SubsetPosterior post = build(x, 0.7);
        for (double q : post.cardinality_posterior) EXPECT_TRUE(std::isfinite(q));
        expect_identities(x, post);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(v[i]) == 1000.0) {
                EXPECT_EQ(post.inclusion[i], 1.0);
            }
        }
    }
    const SubsetPosterior all_large = build(Observation(std::vector<double>(50, 1000.0), 1.0), 0.7);
    EXPECT_NEAR(all_large.cardinality_posterior[50], 1.0, 1e-12);
}

TEST(Build, ScaleInvariance) {
    CounterRng rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        const Observation x(mixed_data(rng, 80, 1.0), 1.0);
        const SubsetPosterior base = build(x, 0.7);
        for (double c : {0.25, 8.0}) {
            const SubsetPosterior s = build(x.scaled(c), 0.7);
            for (std::size_t k = 0; k <= 80; ++k) {
                EXPECT_EQ(s.cardinality_posterior[k], base.cardinality_posterior[k]);
            }
            for (std::size_t i = 0; i < 80; ++i) EXPECT_EQ(s.inclusion[i], base.inclusion[i]);
        }
    }
}

TEST(ShrinkageMean, Limits) {
    const Observation zero(std::vector<double>(10, 0.0), 1.0);
    const Signal m0 = shrinkage_mean(build(zero, 0.7), zero);
    for (double v : m0.values()) EXPECT_EQ(v, 0.0);

    std::vector<double> v(10, 0.3);
    double previous = 0.0;
    for (double big : {5.0, 10.0, 40.0}) {
        v[0] = big;
        const Observation x(v, 1.0);
        const double ratio = shrinkage_mean(build(x, 0.7), x)[0] / big;
        EXPECT_GE(ratio, previous);
        previous = ratio;
    }
    EXPECT_NEAR(previous, 1.0, 1e-12);
}

TEST(Sample, DrawsAreDiracOffSubsetAndDeterministic) {
    CounterRng rng(36);
    const Observation x(mixed_data(rng, 30, 1.0), 1.0);
    const SubsetPosterior post = build(x, 0.7);
    const auto a = sample(post, x, 5, 200);
    const auto b = sample(post, x, 5, 200);
    ASSERT_EQ(a.size(), 200u);
    for (std::size_t d = 0; d < a.size(); ++d) {
        EXPECT_EQ(a[d].subset, b[d].subset);
        EXPECT_EQ(a[d].value, b[d].value);
        std::vector<char> in(30, 0);
        for (std::size_t i : a[d].subset) in[i] = 1;
        for (std::size_t i = 0; i < 30; ++i) {
            if (!in[i]) {
                EXPECT_EQ(a[d].value[i], 0.0);
            }
        }
    }
    EXPECT_THROW(sample(post, x, 5, 0), ConfigError);
}

TEST(Sample, ZeroDataMostlyEmpty) {
    const Observation x(std::vector<double>(500, 0.0), 1.0);
    const SubsetPosterior post = build(x, 0.7);
    // C(n,k) exp(-1.2 k log(en/k)) summed in 40-digit arithmetic.
    const double q0 = post.cardinality_posterior[0];
    EXPECT_NEAR(q0, 0.8966093474749810, 1e-13);
    const std::size_t draws = 20000;
    std::size_t empty = 0;
    for_each_draw(post, x, 9, 0, draws, [&](const IndexSet& s, const std::vector<double>& v) {
        empty += s.empty();
        if (s.empty()) {
            for (double e : v) EXPECT_EQ(e, 0.0);
        }
    });
    EXPECT_NEAR(static_cast<double>(empty) / draws, q0, 4.0 * std::sqrt(q0 * (1 - q0) / draws));
}

TEST(Sample, InclusionFrequenciesMatch) {
    CounterRng rng(37);
    const std::size_t n = 20;
    const Observation x(mixed_data(rng, n, 1.0), 1.0);
    const SubsetPosterior post = build(x, 0.7);
    const std::size_t draws = 20000;
    std::vector<std::size_t> hits(n, 0);
    for_each_draw(post, x, 10, 0, draws, [&](const IndexSet& s, const std::vector<double>&) {
        for (std::size_t i : s) ++hits[i];
    });
    std::size_t within = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = post.inclusion[i];
        const double se = std::sqrt(p * (1 - p) / draws);
        within += std::abs(static_cast<double>(hits[i]) / draws - p) <= 4.0 * se + 1e-12;
    }
    EXPECT_GE(within, n - 1);
}

TEST(ProductPosterior, ClosedFormValues) {
    std::vector<double> v(100, 0.0);
    v[0] = 4.0;
    const ProductPosterior pp = product_posterior(Observation(v, 1.0), 1.0, 3.0);
    EXPECT_NEAR(pp.inclusion[0], 0.9371258593119619, 1e-14);
    EXPECT_NEAR(pp.inclusion[1], 1.0 / 201.0, 1e-15);
    EXPECT_NEAR(pp.log_h, std::log(200.0), 1e-14);
    EXPECT_NEAR(pp.mean[0], 4.0 * pp.inclusion[0], 1e-14);
    EXPECT_EQ(pp.median[1], 0.0);
    EXPECT_THROW(product_posterior(Observation(v, 1.0), 1.0, 0.0), ConfigError);
}

// Mixture CDF evaluated directly, for checking the median.
double mixture_cdf(double t, double p, double mu, double s) {
    const double gauss = 0.5 * std::erfc(-(t - mu) / (s * std::sqrt(2.0)));
    return p * gauss + (t >= 0.0 ? 1.0 - p : 0.0);
}

TEST(ProductPosterior, MedianSolvesMixtureCdf) {
    const double s = std::sqrt(3.0 / 4.0);
    for (double p : {0.05, 0.4, 0.6, 0.9, 0.999}) {
        for (double mu : {-6.0, -1.0, 0.2, 3.0, 8.0}) {
            const double m = detail::spike_slab_median(p, mu, s);
            if (m == 0.0) {
                EXPECT_LE(mixture_cdf(-1e-12, p, mu, s), 0.5 + 1e-10);
                EXPECT_GE(mixture_cdf(0.0, p, mu, s), 0.5 - 1e-10);
            } else {
                EXPECT_NEAR(mixture_cdf(m, p, mu, s), 0.5, 1e-10);
            }
        }
    }
    // Atom carrying half the mass or more pins the median to zero.
    EXPECT_EQ(detail::spike_slab_median(0.3, 4.0, 1.0), 0.0);
}

}  // namespace
}  // namespace sparse_eb
