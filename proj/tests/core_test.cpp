#include "sparse_eb/core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

namespace sparse_eb {
namespace {

TEST(Simulate, RademacherNoiseHasUnitMagnitude) {
    const Signal theta(std::vector<double>(5, 0.0));
    for (std::uint64_t seed : {0u, 7u, 12345u}) {
        const Observation x = simulate(theta, 1.0, {NoiseFamily::Rademacher}, seed);
        for (double v : x.values()) EXPECT_EQ(std::abs(v), 1.0);
    }
}

TEST(Simulate, RejectsZeroSigma) {
    const Signal theta(std::vector<double>{3.0, 0.0});
    EXPECT_THROW(simulate(theta, 0.0, {}, 1), ConfigError);
    EXPECT_THROW(simulate(theta, -1.0, {}, 1), ConfigError);
}

TEST(Simulate, RejectsInvalidNoiseParameters) {
    const Signal theta(std::vector<double>{0.0});
    NoiseSpec uniform{NoiseFamily::UniformBounded};
    uniform.bound = 0.0;
    EXPECT_THROW(simulate(theta, 1.0, uniform, 1), ConfigError);
    uniform.bound = 2.0;  // variance 4/3 > 1
    EXPECT_THROW(simulate(theta, 1.0, uniform, 1), ConfigError);
    NoiseSpec t{NoiseFamily::StudentTStress};
    t.df = 2.0;
    EXPECT_THROW(simulate(theta, 1.0, t, 1), ConfigError);
}

TEST(Simulate, SignalBlockMeanWithinClt) {
    const Signal theta = sparse_signal(500, 25, 5.0);
    const Observation x = simulate(theta, 1.0, {}, 2024);
    double s = 0.0;
    for (std::size_t i = 475; i < 500; ++i) s += x[i];
    EXPECT_NEAR(s / 25.0, 5.0, 4.0 / std::sqrt(25.0));
}

TEST(Simulate, ReproducibleBitForBit) {
    const Signal theta = sparse_signal(200, 10, 3.0);
    for (auto family : {NoiseFamily::GaussianIid, NoiseFamily::UniformBounded,
                        NoiseFamily::Rademacher, NoiseFamily::StudentTStress}) {
        const NoiseSpec spec{family};
        const Observation a = simulate(theta, 1.5, spec, 99, 3);
        const Observation b = simulate(theta, 1.5, spec, 99, 3);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
        const Observation c = simulate(theta, 1.5, spec, 99, 4);
        std::size_t same = 0;
        for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == c[i];
        if (family != NoiseFamily::Rademacher) {
            EXPECT_LT(same, 5u);
        }
    }
}

TEST(Simulate, NoiseFamiliesHaveUnitVariance) {
    const std::size_t n = 200000;
    const Signal theta(std::vector<double>(n, 0.0));
    for (auto family : {NoiseFamily::GaussianIid, NoiseFamily::UniformBounded,
                        NoiseFamily::Rademacher, NoiseFamily::StudentTStress}) {
        const Observation x = simulate(theta, 1.0, {family}, 5);
        double m = 0.0, v = 0.0;
        for (double e : x.values()) m += e;
        m /= static_cast<double>(n);
        for (double e : x.values()) v += (e - m) * (e - m);
        v /= static_cast<double>(n - 1);
        EXPECT_NEAR(m, 0.0, 0.01) << to_string(family);
        // Student-t with df = 5 has a heavy fourth moment; allow a wider band.
        EXPECT_NEAR(v, 1.0, family == NoiseFamily::StudentTStress ? 0.05 : 0.02) << to_string(family);
    }
}

TEST(Simulate, OnlyStudentTViolatesMomentCondition) {
    EXPECT_TRUE(NoiseSpec{NoiseFamily::GaussianIid}.satisfies_exponential_moment_condition());
    EXPECT_TRUE(NoiseSpec{NoiseFamily::UniformBounded}.satisfies_exponential_moment_condition());
    EXPECT_TRUE(NoiseSpec{NoiseFamily::Rademacher}.satisfies_exponential_moment_condition());
    EXPECT_FALSE(NoiseSpec{NoiseFamily::StudentTStress}.satisfies_exponential_moment_condition());
}

TEST(OrderByMagnitude, Examples) {
    EXPECT_EQ(order_by_magnitude(std::vector<double>{1, -3, 2}), (std::vector<std::size_t>{1, 2, 0}));
    EXPECT_EQ(order_by_magnitude(std::vector<double>{2, 2, 5}), (std::vector<std::size_t>{2, 0, 1}));
    EXPECT_EQ(order_by_magnitude(std::vector<double>(4, 0.0)),
              (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(OrderByMagnitude, IsPermutationWithNonincreasingMagnitudes) {
    CounterRng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + trial);
        // Integer-valued entries so that ties occur.
        for (auto& e : v) e = static_cast<double>(static_cast<int>(rng() % 7) - 3);
        const auto order = order_by_magnitude(v);
        std::vector<std::size_t> sorted(order);
        std::sort(sorted.begin(), sorted.end());
        std::vector<std::size_t> expected(v.size());
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        EXPECT_EQ(sorted, expected);
        for (std::size_t j = 1; j < order.size(); ++j) {
            EXPECT_GE(std::abs(v[order[j - 1]]), std::abs(v[order[j]]));
            if (std::abs(v[order[j - 1]]) == std::abs(v[order[j]])) {
                EXPECT_LT(order[j - 1], order[j]);
            }
        }
    }
}

TEST(LogSumExp, Examples) {
    EXPECT_DOUBLE_EQ(log_sum_exp(std::vector<double>{0.0, 0.0}), std::log(2.0));
    EXPECT_EQ(log_sum_exp(std::vector<double>{kNegInf, 3.5}), 3.5);
    EXPECT_DOUBLE_EQ(log_sum_exp(std::vector<double>{1000.0, 1000.0}), 1000.0 + std::log(2.0));
    EXPECT_EQ(log_sum_exp(std::vector<double>{kNegInf, kNegInf}), kNegInf);
    EXPECT_DOUBLE_EQ(log_add(1000.0, 1000.0), 1000.0 + std::log(2.0));
    EXPECT_EQ(log_add(kNegInf, -2.0), -2.0);
}

TEST(ComplexityTerm, Examples) {
    EXPECT_EQ(complexity_term(0, 500), 0.0);
    EXPECT_EQ(complexity_term(500, 500), 500.0);
    EXPECT_EQ(complexity_term(7, 7), 7.0);
    EXPECT_NEAR(complexity_term(25, 500), 99.89330683884977, 1e-12);
    EXPECT_THROW(complexity_term(6, 5), DomainError);
}

TEST(ComplexityTerm, StrictlyIncreasing) {
    for (std::size_t n : {1u, 2u, 10u, 137u, 500u}) {
        for (std::size_t k = 0; k < n; ++k) {
            EXPECT_LT(complexity_term(k, n), complexity_term(k + 1, n)) << "n=" << n << " k=" << k;
        }
    }
}

TEST(Types, ObservationValidation) {
    EXPECT_THROW(Observation({}, 1.0), ConfigError);
    EXPECT_THROW(Observation({1.0, NAN}, 1.0), ConfigError);
    EXPECT_THROW(Signal({INFINITY}), ConfigError);
    PriorConfig prior{0.7, std::nullopt};
    EXPECT_NO_THROW(prior.validate());
    EXPECT_FALSE(prior.meets_normal_theory_bound());
    prior.kappa = 4.0;
    EXPECT_TRUE(prior.meets_normal_theory_bound());
    prior.kappa = 0.0;
    EXPECT_THROW(prior.validate(), ConfigError);
}

TEST(CounterRng, StreamsAreIndependentOfConsumptionOrder) {
    CounterRng a(42, 3, 9);
    std::vector<std::uint64_t> first;
    for (int i = 0; i < 10; ++i) first.push_back(a());
    CounterRng b(42, 3, 9);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(b.at(static_cast<std::uint64_t>(i)), first[static_cast<std::size_t>(i)]);
    EXPECT_NE(CounterRng(42, 3, 9)(), CounterRng(42, 3, 10)());
    EXPECT_NE(CounterRng(42, 3, 9)(), CounterRng(42, 4, 9)());
    EXPECT_NE(CounterRng(42, 3, 9)(), CounterRng(43, 3, 9)());
}

}  // namespace
}  // namespace sparse_eb
