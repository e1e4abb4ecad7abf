#include "sparse_eb/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

namespace sparse_eb::io {
namespace {

TEST(FormatDouble, RoundTrips) {
    CounterRng rng(51);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < 5000; ++i) {
        const double v = gauss(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(5.0), "5");
}

TEST(ParseCsv, HeaderAndBlankLines) {
    EXPECT_EQ(parse_csv_vector("x\n1\n-2.5\n\n3e2\n"), (std::vector<double>{1.0, -2.5, 300.0}));
    EXPECT_EQ(parse_csv_vector("1\r\n2\r\n"), (std::vector<double>{1.0, 2.0}));
}

TEST(ParseCsv, Errors) {
    EXPECT_THROW(parse_csv_vector("1\nabc\n"), DataError);
    EXPECT_THROW(parse_csv_vector("1\n2,3\n"), DataError);
    EXPECT_THROW(parse_csv_vector("header\n"), DataError);
    EXPECT_THROW(parse_csv_vector("1\ninf\n"), DataError);
}

TEST(ParseJson, Arrays) {
    EXPECT_EQ(parse_json_vector("[1, 2.5, -3]"), (std::vector<double>{1.0, 2.5, -3.0}));
    EXPECT_THROW(parse_json_vector("[1, \"a\"]"), DataError);
    EXPECT_THROW(parse_json_vector("{\"a\": 1}"), DataError);
    EXPECT_THROW(parse_json_vector("[1,"), DataError);
    EXPECT_THROW(parse_json_vector("[]"), DataError);
}

TEST(CsvRoundTrip, SimulatedDataSurvives) {
    const Observation x = simulate(sparse_signal(300, 20, 4.0), 1.3, {}, 8);
    const auto back = parse_csv_vector(to_csv(x.values()));
    ASSERT_EQ(back.size(), x.size());
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], x[i]);
}

TEST(ExperimentConfigJson, RoundTrip) {
    ExperimentConfig c = ExperimentConfig::reference_design(5);
    c.noise = {NoiseFamily::StudentTStress};
    c.calibrate_target = 0.95;
    const ExperimentConfig back = experiment_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
    EXPECT_THROW(experiment_config_from_json(json{{"n", 10}}), DataError);
    EXPECT_THROW(experiment_config_from_json(json{{"replications", 0}, {"cells", json::array()}}),
                 ConfigError);
}

TEST(NoiseJson, Families) {
    EXPECT_EQ(noise_from_json(json{{"family", "gaussian-iid"}}).family, NoiseFamily::GaussianIid);
    EXPECT_THROW(noise_from_json(json{{"family", "cauchy"}}), ConfigError);
    EXPECT_EQ(prior_from_json(json{{"kappa", 2.0}}).kappa, 2.0);
}

TEST(SelectionJson, OneBasedIndices) {
    const Observation x({0.0, 10.0, 0.0}, 1.0);
    const json j = to_json(select(x, 0.7));
    EXPECT_EQ(j.at("selected"), json::array({2}));
    EXPECT_EQ(j.at("k_hat"), 1);
}

}  // namespace
}  // namespace sparse_eb::io
