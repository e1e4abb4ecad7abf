#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "core.hpp"
#include "experiments.hpp"
#include "oracle.hpp"
#include "posterior.hpp"
#include "selector.hpp"
#include "uq.hpp"

namespace sparse_eb::io {

using json = nlohmann::json;

/// Shortest text that round-trips the double (at most 17 significant digits).
inline std::string format_double(double v) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    return end == text.c_str() + text.size();
}

/// One value per line; an optional non-numeric header on the first line.
inline std::vector<double> parse_csv_vector(const std::string& text) {
    std::vector<double> values;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool seen_content = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string field = trim(line);
        if (field.empty()) continue;
        double v = 0.0;
        if (!parse_double(field, v)) {
            if (!seen_content) {
                seen_content = true;
                continue;
            }
            throw DataError("malformed CSV value '" + field + "' on line " + std::to_string(line_no));
        }
        seen_content = true;
        if (!std::isfinite(v)) {
            throw DataError("non-finite CSV value on line " + std::to_string(line_no));
        }
        values.push_back(v);
    }
    if (values.empty()) throw DataError("no values found in CSV input");
    return values;
}

inline std::vector<double> parse_json_vector(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_array()) throw DataError("JSON input must be an array of numbers");
    std::vector<double> values;
    for (const auto& v : j) {
        if (!v.is_number()) throw DataError("JSON array contains a non-number");
        values.push_back(v.get<double>());
    }
    if (values.empty()) throw DataError("JSON array is empty");
    return values;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Reads a vector from a CSV or JSON-array file (detected from the content).
inline std::vector<double> read_vector(const std::string& path) {
    const std::string text = read_file(path);
    const std::string t = trim(text);
    if (!t.empty() && t.front() == '[') return parse_json_vector(t);
    return parse_csv_vector(text);
}

inline std::string to_csv(std::span<const double> values) {
    std::string out;
    for (double v : values) {
        out += format_double(v);
        out += '\n';
    }
    return out;
}

inline json to_json(const IndexSet& set) { return to_one_based(set); }

inline NoiseSpec noise_from_json(const json& j) {
    NoiseSpec spec;
    spec.family = parse_noise_family(j.at("family").get<std::string>());
    if (j.contains("bound")) spec.bound = j.at("bound").get<double>();
    if (j.contains("df")) spec.df = j.at("df").get<double>();
    spec.validate();
    return spec;
}

inline json to_json(const NoiseSpec& spec) {
    json j{{"family", std::string(to_string(spec.family))}};
    if (spec.family == NoiseFamily::UniformBounded) j["bound"] = spec.bound;
    if (spec.family == NoiseFamily::StudentTStress) j["df"] = spec.df;
    return j;
}

inline PriorConfig prior_from_json(const json& j) {
    PriorConfig p;
    if (j.contains("kappa")) p.kappa = j.at("kappa").get<double>();
    if (j.contains("product_variance_factor")) {
        p.product_variance_factor = j.at("product_variance_factor").get<double>();
    }
    p.validate();
    return p;
}

inline json to_json(const OracleReport& r) {
    return {{"tau", r.tau},
            {"sigma", r.sigma},
            {"n", r.n},
            {"oracle_set", to_json(r.oracle_set)},
            {"oracle_cardinality", r.oracle_cardinality},
            {"rate_sq", r.rate_sq},
            {"bias_part", r.bias_part},
            {"variance_part", r.variance_part},
            {"ebr_ratio", r.ebr_ratio}};
}

inline json to_json(const SubsetSelection& s) {
    return {{"selected", to_json(s.selected)},
            {"k_hat", s.cardinality},
            {"threshold", s.threshold},
            {"radius_sq", s.radius_sq},
            {"criterion_curve", s.criterion_values}};
}

/// q entries below `q_floor` are dropped from the tail of the array.
inline json to_json(const SubsetPosterior& post, const Observation& x, double q_floor = 0.0) {
    std::vector<double> q(post.cardinality_posterior);
    while (q.size() > 1 && q.back() < q_floor) q.pop_back();
    const Signal mean = shrinkage_mean(post, x);
    return {{"q", q},
            {"p", post.inclusion},
            {"mean", std::vector<double>(mean.values().begin(), mean.values().end())},
            {"expected_cardinality", post.expected_cardinality()}};
}

inline json to_json(const ProductPosterior& p) {
    return {{"p", p.inclusion}, {"mean", p.mean}, {"median", p.median}, {"log_h", p.log_h}};
}

inline json to_json(const ConfidenceBall& b) {
    return {{"center", std::vector<double>(b.center.values().begin(), b.center.values().end())},
            {"radius", b.radius},
            {"inflation_factor", b.inflation_factor},
            {"base_radius_sq", b.base_radius_sq},
            {"k_hat", b.selected_cardinality}};
}

inline json to_json(const TheoryConstants& t, std::span<const double> rho_grid) {
    json tau_bar = json::array();
    for (double rho : rho_grid) tau_bar.push_back({{"rho", rho}, {"tau_bar", t.tau_bar(rho)}});
    const auto& nc = t.normal_case;
    return {{"beta", t.beta},
            {"B", t.B},
            {"kappa", t.kappa},
            {"kappa_bar", t.kappa_bar},
            {"kappa_exceeds_kappa_bar", t.kappa_exceeds_kappa_bar},
            {"tau_bar", tau_bar},
            {"normal_case",
             {{"h0", nc.h0},
              {"c1", nc.c1},
              {"c2", nc.c2},
              {"c3", nc.c3},
              {"kappa_bar_normal", nc.kappa_bar_normal},
              {"c1_exceeds_two", nc.c1_exceeds_two},
              {"kappa_exceeds_bound", nc.kappa_exceeds_bound}}}};
}

inline json to_json(const PosteriorDraw& d) {
    return {{"subset", to_json(d.subset)}, {"value", d.value}};
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
        if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
        if (j.contains("kappa")) c.kappa = j.at("kappa").get<double>();
        if (j.contains("replications")) c.replications = j.at("replications").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("noise")) c.noise = noise_from_json(j.at("noise"));
        if (j.contains("center")) c.center = parse_center_method(j.at("center").get<std::string>());
        if (j.contains("radius_scaling")) {
            c.radius_scaling = parse_radius_scaling(j.at("radius_scaling").get<std::string>());
        }
        if (j.contains("calibrate_target")) c.calibrate_target = j.at("calibrate_target").get<double>();
        for (const auto& cell : j.at("cells")) {
            c.cells.push_back({cell.at("p").get<std::size_t>(), cell.at("A").get<double>(),
                               cell.value("M", 1.0)});
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

inline json to_json(const ExperimentConfig& c) {
    json cells = json::array();
    for (const auto& cell : c.cells) cells.push_back({{"p", cell.p}, {"A", cell.A}, {"M", cell.M}});
    json j{{"n", c.n},
           {"sigma", c.sigma},
           {"kappa", c.kappa},
           {"replications", c.replications},
           {"seed", c.seed},
           {"noise", to_json(c.noise)},
           {"center", std::string(to_string(c.center))},
           {"radius_scaling", std::string(to_string(c.radius_scaling))},
           {"cells", cells}};
    if (c.calibrate_target) j["calibrate_target"] = *c.calibrate_target;
    return j;
}

inline json to_json(const ExperimentRow& r) {
    return {{"p", r.p},
            {"A", r.A},
            {"M", r.M},
            {"ratio", r.ratio},
            {"coverage", r.coverage},
            {"se_coverage", r.se_coverage},
            {"mean_k_hat", r.mean_k_hat},
            {"modal_k_hat", r.modal_k_hat},
            {"mean_radius_sq", r.mean_radius_sq},
            {"oracle_rate_sq", r.oracle_rate_sq}};
}

inline std::string table1_csv(std::span<const ExperimentRow> rows) {
    std::string out = "p,A,M,ratio,coverage,se_coverage,mean_k_hat,modal_k_hat,mean_radius_sq,oracle_rate_sq\n";
    for (const auto& r : rows) {
        out += std::to_string(r.p) + ',' + format_double(r.A) + ',' + format_double(r.M) + ',' +
               format_double(r.ratio) + ',' + format_double(r.coverage) + ',' +
               format_double(r.se_coverage) + ',' + format_double(r.mean_k_hat) + ',' +
               std::to_string(r.modal_k_hat) + ',' + format_double(r.mean_radius_sq) + ',' +
               format_double(r.oracle_rate_sq) + '\n';
    }
    return out;
}

}  // namespace sparse_eb::io
