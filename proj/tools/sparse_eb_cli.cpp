// sparse-eb: command-line front end for the sparse_eb library.
//
// Exit codes: 0 success, 1 usage, 2 data/config/domain error, 3 numeric error.

#include <cmath>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sparse_eb/io.hpp"
#include "sparse_eb/sparse_eb.hpp"

namespace {

using namespace sparse_eb;
using io::json;

constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Everything a subcommand resolved, kept for the run manifest.
struct RunContext {
    std::string subcommand;
    std::vector<std::string> argv;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    json manifest() const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json j{{"subcommand", subcommand}, {"argv", argv},       {"config", config},
               {"version", kVersion},      {"wall_time_s", wall}};
        j["seed"] = seed ? json(*seed) : json(nullptr);
        return j;
    }
};

// Options shared by the commands that take an observed vector.
struct DataArgs {
    std::string x_path;
    double sigma = 1.0;
    double kappa = 0.7;

    void add(CLI::App* app) {
        app->add_option("--x", x_path, "Observed vector (CSV or JSON array)")->required();
        app->add_option("--sigma", sigma, "Noise level")->required();
        app->add_option("--kappa", kappa, "Prior complexity exponent")->capture_default_str();
    }
    Observation load(RunContext& ctx) const {
        PriorConfig{kappa, std::nullopt}.validate();
        Observation x(io::read_vector(x_path), sigma);
        ctx.config.update({{"x", x_path}, {"sigma", sigma}, {"kappa", kappa}});
        return x;
    }
};

// A signal given either as a file or as the design (n, p, A).
struct SignalArgs {
    std::string theta_path;
    std::size_t n = 500;
    std::size_t p = 0;
    double A = 0.0;

    void add(CLI::App* app, bool allow_design = true) {
        auto* t = app->add_option("--theta", theta_path, "Signal vector (CSV or JSON array)");
        if (!allow_design) {
            t->required();
            return;
        }
        app->add_option("--n", n, "Design length (when --theta is absent)")->capture_default_str();
        app->add_option("--p", p, "Number of trailing coordinates equal to A");
        app->add_option("--A", A, "Signal amplitude");
    }
    Signal load(RunContext& ctx) const {
        if (!theta_path.empty()) {
            ctx.config["theta"] = theta_path;
            return Signal(io::read_vector(theta_path));
        }
        if (n < 1) throw ConfigError("n must be >= 1");
        ctx.config["design"] = {{"n", n}, {"p", p}, {"A", A}};
        return sparse_signal(n, p, A);
    }
};

struct NoiseArgs {
    std::string family = "gaussian-iid";
    double bound = std::sqrt(3.0);
    double df = 5.0;

    void add(CLI::App* app) {
        app->add_option("--noise", family,
                        "gaussian-iid | uniform-bounded | rademacher | student-t-stress")
            ->capture_default_str();
        app->add_option("--bound", bound, "Half-width for uniform-bounded noise");
        app->add_option("--df", df, "Degrees of freedom for student-t-stress noise");
    }
    NoiseSpec load(RunContext& ctx) const {
        NoiseSpec spec{parse_noise_family(family), bound, df};
        spec.validate();
        ctx.config["noise"] = io::to_json(spec);
        return spec;
    }
};

std::vector<double> default_grid(double lo, double hi, double step) {
    std::vector<double> g;
    // Rounded so that 3 * 0.1 prints as 0.3.
    for (int i = 0; lo + i * step <= hi + 1e-9; ++i) g.push_back(std::round((lo + i * step) * 1e12) / 1e12);
    return g;
}

struct Cli {
    CLI::App app{"Empirical Bayes estimation and uncertainty quantification for sparse normal means",
                 "sparse-eb"};
    RunContext ctx;
    std::string out_path;
    std::string manifest_path;
    std::size_t threads = 0;
    std::uint64_t seed = 0;

    DataArgs data;
    SignalArgs signal;
    NoiseArgs noise;

    // Per-subcommand options.
    std::string method = "threshold";
    double product_K = 0.0;
    double q_floor = 1e-300;
    std::size_t count = 1;
    double tau = 1.0;
    std::optional<double> ebr_t;
    std::size_t k_min = 0;
    double M = 1.0;
    std::string center = "threshold";
    std::string theta_check;
    double beta = 1.0, B = 1.0;
    std::vector<double> rho_grid = default_grid(0.0, 0.9, 0.1);
    std::string config_path;
    std::string out_dir = ".";
    std::optional<double> calibrate;
    std::optional<std::size_t> replications;
    std::optional<std::uint64_t> seed_override;
    std::string radius_scaling;
    std::vector<double> M_grid;
    double M0 = 1.0;
    std::size_t draws = 1000;
    std::string dat_path;

    std::function<void()> action;
    int exit_code = kOk;

    CLI::App* sub(const std::string& name, const std::string& help, bool output = true) {
        auto* s = app.add_subcommand(name, help);
        if (output) {
            s->add_option("--out", out_path, "Output file (default: stdout)");
            s->add_option("--manifest", manifest_path, "Run manifest path (default: <out>.manifest.json)");
        }
        return s;
    }

    void add_seed(CLI::App* s) { s->add_option("--seed", seed, "RNG seed (required)")->required(); }
    void add_threads(CLI::App* s) {
        s->add_option("--threads", threads, "Worker threads (default: SPARSE_EB_THREADS or all cores)");
    }

    Cli() {
        app.require_subcommand(1);
        app.set_version_flag("--version", kVersion);

        auto* s = sub("simulate", "Draw X = theta + sigma * xi and write it as CSV");
        signal.add(s);
        s->add_option("--sigma", data.sigma, "Noise level")->required();
        noise.add(s);
        add_seed(s);
        s->callback([this] {
            action = [this] {
                const Signal theta = signal.load(ctx);
                const NoiseSpec spec = noise.load(ctx);
                ctx.config["sigma"] = data.sigma;
                const Observation x = simulate(theta, data.sigma, spec, seed);
                emit_text(io::to_csv(x.values()));
            };
        });

        s = sub("select", "Penalized subset selector and data-driven radius");
        data.add(s);
        s->callback([this] {
            action = [this] {
                const Observation x = data.load(ctx);
                emit(io::to_json(sparse_eb::select(x, data.kappa)));
            };
        });

        s = sub("estimate", "Point estimates: hard threshold, posterior mean, or product prior");
        data.add(s);
        s->add_option("--method", method, "threshold | shrinkage | product")
            ->check(CLI::IsMember({"threshold", "shrinkage", "product"}))
            ->capture_default_str();
        s->add_option("--K", product_K, "Slab variance factor (required for --method product)");
        s->add_option("--q-floor", q_floor, "Drop trailing q entries below this value")
            ->capture_default_str();
        add_threads(s);
        s->callback([this] {
            action = [this] {
                const Observation x = data.load(ctx);
                ctx.config["method"] = method;
                if (method == "threshold") {
                    const auto sel = sparse_eb::select(x, data.kappa);
                    const Signal est = hard_threshold_estimate(x, sel);
                    json j = io::to_json(sel);
                    j["estimate"] = est.values();
                    emit(j);
                } else if (method == "shrinkage") {
                    BuildOptions opts;
                    opts.threads = resolve_threads(threads);
                    emit(io::to_json(build(x, data.kappa, opts), x, q_floor));
                } else {
                    if (!(product_K > 0.0)) {
                        throw ConfigError("--K > 0 is required for --method product");
                    }
                    ctx.config["K"] = product_K;
                    emit(io::to_json(product_posterior(x, data.kappa, product_K)));
                }
            };
        });

        s = sub("sample", "Draws from the empirical Bayes posterior");
        data.add(s);
        s->add_option("--count", count, "Number of draws")->required();
        add_seed(s);
        s->callback([this] {
            action = [this] {
                const Observation x = data.load(ctx);
                ctx.config["count"] = count;
                const SubsetPosterior post = build(x, data.kappa);
                json draws = json::array();
                for (const auto& d : sample(post, x, seed, count)) draws.push_back(io::to_json(d));
                emit(json{{"draws", draws}});
            };
        });

        s = sub("oracle", "tau-oracle subset, rate and excessive bias ratio");
        signal.add(s, false);
        s->add_option("--sigma", data.sigma, "Noise level")->required();
        s->add_option("--tau", tau, "Variance weight")->capture_default_str();
        s->add_option("--t", ebr_t, "Report membership of the EBR class with this t");
        s->add_option("--k-min", k_min, "Minimum oracle cardinality");
        s->callback([this] {
            action = [this] {
                const Signal theta = signal.load(ctx);
                ctx.config.update({{"sigma", data.sigma}, {"tau", tau}, {"k_min", k_min}});
                const OracleReport r = k_min > 0 ? restricted_tau_oracle(theta, data.sigma, tau, k_min)
                                                 : tau_oracle(theta, data.sigma, tau);
                json j = io::to_json(r);
                if (ebr_t) {
                    ctx.config["t"] = *ebr_t;
                    j["ebr_member"] = ebr_member(theta, data.sigma, tau, *ebr_t);
                }
                emit(j);
            };
        });

        s = sub("ebr", "Excessive bias ratio and EBR-class membership");
        signal.add(s, false);
        s->add_option("--sigma", data.sigma, "Noise level")->required();
        s->add_option("--tau", tau, "Variance weight")->capture_default_str();
        s->add_option("--t", ebr_t, "Class bound t")->required();
        s->callback([this] {
            action = [this] {
                const Signal theta = signal.load(ctx);
                ctx.config.update({{"sigma", data.sigma}, {"tau", tau}, {"t", *ebr_t}});
                const OracleReport r = tau_oracle(theta, data.sigma, tau);
                emit(json{{"ebr_ratio", r.ebr_ratio},
                          {"t", *ebr_t},
                          {"member", ebr_member(theta, data.sigma, tau, *ebr_t)},
                          {"oracle", io::to_json(r)}});
            };
        });

        s = sub("ball", "Confidence ball B(center, sqrt(M) r_hat)");
        data.add(s);
        s->add_option("--M", M, "Radius inflation")->capture_default_str();
        s->add_option("--center", center, "threshold | shrinkage")
            ->check(CLI::IsMember({"threshold", "shrinkage"}))
            ->capture_default_str();
        s->add_option("--theta", theta_check, "Optional true signal; reports coverage");
        s->callback([this] {
            action = [this] {
                const Observation x = data.load(ctx);
                ctx.config.update({{"M", M}, {"center", center}});
                const ConfidenceBall ball =
                    confidence_ball(x, data.kappa, M, parse_center_method(center));
                json j = io::to_json(ball);
                if (!theta_check.empty()) {
                    ctx.config["theta"] = theta_check;
                    j["covers"] = covers(ball, Signal(io::read_vector(theta_check)));
                }
                emit(j);
            };
        });

        s = sub("constants", "Theory constants for given beta, B, kappa");
        s->add_option("--beta", beta, "Exponential moment exponent in (0, 1]")->required();
        s->add_option("--B", B, "Exponential moment bound")->required();
        s->add_option("--kappa", data.kappa, "Prior complexity exponent")->required();
        s->add_option("--rho", rho_grid, "rho values for tau_bar");
        s->callback([this] {
            action = [this] {
                ctx.config.update({{"beta", beta}, {"B", B}, {"kappa", data.kappa}, {"rho", rho_grid}});
                emit(io::to_json(theory_constants(beta, B, data.kappa), rho_grid));
            };
        });

        s = sub("table1", "Coverage and radius study; writes table1.csv and table1.json", false);
        s->add_option("--config", config_path, "Experiment config JSON (default: reference design)");
        s->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
        s->add_option("--calibrate-M", calibrate, "Calibrate M per cell to this coverage");
        s->add_option("--replications", replications, "Override replications");
        s->add_option("--seed", seed_override, "Override seed");
        s->add_option("--radius-scaling", radius_scaling, "sqrt_m | linear_m")
            ->check(CLI::IsMember({"sqrt_m", "linear_m"}));
        s->add_option("--center", center, "threshold | shrinkage")
            ->check(CLI::IsMember({"threshold", "shrinkage"}));
        add_threads(s);
        s->callback([this, s] {
            const bool center_given = s->count("--center") > 0;
            action = [this, center_given] { run_table1(center_given); };
        });

        s = sub("contraction", "Posterior tail mass beyond M0 r^2(theta) + M sigma^2");
        signal.add(s);
        s->add_option("--sigma", data.sigma, "Noise level")->capture_default_str();
        s->add_option("--kappa", data.kappa, "Prior complexity exponent")->capture_default_str();
        noise.add(s);
        add_seed(s);
        s->add_option("--M-grid", M_grid, "M values (default 0, 1, ..., 60)");
        s->add_option("--M0", M0, "Multiplier of the oracle rate")->capture_default_str();
        s->add_option("--replications", replications, "Datasets (default 20)");
        s->add_option("--draws", draws, "Posterior draws per dataset")->capture_default_str();
        s->add_option("--dat", dat_path, "Also write a whitespace-separated data file");
        add_threads(s);
        s->callback([this] {
            action = [this] {
                const Signal theta = signal.load(ctx);
                const NoiseSpec spec = noise.load(ctx);
                if (M_grid.empty()) M_grid = default_grid(0, 60, 1);
                ContractionOptions opts;
                opts.M0 = M0;
                opts.replications = replications.value_or(20);
                opts.draws = draws;
                opts.threads = resolve_threads(threads);
                ctx.config.update({{"sigma", data.sigma}, {"kappa", data.kappa}, {"M_grid", M_grid},
                                   {"M0", M0}, {"replications", opts.replications},
                                   {"draws", draws}});
                const auto curve =
                    contraction_curve(theta, data.sigma, data.kappa, spec, seed, M_grid, opts);
                json pts = json::array();
                std::string dat = "# M mass\n";
                for (const auto& p : curve) {
                    pts.push_back({{"M", p.M}, {"mass", p.mass}});
                    dat += io::format_double(p.M) + ' ' + io::format_double(p.mass) + '\n';
                }
                const AffineFit fit = log_affine_fit(curve);
                if (!dat_path.empty()) write_text(dat_path, dat);
                emit(json{{"curve", pts},
                          {"log_fit",
                           {{"slope", fit.slope},
                            {"intercept", fit.intercept},
                            {"r_squared", fit.r_squared},
                            {"points", fit.points}}}});
            };
        });

        s = sub("dimcheck", "Posterior mass of subsets larger than M s(theta)");
        signal.add(s);
        s->add_option("--sigma", data.sigma, "Noise level")->capture_default_str();
        s->add_option("--kappa", data.kappa, "Prior complexity exponent")->capture_default_str();
        noise.add(s);
        add_seed(s);
        s->add_option("--M-grid", M_grid, "M values (default 1, 1.25, ..., 5)");
        s->add_option("--replications", replications, "Datasets (default 100)");
        s->add_option("--draws", draws, "Posterior draws per dataset for the cross-check (0 skips)");
        add_threads(s);
        s->callback([this, s] {
            const bool draws_given = s->count("--draws") > 0;
            action = [this, draws_given] {
                const Signal theta = signal.load(ctx);
                const NoiseSpec spec = noise.load(ctx);
                if (M_grid.empty()) M_grid = default_grid(1, 5, 0.25);
                DimensionOptions opts;
                opts.replications = replications.value_or(100);
                opts.draws = draws_given ? draws : 0;
                opts.threads = resolve_threads(threads);
                ctx.config.update({{"sigma", data.sigma}, {"kappa", data.kappa}, {"M_grid", M_grid},
                                   {"replications", opts.replications}, {"draws", opts.draws}});
                json pts = json::array();
                for (const auto& p :
                     dimension_check(theta, data.sigma, data.kappa, spec, seed, M_grid, opts)) {
                    json row{{"M", p.M}, {"mass", p.mass}};
                    if (opts.draws > 0) {
                        row["sampled_mass"] = p.sampled_mass;
                        row["sampled_se"] = p.sampled_se;
                    }
                    pts.push_back(row);
                }
                emit(json{{"points", pts}});
            };
        });

        s = sub("selq", "Distribution of r_tau(I_hat, theta) / r_tau(theta)");
        signal.add(s);
        s->add_option("--sigma", data.sigma, "Noise level")->capture_default_str();
        s->add_option("--kappa", data.kappa, "Prior complexity exponent")->capture_default_str();
        s->add_option("--tau", tau, "Variance weight")->capture_default_str();
        noise.add(s);
        add_seed(s);
        s->add_option("--replications", replications, "Datasets (default 100)");
        add_threads(s);
        s->callback([this] {
            action = [this] {
                const Signal theta = signal.load(ctx);
                const NoiseSpec spec = noise.load(ctx);
                const std::size_t reps = replications.value_or(100);
                ctx.config.update({{"sigma", data.sigma}, {"kappa", data.kappa}, {"tau", tau},
                                   {"replications", reps}});
                const SelectorQuality q = selector_quality(theta, data.sigma, data.kappa, tau, spec,
                                                           seed, reps, resolve_threads(threads));
                json survival = json::array();
                for (double c : default_grid(1.0, 3.0, 0.25)) {
                    survival.push_back({{"c", c}, {"p_exceed", q.survival(c)}});
                }
                // JSON has no infinity; infinite ratios are written as null.
                json ratios = json::array();
                for (double r : q.ratio) ratios.push_back(std::isfinite(r) ? json(r) : json(nullptr));
                emit(json{{"oracle_rate_sq", q.oracle_rate_sq},
                          {"median_ratio", q.median_ratio()},
                          {"rate_sq", q.rate_sq},
                          {"ratio", ratios},
                          {"survival", survival}});
            };
        });

        s = sub("replay", "Re-run the command recorded in a manifest", false);
        s->add_option("--manifest", manifest_path, "Manifest written by an earlier run")->required();
        s->add_option("--out", out_path, "Redirect the replayed output file");
        s->add_option("--out-dir", out_dir, "Redirect the replayed output directory (table1)");
        s->callback([this, s] {
            const bool dir_given = s->count("--out-dir") > 0;
            action = [this, dir_given] {
                exit_code = replay(manifest_path, out_path, dir_given ? out_dir : std::string());
            };
        });
    }

    // Re-runs the argv recorded in a manifest, optionally redirecting its outputs.
    static int replay(const std::string& path, const std::string& out, const std::string& dir) {
        const json m = json::parse(io::read_file(path));
        std::vector<std::string> args = m.at("argv").get<std::vector<std::string>>();
        const auto redirect = [&args](const std::string& flag, const std::string& value) {
            if (value.empty()) return;
            std::vector<std::string> kept;
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (args[i] == flag) {
                    ++i;
                } else if (args[i].rfind(flag + "=", 0) != 0) {
                    kept.push_back(args[i]);
                }
            }
            kept.push_back(flag);
            kept.push_back(value);
            args = std::move(kept);
        };
        redirect("--out", out);
        redirect("--out-dir", dir);
        if (!args.empty() && args.front() == "replay") throw ConfigError("manifest records a replay");
        std::vector<std::string> full{"sparse-eb"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<char*> cargv;
        for (auto& a : full) cargv.push_back(a.data());
        Cli inner;
        return inner.run(static_cast<int>(cargv.size()), cargv.data());
    }

    void record_seed(const CLI::App* s) {
        if (s->get_option_no_throw("--seed") != nullptr && s->count("--seed") > 0) {
            ctx.seed = seed_override.value_or(seed);
        }
    }

    void emit_text(const std::string& text) {
        write_text(out_path, text);
        std::string mpath = manifest_path;
        if (mpath.empty() && !out_path.empty()) mpath = out_path + ".manifest.json";
        if (!mpath.empty()) write_text(mpath, dump(ctx.manifest()));
    }
    void emit(const json& j) { emit_text(dump(j)); }

    void run_table1(bool center_given) {
        ExperimentConfig config = config_path.empty()
                                      ? ExperimentConfig::reference_design()
                                      : io::experiment_config_from_json(
                                            json::parse(io::read_file(config_path), nullptr, true));
        if (replications) config.replications = *replications;
        if (seed_override) config.seed = *seed_override;
        if (calibrate) config.calibrate_target = *calibrate;
        if (!radius_scaling.empty()) config.radius_scaling = parse_radius_scaling(radius_scaling);
        if (center_given) config.center = parse_center_method(center);
        config.validate();
        ctx.seed = config.seed;
        ctx.config = io::to_json(config);
        const auto rows = table1(config, resolve_threads(threads));
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path dir(out_dir);
        write_text((dir / "table1.csv").string(), io::table1_csv(rows));
        json jrows = json::array();
        for (const auto& r : rows) jrows.push_back(io::to_json(r));
        write_text((dir / "table1.json").string(), dump(json{{"config", ctx.config}, {"rows", jrows}}));
        write_text((dir / "manifest.json").string(), dump(ctx.manifest()));
        std::cout << io::table1_csv(rows);
    }

    int run(int argc, char** argv) {
        ctx.argv.assign(argv + 1, argv + argc);
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? kOk : kUsage;
        }
        for (const auto* s : app.get_subcommands()) {
            ctx.subcommand = s->get_name();
            record_seed(s);
        }
        action();
        return exit_code;
    }
};

}  // namespace

int main(int argc, char** argv) {
    try {
        Cli cli;
        return cli.run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "sparse-eb: invalid configuration: " << e.what() << '\n';
    } catch (const DataError& e) {
        std::cerr << "sparse-eb: data error: " << e.what() << '\n';
    } catch (const DomainError& e) {
        std::cerr << "sparse-eb: domain error: " << e.what() << '\n';
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "sparse-eb: data error: " << e.what() << '\n';
    } catch (const NumericError& e) {
        std::cerr << "sparse-eb: numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "sparse-eb: error: " << e.what() << '\n';
        return kNumeric;
    }
    return kData;
}
