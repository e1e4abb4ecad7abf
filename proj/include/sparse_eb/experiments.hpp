#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "posterior.hpp"
#include "selector.hpp"
#include "uq.hpp"

namespace sparse_eb {

/// How M inflates the base radius r_hat: radius = sqrt(M) r_hat (the ball
/// B(theta_check, sqrt(M) r_hat)) or radius = M r_hat.
enum class RadiusScaling { SqrtM, LinearM };

inline RadiusScaling parse_radius_scaling(std::string_view name) {
    if (name == "sqrt_m") return RadiusScaling::SqrtM;
    if (name == "linear_m") return RadiusScaling::LinearM;
    throw ConfigError("unknown radius scaling '" + std::string(name) + "'");
}

inline std::string_view to_string(RadiusScaling s) {
    return s == RadiusScaling::SqrtM ? "sqrt_m" : "linear_m";
}

inline double scaled_radius(double M, double radius_sq, RadiusScaling scaling) {
    return scaling == RadiusScaling::SqrtM ? std::sqrt(M * radius_sq) : M * std::sqrt(radius_sq);
}

struct Table1Cell {
    std::size_t p = 0;
    double A = 0.0;
    double M = 1.0;
};

struct ExperimentConfig {
    std::size_t n = 500;
    double sigma = 1.0;
    double kappa = 0.7;
    std::size_t replications = 100;
    std::vector<Table1Cell> cells;
    NoiseSpec noise;
    std::uint64_t seed = 0;
    CenterMethod center = CenterMethod::Threshold;
    RadiusScaling radius_scaling = RadiusScaling::SqrtM;
    /// When set, each cell's M is replaced by the smallest M on a 0.01 grid whose
    /// empirical coverage reaches this target.
    std::optional<double> calibrate_target;

    void validate() const {
        if (n < 1) throw ConfigError("n must be >= 1");
        detail::require_positive(sigma, "sigma");
        detail::require_positive(kappa, "kappa");
        if (replications < 1) throw ConfigError("replications must be >= 1");
        noise.validate();
        for (const auto& c : cells) {
            if (c.p > n) throw ConfigError("cell p=" + std::to_string(c.p) + " exceeds n");
            if (!std::isfinite(c.A)) throw ConfigError("cell amplitude must be finite");
            detail::require_positive(c.M, "M");
        }
        if (calibrate_target && !(*calibrate_target > 0.0 && *calibrate_target <= 1.0)) {
            throw ConfigError("calibration target must lie in (0, 1]");
        }
    }

    /// The simulation design with the printed per-cell M values.
    static ExperimentConfig reference_design(std::uint64_t seed = 20180101) {
        ExperimentConfig c;
        c.seed = seed;
        c.cells = {{25, 3, 2.2},  {25, 4, 1.19}, {25, 5, 1.0},  {50, 3, 1.52}, {50, 4, 1.1},
                   {50, 5, 1.0},  {100, 3, 1.23}, {100, 4, 1.03}, {100, 5, 1.0}};
        return c;
    }
};

struct ExperimentRow {
    std::size_t p = 0;
    double A = 0.0;
    double M = 0.0;
    double ratio = 0.0;           // M * mean(r_hat^2) / (p log(en/p))
    double coverage = 0.0;        // fraction of replications with theta in the ball
    double se_coverage = 0.0;     // sqrt(coverage (1 - coverage) / replications)
    double mean_k_hat = 0.0;
    std::size_t modal_k_hat = 0;
    double mean_radius_sq = 0.0;  // mean r_hat^2
    double oracle_rate_sq = 0.0;  // p log(en/p)
};

namespace detail {

inline std::uint64_t cell_stream(std::size_t cell, std::size_t rep) {
    return (static_cast<std::uint64_t>(cell) << 32) | static_cast<std::uint64_t>(rep);
}

inline std::uint64_t sampling_seed(std::uint64_t seed, std::size_t rep) {
    return mix64(seed ^ 0x5bd1e9955bd1e995ULL) + static_cast<std::uint64_t>(rep) * kGolden;
}

struct ReplicationResult {
    double dist_sq = 0.0;
    double radius_sq = 0.0;
    std::size_t k_hat = 0;
};

inline double coverage_at(std::span<const ReplicationResult> reps, double M, RadiusScaling s) {
    std::size_t hits = 0;
    for (const auto& r : reps) {
        if (std::sqrt(r.dist_sq) <= scaled_radius(M, r.radius_sq, s)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(reps.size());
}

/// Smallest M on the 0.01 grid whose empirical coverage reaches `target`.
inline double calibrate_M(std::span<const ReplicationResult> reps, double target,
                          RadiusScaling scaling) {
    std::vector<double> needed;
    needed.reserve(reps.size());
    for (const auto& r : reps) {
        const double q = r.dist_sq / r.radius_sq;
        needed.push_back(scaling == RadiusScaling::SqrtM ? q : std::sqrt(q));
    }
    std::sort(needed.begin(), needed.end());
    const auto idx = static_cast<std::size_t>(
        std::max(0.0, std::ceil(target * static_cast<double>(needed.size()) - 1e-9) - 1.0));
    const double estimate = needed[std::min(idx, needed.size() - 1)];
    std::size_t j = static_cast<std::size_t>(std::max(1.0, std::floor(estimate * 100.0) - 1.0));
    while (j > 1 && coverage_at(reps, static_cast<double>(j - 1) / 100.0, scaling) >= target) --j;
    while (coverage_at(reps, static_cast<double>(j) / 100.0, scaling) < target) ++j;
    return static_cast<double>(j) / 100.0;
}

}  // namespace detail

/// Monte Carlo coverage and radius study over (p, A) cells. Replication r of
/// cell c is a pure function of (config, c, r); aggregation runs in index order,
/// so the output does not depend on the thread count.
inline std::vector<ExperimentRow> table1(const ExperimentConfig& config, std::size_t threads = 1) {
    config.validate();
    const std::size_t n = config.n;
    std::vector<ExperimentRow> rows;
    rows.reserve(config.cells.size());
    for (std::size_t c = 0; c < config.cells.size(); ++c) {
        const Table1Cell& cell = config.cells[c];
        const Signal theta = sparse_signal(n, cell.p, cell.A);
        std::vector<detail::ReplicationResult> reps(config.replications);
        parallel_for(config.replications, threads, [&](std::size_t r) {
            const Observation x =
                simulate(theta, config.sigma, config.noise, config.seed, detail::cell_stream(c, r));
            const SubsetSelection sel = select(x, config.kappa);
            const Signal center = config.center == CenterMethod::Threshold
                                      ? hard_threshold_estimate(x, sel)
                                      : shrinkage_mean(build(x, config.kappa), x);
            reps[r] = {squared_distance(center.values(), theta.values()), sel.radius_sq,
                       sel.cardinality};
        });

        double M = cell.M;
        if (config.calibrate_target) M = detail::calibrate_M(reps, *config.calibrate_target,
                                                             config.radius_scaling);

        ExperimentRow row;
        row.p = cell.p;
        row.A = cell.A;
        row.M = M;
        double sum_r2 = 0.0;
        double sum_k = 0.0;
        std::vector<std::size_t> k_counts(n + 1, 0);
        for (const auto& r : reps) {
            sum_r2 += r.radius_sq;
            sum_k += static_cast<double>(r.k_hat);
            ++k_counts[r.k_hat];
        }
        const double count = static_cast<double>(reps.size());
        row.mean_radius_sq = sum_r2 / count;
        row.mean_k_hat = sum_k / count;
        row.modal_k_hat = static_cast<std::size_t>(
            std::max_element(k_counts.begin(), k_counts.end()) - k_counts.begin());
        row.oracle_rate_sq = config.sigma * config.sigma * complexity_term(cell.p, n);
        row.ratio = M * row.mean_radius_sq / row.oracle_rate_sq;
        row.coverage = detail::coverage_at(reps, M, config.radius_scaling);
        row.se_coverage = std::sqrt(row.coverage * (1.0 - row.coverage) / count);
        rows.push_back(row);
    }
    return rows;
}

struct CurvePoint {
    double M = 0.0;
    double mass = 0.0;
};

struct ContractionOptions {
    double M0 = 1.0;
    std::size_t replications = 20;
    std::size_t draws = 1000;
    std::size_t threads = 1;
};

/// Average posterior mass of {||theta_draw - theta||^2 >= M0 r^2(theta) + M sigma^2}
/// for each M, estimated from posterior draws.
inline std::vector<CurvePoint> contraction_curve(const Signal& theta, double sigma, double kappa,
                                                 const NoiseSpec& noise, std::uint64_t seed,
                                                 std::span<const double> M_grid,
                                                 const ContractionOptions& options = {}) {
    if (M_grid.empty()) throw ConfigError("contraction_curve: M grid is empty");
    if (options.replications < 1 || options.draws < 1) {
        throw ConfigError("contraction_curve: replications and draws must be >= 1");
    }
    const double base = options.M0 * tau_oracle(theta, sigma, 1.0).rate_sq;
    const double s2 = sigma * sigma;
    const std::size_t G = M_grid.size();
    std::vector<std::vector<double>> per_rep(options.replications, std::vector<double>(G, 0.0));
    parallel_for(options.replications, options.threads, [&](std::size_t r) {
        const Observation x = simulate(theta, sigma, noise, seed, r);
        const SubsetPosterior post = build(x, kappa);
        std::vector<std::size_t> exceed(G, 0);
        std::vector<char> in(theta.size(), 0);
        for_each_draw(post, x, detail::sampling_seed(seed, r), 0, options.draws,
                      [&](const IndexSet& subset, const std::vector<double>& value) {
                          double d = 0.0;
                          for (std::size_t i = 0; i < theta.size(); ++i) {
                              const double diff = value[i] - theta[i];
                              d += diff * diff;
                          }
                          (void)subset;
                          for (std::size_t g = 0; g < G; ++g) {
                              if (d >= base + M_grid[g] * s2) ++exceed[g];
                          }
                      });
        for (std::size_t g = 0; g < G; ++g) {
            per_rep[r][g] = static_cast<double>(exceed[g]) / static_cast<double>(options.draws);
        }
    });
    std::vector<CurvePoint> curve(G);
    for (std::size_t g = 0; g < G; ++g) {
        double s = 0.0;
        for (const auto& row : per_rep) s += row[g];
        curve[g] = {M_grid[g], s / static_cast<double>(options.replications)};
    }
    return curve;
}

struct DimensionPoint {
    double M = 0.0;
    double mass = 0.0;          // exact, from the cardinality posterior
    double sampled_mass = 0.0;  // from posterior draws (when draws > 0)
    double sampled_se = 0.0;
};

struct DimensionOptions {
    std::size_t replications = 100;
    std::size_t draws = 0;  // 0 skips the sampling cross-check
    std::size_t threads = 1;
};

/// Average posterior mass of {I : |I| > M s(theta)} for each M.
inline std::vector<DimensionPoint> dimension_check(const Signal& theta, double sigma, double kappa,
                                                   const NoiseSpec& noise, std::uint64_t seed,
                                                   std::span<const double> M_grid,
                                                   const DimensionOptions& options = {}) {
    if (M_grid.empty()) throw ConfigError("dimension_check: M grid is empty");
    if (options.replications < 1) throw ConfigError("dimension_check: replications must be >= 1");
    const std::size_t s = theta.sparsity();
    if (s == 0) throw DomainError("dimension_check: theta has no nonzero coordinates (s = 0)");
    const std::size_t G = M_grid.size();
    struct RepResult {
        std::vector<double> exact, sampled;
    };
    std::vector<RepResult> per_rep(options.replications);
    parallel_for(options.replications, options.threads, [&](std::size_t r) {
        const Observation x = simulate(theta, sigma, noise, seed, r);
        const SubsetPosterior post = build(x, kappa);
        RepResult res{std::vector<double>(G, 0.0), std::vector<double>(G, 0.0)};
        for (std::size_t g = 0; g < G; ++g) {
            const double limit = M_grid[g] * static_cast<double>(s);
            double tail = 0.0;
            for (std::size_t k = post.n + 1; k-- > 0;) {
                if (static_cast<double>(k) <= limit) break;
                tail += post.cardinality_posterior[k];
            }
            res.exact[g] = std::min(tail, 1.0);
        }
        if (options.draws > 0) {
            std::vector<std::size_t> hits(G, 0);
            for_each_draw(post, x, detail::sampling_seed(seed, r), 0, options.draws,
                          [&](const IndexSet& subset, const std::vector<double>&) {
                              for (std::size_t g = 0; g < G; ++g) {
                                  if (static_cast<double>(subset.size()) >
                                      M_grid[g] * static_cast<double>(s)) {
                                      ++hits[g];
                                  }
                              }
                          });
            for (std::size_t g = 0; g < G; ++g) {
                res.sampled[g] = static_cast<double>(hits[g]) / static_cast<double>(options.draws);
            }
        }
        per_rep[r] = std::move(res);
    });
    const double R = static_cast<double>(options.replications);
    std::vector<DimensionPoint> out(G);
    for (std::size_t g = 0; g < G; ++g) {
        double exact = 0.0, sampled = 0.0, var = 0.0;
        for (const auto& rep : per_rep) {
            exact += rep.exact[g];
            sampled += rep.sampled[g];
            // Binomial variance of each replication's draw fraction around its exact value.
            if (options.draws > 0) {
                var += rep.exact[g] * (1.0 - rep.exact[g]) / static_cast<double>(options.draws);
            }
        }
        out[g] = {M_grid[g], exact / R, sampled / R, std::sqrt(var) / R};
    }
    return out;
}

struct SelectorQuality {
    double oracle_rate_sq = 0.0;
    std::vector<double> rate_sq;  // r^2_tau(I_hat, theta) per replication
    std::vector<double> ratio;    // r_tau(I_hat, theta) / r_tau(theta)

    double median_ratio() const {
        std::vector<double> v(ratio);
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    }

    /// Empirical P(ratio > c).
    double survival(double c) const {
        const auto count = std::count_if(ratio.begin(), ratio.end(), [c](double r) { return r > c; });
        return static_cast<double>(count) / static_cast<double>(ratio.size());
    }
};

/// Sample of r_tau(I_hat, theta) / r_tau(theta) over replications. When the
/// oracle rate is 0 (theta = 0) the ratio is 1 if r_tau(I_hat, theta) = 0 and
/// +inf otherwise.
inline SelectorQuality selector_quality(const Signal& theta, double sigma, double kappa, double tau,
                                        const NoiseSpec& noise, std::uint64_t seed,
                                        std::size_t reps, std::size_t threads = 1) {
    if (reps < 1) throw ConfigError("selector_quality: reps must be >= 1");
    SelectorQuality q;
    q.oracle_rate_sq = tau_oracle(theta, sigma, tau).rate_sq;
    q.rate_sq.resize(reps);
    q.ratio.resize(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
        const Observation x = simulate(theta, sigma, noise, seed, r);
        const SubsetSelection sel = select(x, kappa);
        const double rate = tau_rate(sel.selected, theta, sigma, tau);
        q.rate_sq[r] = rate;
        if (q.oracle_rate_sq > 0.0) {
            q.ratio[r] = std::sqrt(rate / q.oracle_rate_sq);
        } else {
            q.ratio[r] = rate == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        }
    });
    return q;
}

struct AffineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Least-squares fit of log(mass) against M over points with lo < mass <= hi.
inline AffineFit log_affine_fit(std::span<const CurvePoint> curve, double lo = 0.0, double hi = 0.5) {
    std::vector<double> xs, ys;
    for (const auto& pt : curve) {
        if (pt.mass > lo && pt.mass <= hi) {
            xs.push_back(pt.M);
            ys.push_back(std::log(pt.mass));
        }
    }
    AffineFit fit;
    fit.points = xs.size();
    if (xs.size() < 3) return fit;
    const double m = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

}  // namespace sparse_eb
