#include "nftindex/bubble.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <thread>

#include <Eigen/Dense>

#include "nftindex/errors.hpp"
#include "nftindex/io.hpp"
#include "nftindex/price_index.hpp"
#include "nftindex/rng.hpp"
#include "nftindex/stats.hpp"

namespace nftidx {
namespace {

// 1 - R^2 below this counts as a perfect fit.
constexpr double kPerfectFitRatio = 1e-20;

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

void BsadfConfig::validate() const {
    if (adf.lag_order < 0) throw ValidationError("lag order must be >= 0");
    if (min_window < static_cast<std::size_t>(adf.lag_order) + 3) {
        throw ValidationError("min_window must be >= lag_order + 3");
    }
    if (min_duration < 1) throw ValidationError("min_duration must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence must lie in (0,1)");
    if (n_paths < 100) throw ValidationError("N_MC must be >= 100");
    if (!(null.sigma > 0.0)) throw ValidationError("null sigma must be > 0");
}

double adf_statistic(std::span<const double> y, std::size_t first, std::size_t last, const AdfConfig& config) {
    const auto k = static_cast<std::size_t>(config.lag_order);
    if (config.lag_order < 0) throw ValidationError("lag order must be >= 0");
    if (last >= y.size() || first > last) throw ValidationError("ADF window outside the series");
    if (last - first + 1 < k + 3) throw ValidationError("ADF window shorter than lag_order + 3");

    // Rows t = first+k+1 .. last; regressors y(t-1), dy(t-1), ..., dy(t-k).
    const std::size_t n = last - first - k;
    const std::size_t q = k + 1;  // slope columns; intercept handled by centring
    if (n <= q + 1) throw NumericalError("degenerate regression: no residual degrees of freedom");

    const auto dy = [&](std::size_t t) { return y[t] - y[t - 1]; };
    const auto regressor = [&](std::size_t t, std::size_t j) { return j == 0 ? y[t - 1] : dy(t - j); };

    Eigen::VectorXd xbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    double ybar = 0.0;
    for (std::size_t t = first + k + 1; t <= last; ++t) {
        ybar += dy(t);
        for (std::size_t j = 0; j < q; ++j) xbar(static_cast<Eigen::Index>(j)) += regressor(t, j);
    }
    ybar /= static_cast<double>(n);
    xbar /= static_cast<double>(n);

    Eigen::MatrixXd sxx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    Eigen::VectorXd sxy = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    Eigen::VectorXd xc(static_cast<Eigen::Index>(q));
    double syy = 0.0;
    for (std::size_t t = first + k + 1; t <= last; ++t) {
        const double yc = dy(t) - ybar;
        for (std::size_t j = 0; j < q; ++j) {
            xc(static_cast<Eigen::Index>(j)) = regressor(t, j) - xbar(static_cast<Eigen::Index>(j));
        }
        sxx.selfadjointView<Eigen::Lower>().rankUpdate(xc);
        sxy += yc * xc;
        syy += yc * yc;
    }
    sxx = sxx.selfadjointView<Eigen::Lower>();

    if (sxx(0, 0) <= 0.0) throw NumericalError("degenerate regression: regressor y(t-1) has zero variance");
    // Unit-diagonal scaling for a scale-free rank test.
    const Eigen::VectorXd d = sxx.diagonal().cwiseSqrt();
    if ((d.array() <= 0.0).any()) throw NumericalError("degenerate regression: lagged difference has zero variance");
    const Eigen::MatrixXd corr = d.cwiseInverse().asDiagonal() * sxx * d.cwiseInverse().asDiagonal();
    const Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() < 1e-7) {
        throw NumericalError("degenerate regression: collinear regressors");
    }
    const Eigen::VectorXd beta = d.cwiseInverse().asDiagonal() * llt.solve(d.cwiseInverse().asDiagonal() * sxy);

    double rss = 0.0;
    for (std::size_t t = first + k + 1; t <= last; ++t) {
        double r = dy(t) - ybar;
        for (std::size_t j = 0; j < q; ++j) {
            r -= beta(static_cast<Eigen::Index>(j)) * (regressor(t, j) - xbar(static_cast<Eigen::Index>(j)));
        }
        rss += r * r;
    }
    if (!(rss > kPerfectFitRatio * syy)) throw NumericalError("degenerate regression: perfect fit");

    const double dof = static_cast<double>(n - q - 1);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    e0(0) = 1.0 / d(0);
    const double inv00 = e0.dot(llt.solve(e0));  // [(X'X)^-1]_{00}
    const double se = std::sqrt(rss / dof * inv00);
    return beta(0) / se;
}

BsadfPoint bsadf(std::span<const double> y, std::size_t t, std::size_t min_window, const AdfConfig& config) {
    if (t >= y.size()) throw ValidationError("BSADF period beyond the series");
    if (t < min_window) throw ValidationError("BSADF requires t >= w");
    BsadfPoint out;
    bool any = false;
    for (std::size_t start = 0; start + min_window <= t; ++start) {
        try {
            const double v = adf_statistic(y, start, t, config);
            if (!any || v > out.value) {
                out.value = v;
                out.best_start = start;
            }
            any = true;
        } catch (const NumericalError&) {
            ++out.skipped;
        }
    }
    if (!any) throw NumericalError("degenerate regression: every BSADF window is degenerate");
    return out;
}

std::vector<std::optional<double>> bsadf_signal(std::span<const double> y, std::size_t min_window,
                                                const AdfConfig& config) {
    if (y.size() <= min_window) throw ValidationError("series shorter than w + 1");
    std::vector<std::optional<double>> out;
    out.reserve(y.size() - min_window);
    for (std::size_t t = min_window; t < y.size(); ++t) {
        try {
            out.emplace_back(bsadf(y, t, min_window, config).value);
        } catch (const NumericalError&) {
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

std::vector<std::optional<double>> sadf_curve(std::span<const double> y, std::size_t min_window,
                                              const AdfConfig& config) {
    if (y.size() <= min_window) throw ValidationError("series shorter than w + 1");
    std::vector<std::optional<double>> out;
    out.reserve(y.size() - min_window);
    std::optional<double> running;
    for (std::size_t t = min_window; t < y.size(); ++t) {
        try {
            const double v = adf_statistic(y, 0, t, config);
            if (!running || v > *running) running = v;
        } catch (const NumericalError&) {
        }
        out.push_back(running);
    }
    return out;
}

double CriticalValueTable::at(std::size_t t, double confidence) const {
    if (t < min_window || t > horizon) throw ValidationError("critical value requested outside [w, T]");
    const auto it = std::find(confidences.begin(), confidences.end(), confidence);
    if (it == confidences.end()) throw ValidationError("confidence not tabulated");
    return curves[static_cast<std::size_t>(it - confidences.begin())][t - min_window];
}

std::vector<double> CriticalValueTable::curve(double confidence) const {
    const auto it = std::find(confidences.begin(), confidences.end(), confidence);
    if (it == confidences.end()) throw ValidationError("confidence not tabulated");
    return curves[static_cast<std::size_t>(it - confidences.begin())];
}

bool CriticalValueTable::has_confidence(double confidence) const {
    return std::find(confidences.begin(), confidences.end(), confidence) != confidences.end();
}

bool CriticalValueTable::matches(std::size_t T, std::size_t w, int paths, std::uint64_t s, const NullParams& np,
                                 int lag) const {
    return horizon == T && min_window == w && n_paths == paths && seed == s && same_double(null.eta, np.eta) &&
           same_double(null.sigma, np.sigma) && same_double(null.drift, np.drift) && lag_order == lag;
}

nlohmann::json CriticalValueTable::to_json() const {
    nlohmann::json j;
    j["key"] = {{"T", horizon},         {"w", min_window},  {"n_mc", n_paths},
                {"seed", seed},         {"eta", null.eta},  {"sigma", null.sigma},
                {"d", null.drift},      {"lag_order", lag_order}};
    j["confidences"] = confidences;
    j["curves"] = curves;
    return j;
}

CriticalValueTable CriticalValueTable::from_json(const nlohmann::json& j) {
    try {
        CriticalValueTable t;
        const auto& key = j.at("key");
        t.horizon = key.at("T").get<std::size_t>();
        t.min_window = key.at("w").get<std::size_t>();
        t.n_paths = key.at("n_mc").get<int>();
        t.seed = key.at("seed").get<std::uint64_t>();
        t.null.eta = key.at("eta").get<double>();
        t.null.sigma = key.at("sigma").get<double>();
        t.null.drift = key.at("d").get<double>();
        t.lag_order = key.at("lag_order").get<int>();
        t.confidences = j.at("confidences").get<std::vector<double>>();
        t.curves = j.at("curves").get<std::vector<std::vector<double>>>();
        if (t.curves.size() != t.confidences.size()) throw ValidationError("curve count mismatch");
        for (const auto& c : t.curves) {
            if (c.size() != t.horizon - t.min_window + 1) throw ValidationError("curve length mismatch");
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed critical-value table: ") + e.what());
    }
}

CriticalValueTable critical_values(std::size_t horizon, std::size_t min_window, std::span<const double> confidences,
                                   int n_paths, std::uint64_t seed, const NullParams& null, const AdfConfig& config,
                                   unsigned threads) {
    if (horizon < min_window) throw ValidationError("critical values need T >= w");
    if (min_window < static_cast<std::size_t>(config.lag_order) + 3) {
        throw ValidationError("infeasible windows: w < lag_order + 3");
    }
    if (n_paths < 100) throw ValidationError("N_MC must be >= 100");
    if (confidences.empty()) throw ValidationError("at least one confidence level is required");
    for (const double c : confidences) {
        if (!(c > 0.0 && c < 1.0)) throw ValidationError("confidence must lie in (0,1)");
    }

    const std::size_t width = horizon - min_window + 1;
    const auto paths = static_cast<std::size_t>(n_paths);
    std::vector<double> values(paths * width);  // row-major [path][t - w]
    const double drift = null.drift * std::pow(static_cast<double>(horizon + 1), -null.eta);

    const auto run_path = [&](std::size_t p) {
        RandomStream rng(seed, p);
        std::vector<double> y(horizon + 1);
        y[0] = 0.0;
        for (std::size_t t = 0; t < horizon; ++t) y[t + 1] = drift + y[t] + null.sigma * rng.normal();
        const auto sadf = sadf_curve(y, min_window, config);
        for (std::size_t i = 0; i < width; ++i) {
            values[p * width + i] = sadf[i].value_or(-std::numeric_limits<double>::infinity());
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(paths)));
    if (workers == 1) {
        for (std::size_t p = 0; p < paths; ++p) run_path(p);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t p = w; p < paths; p += workers) run_path(p);
            });
        }
    }

    CriticalValueTable table;
    table.horizon = horizon;
    table.min_window = min_window;
    table.n_paths = n_paths;
    table.seed = seed;
    table.null = null;
    table.lag_order = config.lag_order;
    table.confidences.assign(confidences.begin(), confidences.end());
    std::sort(table.confidences.begin(), table.confidences.end());
    table.confidences.erase(std::unique(table.confidences.begin(), table.confidences.end()), table.confidences.end());
    table.curves.assign(table.confidences.size(), std::vector<double>(width));

    std::vector<double> column(paths);
    for (std::size_t i = 0; i < width; ++i) {
        for (std::size_t p = 0; p < paths; ++p) column[p] = values[p * width + i];
        std::sort(column.begin(), column.end());
        for (std::size_t j = 0; j < table.confidences.size(); ++j) {
            table.curves[j][i] = stats::quantile_sorted(column, table.confidences[j]);
        }
    }
    return table;
}

CriticalValueTable cached_critical_values(const std::string& cache_path, std::size_t horizon, std::size_t min_window,
                                          std::span<const double> confidences, int n_paths, std::uint64_t seed,
                                          const NullParams& null, const AdfConfig& config, unsigned threads,
                                          bool* cache_hit) {
    if (cache_hit) *cache_hit = false;
    if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
        try {
            auto table = CriticalValueTable::from_json(io::read_json(cache_path));
            const bool covers = std::all_of(confidences.begin(), confidences.end(),
                                            [&](double c) { return table.has_confidence(c); });
            if (covers && table.matches(horizon, min_window, n_paths, seed, null, config.lag_order)) {
                if (cache_hit) *cache_hit = true;
                return table;
            }
        } catch (const ValidationError&) {
            // Unreadable cache: recompute and overwrite.
        }
    }
    auto table = critical_values(horizon, min_window, confidences, n_paths, seed, null, config, threads);
    if (!cache_path.empty()) io::write_json_atomic(cache_path, table.to_json());
    return table;
}

std::vector<BubbleEpisode> detect_bubbles(std::span<const std::optional<double>> signal,
                                          std::span<const double> critical, std::size_t first_period,
                                          std::size_t min_duration) {
    if (signal.size() != critical.size()) throw ValidationError("signal and critical curve lengths differ");
    std::vector<BubbleEpisode> episodes;
    std::size_t i = 0;
    while (i < signal.size()) {
        if (!(signal[i] && *signal[i] > critical[i])) {
            ++i;
            continue;
        }
        BubbleEpisode ep;
        ep.start = first_period + i;
        std::size_t j = i + min_duration;
        for (; j < signal.size(); ++j) {
            if (signal[j] && *signal[j] < critical[j]) break;
        }
        if (j < signal.size()) {
            ep.end = first_period + j;
            i = j + 1;
        } else {
            i = signal.size();
        }
        episodes.push_back(ep);
    }
    return episodes;
}

BubbleReport analyze_bubbles(std::span<const double> levels, const BsadfConfig& config, const std::string& cache_path,
                             unsigned threads) {
    config.validate();
    if (levels.size() < config.min_window + config.min_duration) {
        throw ValidationError("index has fewer than w + delta periods");
    }
    std::vector<double> y(levels.begin(), levels.end());
    if (config.use_ma) y = moving_average(y, 7);
    if (config.use_log) {
        for (double& v : y) {
            if (!(v > 0.0)) throw ValidationError("log transform requires positive levels");
            v = std::log(v);
        }
    }

    BubbleReport report;
    report.first_period = config.min_window;
    report.signal = bsadf_signal(y, config.min_window, config.adf);
    report.degenerate = std::none_of(report.signal.begin(), report.signal.end(),
                                     [](const auto& v) { return v.has_value(); });

    const std::vector<double> confidences{0.90, 0.95, 0.99, config.confidence};
    const std::size_t horizon = y.size() - 1;
    const auto table = cached_critical_values(cache_path, horizon, config.min_window, confidences, config.n_paths,
                                              config.seed, config.null, config.adf, threads, &report.cache_hit);
    report.cv95 = table.curve(0.95);
    report.cv99 = table.curve(0.99);
    report.cv_dating = table.curve(config.confidence);
    if (!report.degenerate) {
        report.episodes = detect_bubbles(report.signal, report.cv_dating, report.first_period, config.min_duration);
    }
    return report;
}

nlohmann::json to_json(const AdfConfig& c) { return {{"lag_order", c.lag_order}, {"include_intercept", true}}; }

nlohmann::json to_json(const NullParams& p) { return {{"eta", p.eta}, {"sigma", p.sigma}, {"d", p.drift}}; }

nlohmann::json to_json(const BsadfConfig& c) {
    return {{"min_window", c.min_window}, {"min_duration", c.min_duration}, {"confidence", c.confidence},
            {"n_mc", c.n_paths},          {"seed", c.seed},                 {"null_params", to_json(c.null)},
            {"adf", to_json(c.adf)},      {"use_log", c.use_log},           {"use_ma", c.use_ma}};
}

}  // namespace nftidx
