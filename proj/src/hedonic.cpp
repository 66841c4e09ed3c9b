#include "nftindex/hedonic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include <Eigen/Dense>

#include "nftindex/errors.hpp"
#include "nftindex/stats.hpp"

namespace nftidx {

using nlohmann::json;

void FitConfig::validate() const {
    if (!(huber_delta > 0.0)) throw ValidationError("huber_delta must be > 0");
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    if (!(coef_tolerance > 0.0)) throw ValidationError("coef_tolerance must be > 0");
}

json FitConfig::to_json() const {
    return {{"huber_delta", huber_delta},
            {"max_iterations", max_iterations},
            {"coef_tolerance", coef_tolerance},
            {"min_sales_per_collection", min_sales_per_collection},
            {"min_sales_per_period", min_sales_per_period}};
}

Design build_design(std::span<const SaleRecord> sales, std::span<const PeriodAssignment> periods,
                    const std::map<AssetKey, TraitFrequencyAggregate>& frequencies, const PeriodGrid& grid,
                    const FitConfig& config) {
    struct Pending {
        std::size_t sale_index;
        std::string collection;
        std::int64_t period;
        TraitFrequencyAggregate freq;
        double target;
    };
    std::vector<Pending> pending;
    pending.reserve(periods.size());
    std::set<std::int64_t> periods_with_sales;
    for (const auto& pa : periods) {
        if (pa.sale_index >= sales.size()) throw ValidationError("period assignment refers to an unknown sale");
        const SaleRecord& s = sales[pa.sale_index];
        const auto it = frequencies.find(s.key());
        if (it == frequencies.end()) {
            throw ValidationError("sale of " + s.collection + "/" + s.token_id + " has no frequency aggregate");
        }
        if (!(s.price_usd > 0.0)) throw ValidationError("sale with non-positive price reached the design");
        pending.push_back({pa.sale_index, s.collection, pa.period, it->second, std::log(s.price_usd)});
        periods_with_sales.insert(pa.period);
    }

    Design design;
    design.grid = grid;
    std::vector<bool> keep(pending.size(), true);
    for (bool changed = true; changed;) {
        changed = false;
        std::map<std::string, std::size_t> per_collection;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (keep[i]) ++per_collection[pending[i].collection];
        }
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (keep[i] && per_collection[pending[i].collection] < config.min_sales_per_collection) {
                keep[i] = false;
                ++design.dropped_collection_rows;
                changed = true;
            }
        }
        std::map<std::int64_t, std::size_t> per_period;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (keep[i]) ++per_period[pending[i].period];
        }
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (keep[i] && per_period[pending[i].period] < config.min_sales_per_period) {
                keep[i] = false;
                ++design.dropped_period_rows;
                changed = true;
            }
        }
    }

    std::set<std::string> collections;
    std::set<std::int64_t> kept_periods;
    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (!keep[i]) continue;
        collections.insert(pending[i].collection);
        kept_periods.insert(pending[i].period);
    }
    if (collections.empty()) throw ValidationError("design has zero retained rows");

    design.collections.assign(collections.begin(), collections.end());
    design.periods.assign(kept_periods.begin(), kept_periods.end());
    std::map<std::string, std::size_t> cidx;
    for (std::size_t i = 0; i < design.collections.size(); ++i) cidx[design.collections[i]] = i;
    std::map<std::int64_t, std::size_t> pidx;
    for (std::size_t i = 0; i < design.periods.size(); ++i) pidx[design.periods[i]] = i;

    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (!keep[i]) continue;
        const auto& p = pending[i];
        design.rows.push_back({p.sale_index, cidx.at(p.collection), pidx.at(p.period), p.freq, p.target});
    }
    for (const auto period : periods_with_sales) {
        if (!kept_periods.count(period)) {
            design.warnings.push_back("period " + format_date(grid.date_of(period)) +
                                      " dropped: no retained sales (index gap)");
        }
    }
    return design;
}

namespace {

constexpr std::size_t kChunks = 16;  // fixed partition: results never depend on thread count
constexpr double kRankTolerance = 1e-10;

// Column layout: [0] log_scale, then free beta columns, then alpha 1..C-1, then gamma 1..P-1.
struct Layout {
    std::array<int, 3> beta_col{-1, -1, -1};  // -1 when pinned
    std::size_t alpha_offset = 0;
    std::size_t gamma_offset = 0;
    std::size_t width = 0;
    std::vector<std::string> names;
};

Layout make_layout(const Design& d, std::vector<std::string>& pinned) {
    Layout l;
    l.names.push_back("log_scale");
    const std::array<const char*, 3> beta_names{"beta_min", "beta_avg", "beta_max"};
    const auto component = [](const TraitFrequencyAggregate& f, int b) {
        return b == 0 ? f.f_min : (b == 1 ? f.f_avg : f.f_max);
    };
    for (int b = 0; b < 3; ++b) {
        const double first = component(d.rows.front().freq, b);
        const bool constant = std::all_of(d.rows.begin(), d.rows.end(),
                                          [&](const DesignRow& r) { return component(r.freq, b) == first; });
        if (constant) {
            pinned.emplace_back(beta_names[static_cast<std::size_t>(b)]);
        } else {
            l.beta_col[static_cast<std::size_t>(b)] = static_cast<int>(l.names.size());
            l.names.emplace_back(beta_names[static_cast<std::size_t>(b)]);
        }
    }
    l.alpha_offset = l.names.size() - 1;  // column of collection index c is alpha_offset + c
    for (std::size_t c = 1; c < d.collections.size(); ++c) l.names.push_back("alpha[" + d.collections[c] + "]");
    l.gamma_offset = l.names.size() - 1;
    for (std::size_t p = 1; p < d.periods.size(); ++p) {
        l.names.push_back("gamma[" + format_date(d.grid.date_of(d.periods[p])) + "]");
    }
    l.width = l.names.size();
    return l;
}

struct SparseRow {
    std::array<std::size_t, 6> idx;
    std::array<double, 6> val;
    std::size_t nnz = 0;
};

SparseRow expand(const Layout& l, const DesignRow& r) {
    SparseRow s;
    const auto push = [&](std::size_t i, double v) {
        s.idx[s.nnz] = i;
        s.val[s.nnz] = v;
        ++s.nnz;
    };
    push(0, 1.0);
    const std::array<double, 3> f{r.freq.f_min, r.freq.f_avg, r.freq.f_max};
    for (std::size_t b = 0; b < 3; ++b) {
        if (l.beta_col[b] >= 0) push(static_cast<std::size_t>(l.beta_col[b]), f[b]);
    }
    if (r.collection > 0) push(l.alpha_offset + r.collection, 1.0);
    if (r.period > 0) push(l.gamma_offset + r.period, 1.0);
    return s;
}

double row_dot(const SparseRow& s, const Eigen::VectorXd& b) {
    double v = 0.0;
    for (std::size_t i = 0; i < s.nnz; ++i) v += s.val[i] * b(static_cast<Eigen::Index>(s.idx[i]));
    return v;
}

template <typename Body>
void for_each_chunk(std::size_t n_rows, unsigned threads, Body body) {
    const auto bounds = [n_rows](std::size_t c) { return c * n_rows / kChunks; };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, kChunks));
    if (workers == 1) {
        for (std::size_t c = 0; c < kChunks; ++c) body(c, bounds(c), bounds(c + 1));
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < kChunks; c += workers) body(c, bounds(c), bounds(c + 1));
        });
    }
}

struct NormalEquations {
    Eigen::MatrixXd xtx;
    Eigen::VectorXd xty;
};

NormalEquations assemble(const std::vector<SparseRow>& rows, const Design& d, std::span<const double> weights,
                         std::size_t width, unsigned threads) {
    std::vector<NormalEquations> parts(kChunks);
    for_each_chunk(rows.size(), threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        auto& part = parts[c];
        part.xtx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(width));
        part.xty = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
        for (std::size_t r = lo; r < hi; ++r) {
            const auto& s = rows[r];
            const double w = weights.empty() ? 1.0 : weights[r];
            for (std::size_t i = 0; i < s.nnz; ++i) {
                const double wi = w * s.val[i];
                const auto ii = static_cast<Eigen::Index>(s.idx[i]);
                part.xty(ii) += wi * d.rows[r].target;
                for (std::size_t j = 0; j < s.nnz; ++j) {
                    part.xtx(ii, static_cast<Eigen::Index>(s.idx[j])) += wi * s.val[j];
                }
            }
        }
    });
    NormalEquations total{parts[0].xtx, parts[0].xty};
    for (std::size_t c = 1; c < kChunks; ++c) {
        total.xtx += parts[c].xtx;
        total.xty += parts[c].xty;
    }
    return total;
}

// Solves the (scaled) normal equations with one step of iterative refinement.
Eigen::VectorXd solve_weighted(const std::vector<SparseRow>& rows, const Design& d, std::span<const double> weights,
                               std::size_t width, unsigned threads) {
    const auto ne = assemble(rows, d, weights, width, threads);
    const Eigen::VectorXd scale = ne.xtx.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = scale.asDiagonal() * ne.xtx * scale.asDiagonal();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
    if (ldlt.info() != Eigen::Success) throw NumericalError("weighted normal equations could not be factored");
    Eigen::VectorXd b = scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * ne.xty);

    // Refinement: X'W(y - Xb) accumulated row by row.
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double w = weights.empty() ? 1.0 : weights[r];
        const double resid = d.rows[r].target - row_dot(rows[r], b);
        for (std::size_t i = 0; i < rows[r].nnz; ++i) {
            g(static_cast<Eigen::Index>(rows[r].idx[i])) += w * rows[r].val[i] * resid;
        }
    }
    b += scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * g);
    return b;
}

}  // namespace

FitResult fit(const Design& design, const FitConfig& config) {
    config.validate();
    if (design.rows.empty()) throw ValidationError("design has zero retained rows");

    std::vector<std::string> pinned;
    const Layout layout = make_layout(design, pinned);
    std::vector<SparseRow> rows;
    rows.reserve(design.rows.size());
    for (const auto& r : design.rows) rows.push_back(expand(layout, r));

    FitResult result;
    auto& diag = result.diagnostics;
    diag.rows_used = design.rows.size();
    diag.dropped_collection_rows = design.dropped_collection_rows;
    diag.dropped_period_rows = design.dropped_period_rows;
    diag.warnings = design.warnings;
    for (const auto& p : pinned) diag.warnings.push_back(p + " pinned to 0: regressor is constant across rows");

    // Rank and conditioning of the unweighted, unit-diagonal normal matrix.
    {
        const auto ne = assemble(rows, design, {}, layout.width, config.threads);
        const Eigen::VectorXd scale = ne.xtx.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd scaled = scale.asDiagonal() * ne.xtx * scale.asDiagonal();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
        const Eigen::VectorXd& ev = eig.eigenvalues();
        const double top = ev.maxCoeff();
        diag.condition_number = ev.minCoeff() > 0.0 ? top / ev.minCoeff() : std::numeric_limits<double>::infinity();
        if (design.rows.size() < layout.width || ev.minCoeff() <= kRankTolerance * top) {
            std::set<std::size_t> involved;
            for (Eigen::Index k = 0; k < ev.size(); ++k) {
                if (ev(k) > kRankTolerance * top) continue;
                const Eigen::VectorXd v = eig.eigenvectors().col(k);
                for (Eigen::Index i = 0; i < v.size(); ++i) {
                    if (std::abs(v(i)) > 0.05) involved.insert(static_cast<std::size_t>(i));
                }
            }
            std::string names;
            for (const auto i : involved) names += (names.empty() ? "" : ", ") + layout.names[i];
            throw NumericalError("rank-deficient design after gauge constraints; collinear columns: " + names);
        }
    }

    const std::size_t n = design.rows.size();
    Eigen::VectorXd coef = solve_weighted(rows, design, {}, layout.width, config.threads);
    std::vector<double> resid(n), weights(n);
    const auto residuals = [&](const Eigen::VectorXd& b) {
        for (std::size_t i = 0; i < n; ++i) resid[i] = design.rows[i].target - row_dot(rows[i], b);
    };

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        diag.iterations = iter;
        residuals(coef);
        const double s = stats::robust_scale(resid);
        if (!(s > 0.0)) {
            // Exact fit of at least half the rows: Huber weights are all one.
            diag.converged = true;
            diag.last_step = 0.0;
            break;
        }
        const double cut = config.huber_delta * s;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::abs(resid[i]);
            weights[i] = a <= cut ? 1.0 : cut / a;
        }
        const Eigen::VectorXd next = solve_weighted(rows, design, weights, layout.width, config.threads);
        diag.last_step = (next - coef).cwiseAbs().maxCoeff();
        coef = next;
        if (diag.last_step <= config.coef_tolerance) {
            diag.converged = true;
            break;
        }
    }

    residuals(coef);
    diag.residual_median = stats::median(resid);
    diag.residual_mad = stats::mad(resid);

    HedonicParams& p = result.params;
    p.grid = design.grid;
    p.gauge.reference_collection = design.collections.front();
    p.gauge.reference_period = design.periods.front();
    p.gauge.pinned = pinned;
    p.log_scale = coef(0);
    const auto beta = [&](std::size_t b) {
        return layout.beta_col[b] >= 0 ? coef(layout.beta_col[b]) : 0.0;
    };
    p.beta_min = beta(0);
    p.beta_avg = beta(1);
    p.beta_max = beta(2);
    for (std::size_t c = 0; c < design.collections.size(); ++c) {
        p.alpha[design.collections[c]] = c == 0 ? 0.0 : coef(static_cast<Eigen::Index>(layout.alpha_offset + c));
    }
    for (std::size_t t = 0; t < design.periods.size(); ++t) {
        p.gamma[design.periods[t]] = t == 0 ? 0.0 : coef(static_cast<Eigen::Index>(layout.gamma_offset + t));
    }
    p.sigma = stats::kMadToSigma * diag.residual_mad;
    if (!(p.sigma > 0.0)) {
        p.sigma = std::numeric_limits<double>::min();
        diag.warnings.push_back("residual scale is zero; sigma floored to the smallest normal double");
    }
    return result;
}

HedonicParams HedonicParams::shifted(double c) const {
    HedonicParams out = *this;
    out.log_scale -= c;
    for (auto& [t, g] : out.gamma) g += c;
    return out;
}

json HedonicParams::to_json() const {
    json alpha_j = json::object();
    for (const auto& [id, v] : alpha) alpha_j[id] = v;
    json gamma_j = json::object();
    for (const auto& [t, v] : gamma) gamma_j[format_date(grid.date_of(t))] = v;
    return {{"gauge",
             {{"reference_collection", gauge.reference_collection},
              {"reference_period", format_date(grid.date_of(gauge.reference_period))},
              {"pinned", gauge.pinned}}},
            {"grid", {{"epoch", format_date(grid.epoch)}, {"T", grid.last_period}}},
            {"log_scale", log_scale},
            {"alpha", alpha_j},
            {"beta", {{"min", beta_min}, {"avg", beta_avg}, {"max", beta_max}}},
            {"gamma", gamma_j},
            {"sigma", sigma}};
}

HedonicParams HedonicParams::from_json(const json& j) {
    try {
        const json& params = j.contains("params") ? j.at("params") : j;
        HedonicParams p;
        p.grid.epoch = parse_date(params.at("grid").at("epoch").get<std::string>());
        p.grid.last_period = params.at("grid").at("T").get<std::int64_t>();
        p.log_scale = params.at("log_scale").get<double>();
        for (const auto& [id, v] : params.at("alpha").items()) p.alpha[id] = v.get<double>();
        p.beta_min = params.at("beta").at("min").get<double>();
        p.beta_avg = params.at("beta").at("avg").get<double>();
        p.beta_max = params.at("beta").at("max").get<double>();
        for (const auto& [date, v] : params.at("gamma").items()) {
            p.gamma[(parse_date(date) - p.grid.epoch).count()] = v.get<double>();
        }
        p.sigma = params.at("sigma").get<double>();
        const auto& g = params.at("gauge");
        p.gauge.reference_collection = g.at("reference_collection").get<std::string>();
        p.gauge.reference_period = (parse_date(g.at("reference_period").get<std::string>()) - p.grid.epoch).count();
        p.gauge.pinned = g.value("pinned", std::vector<std::string>{});
        if (!(p.sigma > 0.0)) throw ValidationError("model sigma must be > 0");
        return p;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model JSON: ") + e.what());
    }
}

json FitDiagnostics::to_json() const {
    return {{"iterations", iterations},
            {"converged", converged},
            {"last_step", last_step},
            {"residual_median", residual_median},
            {"residual_mad", residual_mad},
            {"rows_used", rows_used},
            {"rows_dropped", {{"min_sales_per_collection", dropped_collection_rows},
                              {"min_sales_per_period", dropped_period_rows}}},
            {"condition_number", std::isfinite(condition_number) ? json(condition_number) : json(nullptr)},
            {"warnings", warnings}};
}

double structural_log_price(const HedonicParams& params, const std::string& collection,
                            const TraitFrequencyAggregate& freq) {
    const auto a = params.alpha.find(collection);
    if (a == params.alpha.end()) throw ValidationError("collection '" + collection + "' has no fitted coefficient");
    return params.log_scale + a->second + params.beta_min * freq.f_min + params.beta_avg * freq.f_avg +
           params.beta_max * freq.f_max;
}

double predict_log_price(const HedonicParams& params, const std::string& collection,
                         const TraitFrequencyAggregate& freq, std::int64_t period) {
    const auto g = params.gamma.find(period);
    if (g == params.gamma.end()) {
        throw ValidationError("period " + format_date(params.grid.date_of(period)) + " has no fitted coefficient");
    }
    return structural_log_price(params, collection, freq) + g->second;
}

json model_to_json(const FitResult& result, const FitConfig& config) {
    return {{"params", result.params.to_json()},
            {"diagnostics", result.diagnostics.to_json()},
            {"config", config.to_json()}};
}

}  // namespace nftidx
