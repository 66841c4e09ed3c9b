#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "commands.hpp"
#include "nftindex/bubble.hpp"
#include "nftindex/errors.hpp"
#include "nftindex/hedonic.hpp"
#include "nftindex/market_data.hpp"
#include "nftindex/mispricing.hpp"
#include "nftindex/price_index.hpp"
#include "nftindex/synthetic.hpp"

namespace py = pybind11;
using namespace nftidx;
using nlohmann::json;

namespace {

HedonicParams params_of(const std::string& model_json) { return HedonicParams::from_json(json::parse(model_json)); }

FileFormat format_of(const std::string& format, const std::string& sales) {
    return format.empty() ? format_from_extension(sales) : parse_file_format(format);
}

std::string fit_files(const std::string& assets, const std::string& sales, const std::string& format,
                      double huber_delta, int max_iterations, double tolerance, unsigned threads) {
    FitConfig cfg;
    cfg.huber_delta = huber_delta;
    cfg.max_iterations = max_iterations;
    cfg.coef_tolerance = tolerance;
    cfg.threads = threads;
    cfg.validate();
    const MarketData data = ingest(assets, sales, format_of(format, sales));
    const PeriodGrid grid = PeriodGrid::covering(data.sales);
    const Design design =
        build_design(data.sales, assign_periods(data.sales, grid), compute_frequencies(data), grid, cfg);
    py::gil_scoped_release release;
    return model_to_json(fit(design, cfg), cfg).dump();
}

py::dict index_of(const std::string& model_json, double base_value) {
    const IndexSeries idx = build_index(params_of(model_json), base_value);
    std::vector<std::string> dates;
    for (std::size_t i = 0; i < idx.levels.size(); ++i) dates.push_back(format_date(idx.date_at(i)));
    py::dict d;
    d["dates"] = dates;
    d["levels"] = idx.levels;
    d["gaps"] = idx.gaps;
    d["returns"] = returns(idx).values;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hedonic NFT price index, bubble dating and mispricing";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("run_cli", &cli::run, py::arg("argv"), "Runs the command-line tool; returns its exit code.");

    m.def(
        "ingest_report",
        [](const std::string& assets, const std::string& sales, const std::string& format) {
            return ingest(assets, sales, format_of(format, sales)).report.to_json().dump();
        },
        py::arg("assets"), py::arg("sales"), py::arg("format") = "");

    m.def("fit_files", &fit_files, py::arg("assets"), py::arg("sales"), py::arg("format") = "",
          py::arg("huber_delta") = 1.345, py::arg("max_iterations") = 200, py::arg("tolerance") = 1e-8,
          py::arg("threads") = 1u);

    m.def("build_index", &index_of, py::arg("model_json"), py::arg("base_value") = 100.0);

    m.def(
        "moving_average", [](const std::vector<double>& v, std::size_t w) { return moving_average(v, w); },
        py::arg("values"), py::arg("window") = 7);

    m.def(
        "adf_statistic",
        [](const std::vector<double>& y, std::size_t first, std::size_t last, int lag_order) {
            return adf_statistic(y, first, last, {lag_order});
        },
        py::arg("y"), py::arg("first"), py::arg("last"), py::arg("lag_order") = 1);

    m.def(
        "bsadf",
        [](const std::vector<double>& y, std::size_t t, std::size_t w, int lag_order) {
            return bsadf(y, t, w, {lag_order}).value;
        },
        py::arg("y"), py::arg("t"), py::arg("min_window"), py::arg("lag_order") = 1);

    m.def(
        "bsadf_signal",
        [](const std::vector<double>& y, std::size_t w, int lag_order) { return bsadf_signal(y, w, {lag_order}); },
        py::arg("y"), py::arg("min_window"), py::arg("lag_order") = 1);

    m.def(
        "critical_values",
        [](std::size_t horizon, std::size_t w, const std::vector<double>& conf, int n_paths, std::uint64_t seed,
           double eta, double sigma, double drift, int lag_order, unsigned threads) {
            py::gil_scoped_release release;
            return critical_values(horizon, w, conf, n_paths, seed, {eta, sigma, drift}, {lag_order}, threads)
                .to_json()
                .dump();
        },
        py::arg("horizon"), py::arg("min_window"), py::arg("confidences") = std::vector<double>{0.9, 0.95, 0.99},
        py::arg("n_paths") = 5000, py::arg("seed") = 20220117, py::arg("eta") = 1.0, py::arg("sigma") = 1.0,
        py::arg("drift") = 1.0, py::arg("lag_order") = 1, py::arg("threads") = 1u);

    m.def(
        "detect_bubbles",
        [](const std::vector<std::optional<double>>& signal, const std::vector<double>& critical,
           std::size_t first_period, std::size_t min_duration) {
            std::vector<std::pair<std::size_t, std::optional<std::size_t>>> out;
            for (const auto& e : detect_bubbles(signal, critical, first_period, min_duration)) {
                out.emplace_back(e.start, e.end);
            }
            return out;
        },
        py::arg("signal"), py::arg("critical"), py::arg("first_period"), py::arg("min_duration") = 5);

    m.def("undersold_probability", &undersold_probability, py::arg("log_price"), py::arg("fair_log_price"),
          py::arg("sigma"));

    m.def(
        "assess",
        [](const std::string& model_json, const std::string& collection, std::array<double, 3> f,
           std::int64_t period, double price) {
            const auto a = assess(params_of(model_json), collection, "", {f[0], f[1], f[2]}, period, price);
            py::dict d;
            d["fair_log_price"] = a.fair_log_price;
            d["p_under"] = a.p_under;
            d["p_over"] = a.p_over;
            d["gamma_source"] = to_string(a.gamma_source);
            return d;
        },
        py::arg("model_json"), py::arg("collection"), py::arg("freq"), py::arg("period"), py::arg("price"));

    m.def(
        "simulate",
        [](const std::string& spec_json, const std::string& out_dir) {
            const auto spec = GeneratorSpec::from_json(json::parse(spec_json));
            const auto market = generate(spec);
            write_market(market, spec, out_dir);
            return market.truth.to_json().dump();
        },
        py::arg("spec_json"), py::arg("out_dir"));
}
