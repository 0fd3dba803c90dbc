#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gasnorm/datagen.hpp"
#include "gasnorm/errors.hpp"
#include "gasnorm/forecaster.hpp"
#include "gasnorm/gas_filter.hpp"
#include "gasnorm/normalization.hpp"
#include "gasnorm/param_fit.hpp"
#include "gasnorm/timeseries.hpp"

namespace gasnorm {

/// In-sample mean absolute seasonal-naive error per feature: mean |x_t - x_{t-m}|.
inline std::vector<double> naive_scale(const Matrix& train, std::size_t m) {
    if (m == 0) throw ArgumentError("MASE seasonality must be positive");
    if (train.rows() <= m) throw ArgumentError("training series must be longer than the MASE seasonality");
    std::vector<double> out(train.cols(), 0.0);
    for (std::size_t c = 0; c < train.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t t = m; t < train.rows(); ++t) sum += std::abs(train(t, c) - train(t - m, c));
        out[c] = sum / static_cast<double>(train.rows() - m);
        if (!(out[c] > 0.0)) {
            throw MetricError("MASE denominator is zero for feature " + std::to_string(c));
        }
    }
    return out;
}

/// Mean absolute scaled error per feature, scaled by the training seasonal-naive error.
inline std::vector<double> mase(const Matrix& actual, const Matrix& forecast, const Matrix& train, std::size_t m) {
    if (actual.rows() != forecast.rows() || actual.cols() != forecast.cols()) {
        throw ArgumentError("actual and forecast shapes differ");
    }
    if (actual.rows() == 0) throw ArgumentError("no forecast values to score");
    if (train.cols() != actual.cols()) throw ArgumentError("training feature count differs from the forecast");
    const auto scale = naive_scale(train, m);
    std::vector<double> out(actual.cols(), 0.0);
    for (std::size_t c = 0; c < actual.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t t = 0; t < actual.rows(); ++t) sum += std::abs(actual(t, c) - forecast(t, c));
        out[c] = sum / static_cast<double>(actual.rows()) / scale[c];
    }
    return out;
}

/// argmin of validation MASE; ties go to the smaller gamma.
inline double select_gamma(const std::map<double, double>& validation_mase) {
    if (validation_mase.empty()) throw ArgumentError("no gamma candidates");
    auto best = validation_mase.begin();
    for (auto it = validation_mase.begin(); it != validation_mase.end(); ++it) {
        if (it->second < best->second) best = it;
    }
    return best->first;
}

struct CsvSource {
    std::string path;
    bool has_header = true;
    std::size_t difference_order = 0;
};

using DatasetSource = std::variant<ArSpec, LorenzSpec, CsvSource>;

/// One normalizer arm of an experiment. `family` and `nu` apply to gas_norm only.
struct NormalizerEntry {
    NormalizerKind kind = NormalizerKind::GasNorm;
    Family family = Family::StudentT;
    double nu = 100.0;

    [[nodiscard]] std::string label() const {
        if (kind != NormalizerKind::GasNorm) return to_string(kind);
        if (family == Family::Gaussian) return "gas_norm(gaussian)";
        std::ostringstream os;
        os << "gas_norm(" << nu << ")";
        return os.str();
    }
};

struct ExperimentSpec {
    std::string name = "dataset";
    DatasetSource dataset = ArSpec{};
    std::vector<NormalizerEntry> normalizers;
    MlpSpec forecaster;
    SplitSpec split;
    std::vector<double> gammas{0.0, 0.001, 0.01, 0.1, 0.5};
    std::vector<std::uint64_t> seeds{0};
    std::size_t mase_seasonality = 1;
    /// Stride between validation/test windows; 0 means the horizon (non-overlapping targets).
    std::size_t eval_stride = 0;
    std::size_t train_stride = 1;
    std::size_t fit_max_iters = 400;
    std::size_t fit_restarts = 3;

    void validate() const {
        if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
        if (normalizers.empty()) throw ConfigError("experiment needs at least one normalizer");
        if (gammas.empty()) throw ConfigError("experiment needs at least one gamma");
        for (double g : gammas) {
            if (!(g >= 0.0 && g < 1.0)) throw ConfigError("gammas must lie in [0, 1)");
        }
        if (mase_seasonality == 0) throw ConfigError("mase_seasonality must be positive");
        if (train_stride == 0) throw ConfigError("train_stride must be positive");
        split.validate();
        forecaster.validate();
    }
};

struct ReportRow {
    std::string dataset;
    std::string normalizer;
    double gamma = 0.0;
    double mase_mean = 0.0;
    double mase_stderr = 0.0;
    std::size_t n_seeds = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> per_seed;
    /// Mean validation MASE for each gamma tried (gas_norm) or the single setting.
    std::map<double, double> validation_mase;

    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct EvalReport {
    std::vector<ReportRow> rows;
    std::vector<std::string> errors;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Mean and standard error (sample std / sqrt(n); 0 for a single value).
inline std::pair<double, double> mean_stderr(const std::vector<double>& values) {
    if (values.empty()) throw ArgumentError("no values to aggregate");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(values.size()))};
}

inline SeriesFrame load_dataset(const DatasetSource& source) {
    return std::visit(
        [](const auto& s) -> SeriesFrame {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ArSpec>) {
                return gen_ar(s);
            } else if constexpr (std::is_same_v<T, LorenzSpec>) {
                return gen_lorenz(s);
            } else {
                auto frame = load_csv(s.path, s.has_header);
                return s.difference_order > 0 ? difference(frame, s.difference_order) : frame;
            }
        },
        source);
}

namespace detail {

/// Window start offsets whose targets fall entirely inside [target_begin, target_end).
inline std::vector<std::size_t> window_starts(std::size_t target_begin, std::size_t target_end, std::size_t l,
                                              std::size_t h, std::size_t stride) {
    std::vector<std::size_t> out;
    if (target_begin < l) target_begin = l;
    for (std::size_t first = target_begin; first + h <= target_end; first += stride) out.push_back(first - l);
    return out;
}

/// Normalizes every window of one arm; produces training samples and the
/// batches needed to denormalize forecasts.
class WindowNormalizer {
public:
    virtual ~WindowNormalizer() = default;
    virtual NormalizedBatch operator()(std::size_t start, const Matrix& context, std::size_t horizon) const = 0;
};

class GasWindows final : public WindowNormalizer {
public:
    GasWindows(const SeriesFrame& frame, std::vector<GasParams> params) : params_(std::move(params)) {
        for (std::size_t c = 0; c < frame.features(); ++c) traces_.push_back(filter_series(params_[c], frame.feature(c)));
    }
    NormalizedBatch operator()(std::size_t start, const Matrix& context, std::size_t horizon) const override {
        std::vector<Moments> initial;
        for (const auto& tr : traces_) initial.push_back(tr.states[start].predicted());
        return gas_normalize(context, params_, horizon, initial);
    }

private:
    std::vector<GasParams> params_;
    std::vector<FilterTrace> traces_;
};

class GlobalWindows final : public WindowNormalizer {
public:
    explicit GlobalWindows(std::vector<Moments> stats) : stats_(std::move(stats)) {}
    NormalizedBatch operator()(std::size_t, const Matrix& context, std::size_t horizon) const override {
        return global_normalize(context, horizon, stats_);
    }

private:
    std::vector<Moments> stats_;
};

class LocalWindows final : public WindowNormalizer {
public:
    NormalizedBatch operator()(std::size_t, const Matrix& context, std::size_t horizon) const override {
        return local_normalize(context, horizon);
    }
};

class MeanScaleWindows final : public WindowNormalizer {
public:
    NormalizedBatch operator()(std::size_t, const Matrix& context, std::size_t horizon) const override {
        return mean_scale(context, horizon);
    }
};

struct PreparedWindows {
    std::vector<Sample> samples;
    std::vector<NormalizedBatch> batches;
    std::vector<Matrix> actual;
};

inline PreparedWindows prepare(const SeriesFrame& frame, const std::vector<std::size_t>& starts, std::size_t l,
                               std::size_t h, const WindowNormalizer& norm) {
    PreparedWindows out;
    for (auto s : starts) {
        const auto context = frame.values().slice_rows(s, l);
        auto target = frame.values().slice_rows(s + l, h);
        auto batch = norm(s, context, h);
        out.samples.push_back({batch.normalized_context, normalize_horizon(target, batch)});
        out.batches.push_back(std::move(batch));
        out.actual.push_back(std::move(target));
    }
    return out;
}

/// Feature-averaged MASE of the model's denormalized forecasts over all windows.
inline double windows_mase(const TrainedModel& model, const PreparedWindows& w, const std::vector<double>& scale) {
    if (w.samples.empty()) throw ArgumentError("no evaluation windows");
    std::vector<double> abs_err(scale.size(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto forecast = denormalize(predict(model, w.samples[i].context), w.batches[i]);
        for (std::size_t t = 0; t < forecast.rows(); ++t) {
            for (std::size_t c = 0; c < forecast.cols(); ++c) abs_err[c] += std::abs(forecast(t, c) - w.actual[i](t, c));
        }
        count += forecast.rows();
    }
    double total = 0.0;
    for (std::size_t c = 0; c < scale.size(); ++c) total += abs_err[c] / static_cast<double>(count) / scale[c];
    const double value = total / static_cast<double>(scale.size());
    if (!std::isfinite(value)) throw NumericalError("MASE is not finite");
    return value;
}

} // namespace detail

/// Runs every (normalizer, gamma, seed) cell: fits GAS parameters on the
/// training segment (gas_norm only), trains the forecaster on normalized
/// training windows, selects gamma on mean validation MASE and reports test
/// MASE over seeds. Cell failures are recorded in `errors`.
inline EvalReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const auto frame = load_dataset(spec.dataset);
    const auto parts = split(frame, spec.split);
    const auto n_train = parts.train.length();
    const auto n_val = parts.validation.length();
    const auto l = spec.split.context_length;
    const auto h = spec.split.horizon;
    const auto eval_stride = spec.eval_stride == 0 ? h : spec.eval_stride;

    const auto train_starts = detail::window_starts(0, n_train, l, h, spec.train_stride);
    const auto val_starts = detail::window_starts(n_train, n_train + n_val, l, h, eval_stride);
    const auto test_starts = detail::window_starts(n_train + n_val, frame.length(), l, h, eval_stride);
    if (test_starts.empty()) throw ArgumentError("test segment is shorter than the horizon");
    const auto scale = naive_scale(parts.train.values(), spec.mase_seasonality);

    EvalReport report;
    for (const auto& entry : spec.normalizers) {
        const auto label = entry.label();
        const bool is_gas = entry.kind == NormalizerKind::GasNorm;
        const std::vector<double> gammas = is_gas ? spec.gammas : std::vector<double>{0.0};

        // test MASE per gamma per seed, and mean validation MASE per gamma
        std::map<double, std::vector<double>> test_by_gamma;
        std::map<double, std::vector<std::uint64_t>> seeds_by_gamma;
        std::map<double, double> val_by_gamma;

        for (double gamma : gammas) {
            try {
                std::unique_ptr<detail::WindowNormalizer> norm;
                switch (entry.kind) {
                case NormalizerKind::GasNorm: {
                    FitConfig fc;
                    fc.gamma = gamma;
                    fc.family = entry.family;
                    fc.nu = entry.nu;
                    fc.max_iters = spec.fit_max_iters;
                    fc.restarts = spec.fit_restarts;
                    std::vector<GasParams> params;
                    for (std::size_t c = 0; c < frame.features(); ++c) {
                        params.push_back(fit(parts.train.feature(c), fc).params);
                    }
                    norm = std::make_unique<detail::GasWindows>(frame, std::move(params));
                    break;
                }
                case NormalizerKind::GlobalNorm: {
                    std::vector<Moments> stats;
                    for (std::size_t c = 0; c < frame.features(); ++c) stats.push_back(training_moments(parts.train.feature(c)));
                    norm = std::make_unique<detail::GlobalWindows>(std::move(stats));
                    break;
                }
                case NormalizerKind::LocalNorm: norm = std::make_unique<detail::LocalWindows>(); break;
                case NormalizerKind::MeanScaling: norm = std::make_unique<detail::MeanScaleWindows>(); break;
                }

                const auto train_w = detail::prepare(frame, train_starts, l, h, *norm);
                const auto val_w = detail::prepare(frame, val_starts, l, h, *norm);
                const auto test_w = detail::prepare(frame, test_starts, l, h, *norm);

                std::vector<double> val_scores;
                for (auto seed : spec.seeds) {
                    try {
                        auto mlp = spec.forecaster;
                        mlp.seed = seed;
                        const auto model = train(mlp, train_w.samples, val_w.samples);
                        if (!val_w.samples.empty()) val_scores.push_back(detail::windows_mase(model, val_w, scale));
                        test_by_gamma[gamma].push_back(detail::windows_mase(model, test_w, scale));
                        seeds_by_gamma[gamma].push_back(seed);
                    } catch (const std::exception& e) {
                        report.errors.push_back(label + " gamma=" + std::to_string(gamma) + " seed=" +
                                                std::to_string(seed) + ": " + e.what());
                    }
                }
                if (!val_scores.empty()) {
                    val_by_gamma[gamma] = mean_stderr(val_scores).first;
                } else if (!test_by_gamma[gamma].empty() && val_starts.empty()) {
                    // Without a validation segment every gamma ties; the smallest wins.
                    val_by_gamma[gamma] = 0.0;
                }
            } catch (const std::exception& e) {
                report.errors.push_back(label + " gamma=" + std::to_string(gamma) + ": " + e.what());
            }
        }

        if (val_by_gamma.empty()) continue;
        const double chosen = select_gamma(val_by_gamma);
        const auto& scores = test_by_gamma[chosen];
        if (scores.empty()) continue;
        const auto [mean, se] = mean_stderr(scores);
        report.rows.push_back(
            {spec.name, label, chosen, mean, se, scores.size(), seeds_by_gamma[chosen], scores, val_by_gamma});
    }
    return report;
}

inline void to_json(nlohmann::json& j, const ReportRow& r) {
    nlohmann::json val = nlohmann::json::array();
    for (const auto& [g, v] : r.validation_mase) val.push_back({{"gamma", g}, {"mase", v}});
    j = nlohmann::json{{"dataset", r.dataset},   {"normalizer", r.normalizer},   {"gamma", r.gamma},
                       {"mase_mean", r.mase_mean}, {"mase_stderr", r.mase_stderr}, {"n_seeds", r.n_seeds},
                       {"seeds", r.seeds},       {"per_seed", r.per_seed},       {"validation_mase", val}};
}

inline void from_json(const nlohmann::json& j, ReportRow& r) {
    r.dataset = j.at("dataset").get<std::string>();
    r.normalizer = j.at("normalizer").get<std::string>();
    r.gamma = j.at("gamma").get<double>();
    r.mase_mean = j.at("mase_mean").get<double>();
    r.mase_stderr = j.at("mase_stderr").get<double>();
    r.n_seeds = j.at("n_seeds").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.per_seed = j.at("per_seed").get<std::vector<double>>();
    r.validation_mase.clear();
    for (const auto& v : j.at("validation_mase")) r.validation_mase[v.at("gamma").get<double>()] = v.at("mase").get<double>();
}

inline void to_json(nlohmann::json& j, const EvalReport& r) { j = nlohmann::json{{"rows", r.rows}, {"errors", r.errors}}; }

inline void from_json(const nlohmann::json& j, EvalReport& r) {
    try {
        r.rows = j.at("rows").get<std::vector<ReportRow>>();
        r.errors = j.value("errors", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid report JSON: ") + e.what());
    }
}

/// Summary table, one row per (dataset, normalizer) cell.
inline void write_report_csv(std::ostream& out, const EvalReport& report) {
    out << "dataset,normalizer,gamma,mase_mean,mase_stderr,n_seeds\n";
    for (const auto& r : report.rows) {
        out << r.dataset << ',' << r.normalizer << ',' << format_double(r.gamma) << ',' << format_double(r.mase_mean)
            << ',' << format_double(r.mase_stderr) << ',' << r.n_seeds << '\n';
    }
}

/// Long format, one line per seed: dataset,normalizer,gamma,seed,mase.
inline void write_report_long_csv(std::ostream& out, const EvalReport& report) {
    out << "dataset,normalizer,gamma,seed,mase\n";
    for (const auto& r : report.rows) {
        for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
            out << r.dataset << ',' << r.normalizer << ',' << format_double(r.gamma) << ',' << r.seeds[i] << ','
                << format_double(r.per_seed[i]) << '\n';
        }
    }
}

/// Writes <stem>.csv, <stem>_long.csv and <stem>.json into `dir`.
inline std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& dir,
                                                      const std::string& stem = "report") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create '" + dir.string() + "': " + ec.message());
    const std::vector<std::filesystem::path> paths{dir / (stem + ".csv"), dir / (stem + "_long.csv"),
                                                   dir / (stem + ".json")};
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw ValidationError("cannot write '" + p.string() + "'");
        return out;
    };
    {
        auto out = open(paths[0]);
        write_report_csv(out, report);
    }
    {
        auto out = open(paths[1]);
        write_report_long_csv(out, report);
    }
    {
        auto out = open(paths[2]);
        out << nlohmann::json(report).dump(2) << '\n';
    }
    return paths;
}

inline void to_json(nlohmann::json& j, const NormalizerEntry& e) {
    j = nlohmann::json{{"kind", to_string(e.kind)}, {"family", to_string(e.family)}, {"nu", e.nu}};
}

inline void from_json(const nlohmann::json& j, NormalizerEntry& e) {
    e.kind = normalizer_from_string(j.at("kind").get<std::string>());
    e.family = family_from_string(j.value("family", std::string("student_t")));
    e.nu = j.value("nu", 100.0);
}

inline void to_json(nlohmann::json& j, const SplitSpec& s) {
    j = nlohmann::json{{"train_fraction", s.train_fraction},
                       {"val_fraction", s.val_fraction},
                       {"context_length", s.context_length},
                       {"horizon", s.horizon}};
}

inline void from_json(const nlohmann::json& j, SplitSpec& s) {
    const SplitSpec d;
    s.train_fraction = j.value("train_fraction", d.train_fraction);
    s.val_fraction = j.value("val_fraction", d.val_fraction);
    s.context_length = j.value("context_length", d.context_length);
    s.horizon = j.value("horizon", d.horizon);
}

inline nlohmann::json dataset_to_json(const DatasetSource& source) {
    return std::visit(
        [](const auto& s) -> nlohmann::json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CsvSource>) {
                return {{"kind", "csv"}, {"path", s.path}, {"has_header", s.has_header},
                        {"difference_order", s.difference_order}};
            } else {
                return nlohmann::json(s);
            }
        },
        source);
}

inline DatasetSource dataset_from_json(const nlohmann::json& j) {
    const auto kind = j.value("kind", std::string("ar"));
    if (kind == "ar") return j.get<ArSpec>();
    if (kind == "lorenz") return j.get<LorenzSpec>();
    if (kind == "csv") {
        return CsvSource{j.at("path").get<std::string>(), j.value("has_header", true),
                         j.value("difference_order", std::size_t{0})};
    }
    throw ConfigError("unknown dataset kind '" + kind + "'");
}

inline void to_json(nlohmann::json& j, const ExperimentSpec& s) {
    j = nlohmann::json{{"name", s.name},
                       {"dataset", dataset_to_json(s.dataset)},
                       {"normalizers", s.normalizers},
                       {"forecaster", s.forecaster},
                       {"split", s.split},
                       {"gammas", s.gammas},
                       {"seeds", s.seeds},
                       {"mase_seasonality", s.mase_seasonality},
                       {"eval_stride", s.eval_stride},
                       {"train_stride", s.train_stride},
                       {"fit_max_iters", s.fit_max_iters},
                       {"fit_restarts", s.fit_restarts}};
}

inline void from_json(const nlohmann::json& j, ExperimentSpec& s) {
    const ExperimentSpec d;
    try {
        s.name = j.value("name", d.name);
        s.dataset = j.contains("dataset") ? dataset_from_json(j.at("dataset")) : d.dataset;
        s.normalizers = j.at("normalizers").get<std::vector<NormalizerEntry>>();
        s.forecaster = j.contains("forecaster") ? j.at("forecaster").get<MlpSpec>() : d.forecaster;
        s.split = j.contains("split") ? j.at("split").get<SplitSpec>() : d.split;
        s.gammas = j.value("gammas", d.gammas);
        s.seeds = j.value("seeds", d.seeds);
        s.mase_seasonality = j.value("mase_seasonality", d.mase_seasonality);
        s.eval_stride = j.value("eval_stride", d.eval_stride);
        s.train_stride = j.value("train_stride", d.train_stride);
        s.fit_max_iters = j.value("fit_max_iters", d.fit_max_iters);
        s.fit_restarts = j.value("fit_restarts", d.fit_restarts);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid experiment JSON: ") + e.what());
    }
    s.validate();
}

} // namespace gasnorm
