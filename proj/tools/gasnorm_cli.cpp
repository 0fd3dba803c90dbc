// gasnorm command-line front end. Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gasnorm/gasnorm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gasnorm;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string output_dir = ".";
    std::string dist;
    double nu = 100.0;
    double gamma = 0.1;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* dist_opt = nullptr;
    CLI::Option* nu_opt = nullptr;
    CLI::Option* gamma_opt = nullptr;

    bool has_seed() const { return seed_opt->count() > 0; }
    bool has_dist() const { return dist_opt->count() > 0; }
    bool has_nu() const { return nu_opt->count() > 0; }
    bool has_gamma() const { return gamma_opt->count() > 0; }
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

json config_json(const Globals& g) { return g.config.empty() ? json::object() : read_json(g.config); }

fs::path output_path(const Globals& g, const std::string& name) {
    std::error_code ec;
    fs::create_directories(g.output_dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + g.output_dir + "': " + ec.message());
    return fs::path(g.output_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_frame(const fs::path& path, const Matrix& values, const std::vector<std::string>& names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    write_csv(out, values, names);
}

FitConfig fit_config(const Globals& g, const json& cfg) {
    FitConfig fc;
    if (cfg.contains("fit")) {
        const auto& f = cfg.at("fit");
        fc.gamma = f.value("gamma", fc.gamma);
        fc.family = family_from_string(f.value("family", to_string(fc.family)));
        fc.nu = f.value("nu", fc.nu);
        fc.max_iters = f.value("max_iters", fc.max_iters);
        fc.restarts = f.value("restarts", fc.restarts);
        fc.fit_nu = f.value("fit_nu", fc.fit_nu);
        fc.seed = f.value("seed", fc.seed);
    }
    if (g.has_gamma()) fc.gamma = g.gamma;
    if (g.has_dist()) fc.family = family_from_string(g.dist);
    if (g.has_nu()) fc.nu = g.nu;
    if (g.has_seed()) fc.seed = g.seed;
    return fc;
}

/// Fits every feature on the first `n_train` rows; errors propagate with their type.
std::map<std::string, FitResult> fit_features(const SeriesFrame& frame, std::size_t n_train, const FitConfig& fc) {
    const auto train = frame.slice(0, n_train);
    std::map<std::string, FitResult> out;
    for (std::size_t c = 0; c < frame.features(); ++c) out.emplace(frame.feature_names()[c], fit(train.feature(c), fc));
    return out;
}

std::size_t train_rows(std::size_t length, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("train fraction must be in (0, 1]");
    return split_lengths(length, fraction, 0.0)[0];
}

std::vector<GasParams> ordered_params(const std::map<std::string, GasParams>& params, const SeriesFrame& frame) {
    std::vector<GasParams> out;
    for (const auto& name : frame.feature_names()) {
        const auto it = params.find(name);
        if (it == params.end()) throw ConfigError("no GAS parameters for feature '" + name + "'");
        out.push_back(it->second);
    }
    return out;
}

/// Per-window normalizer over the whole series, as used by the experiment harness.
std::unique_ptr<detail::WindowNormalizer> window_normalizer(NormalizerKind kind, const SeriesFrame& frame,
                                                            std::size_t n_train,
                                                            const std::map<std::string, GasParams>& params) {
    switch (kind) {
    case NormalizerKind::GasNorm: return std::make_unique<detail::GasWindows>(frame, ordered_params(params, frame));
    case NormalizerKind::GlobalNorm: {
        std::vector<Moments> stats;
        for (std::size_t c = 0; c < frame.features(); ++c) stats.push_back(training_moments(frame.slice(0, n_train).feature(c)));
        return std::make_unique<detail::GlobalWindows>(std::move(stats));
    }
    case NormalizerKind::LocalNorm: return std::make_unique<detail::LocalWindows>();
    case NormalizerKind::MeanScaling: return std::make_unique<detail::MeanScaleWindows>();
    }
    throw ConfigError("unknown normalizer");
}

std::map<std::string, GasParams> load_or_fit_params(const Globals& g, const json& cfg, const std::string& params_path,
                                                    const SeriesFrame& frame, std::size_t n_train) {
    if (!params_path.empty()) return params_from_json(read_json(params_path));
    std::map<std::string, GasParams> out;
    for (auto& [name, r] : fit_features(frame, n_train, fit_config(g, cfg))) out.emplace(name, r.params);
    return out;
}

// ---- subcommands -------------------------------------------------------------

struct GenArgs {
    std::string kind;
    std::string name;
    std::optional<std::size_t> length, steps, record_every, season_period;
    std::optional<double> dt, noise_std, trend_slope, season_amplitude;
    std::vector<double> ar_coeffs;
    double quadratic_coeff = 0.0;
    std::optional<std::size_t> outlier_at;
    std::size_t outlier_feature = 0;
    double outlier_sigmas = 10.0;
};

int run_gen(const Globals& g, const GenArgs& a) {
    auto cfg = config_json(g);
    if (cfg.contains("dataset")) cfg = cfg.at("dataset");
    const std::string kind = !a.kind.empty() ? a.kind : cfg.value("kind", std::string("ar"));
    SeriesFrame frame;
    json sidecar;
    if (kind == "ar") {
        auto spec = cfg.get<ArSpec>();
        if (a.length) spec.length = *a.length;
        if (!a.ar_coeffs.empty()) spec.ar_coeffs = a.ar_coeffs;
        if (a.noise_std) spec.noise_std = *a.noise_std;
        if (a.trend_slope) spec.trend_slope = *a.trend_slope;
        if (a.season_amplitude) spec.season_amplitude = *a.season_amplitude;
        if (a.season_period) spec.season_period = *a.season_period;
        if (g.has_seed()) spec.seed = g.seed;
        frame = gen_ar(spec);
        sidecar = spec;
    } else if (kind == "lorenz") {
        auto spec = cfg.get<LorenzSpec>();
        if (a.steps) spec.steps = *a.steps;
        if (a.dt) spec.dt = *a.dt;
        if (a.record_every) spec.record_every = *a.record_every;
        if (a.noise_std) spec.noise_std = *a.noise_std;
        if (g.has_seed()) spec.seed = g.seed;
        frame = gen_lorenz(spec);
        sidecar = spec;
    } else {
        throw ConfigError("unknown generator '" + kind + "' (expected ar or lorenz)");
    }
    if (a.quadratic_coeff != 0.0) {
        frame = add_quadratic_trend(frame, a.quadratic_coeff);
        sidecar["quadratic_coeff"] = a.quadratic_coeff;
    }
    if (a.outlier_at) {
        frame = inject_outlier(frame, *a.outlier_at, a.outlier_feature, a.outlier_sigmas);
        sidecar["outlier"] = {{"t", *a.outlier_at}, {"feature", a.outlier_feature}, {"sigmas", a.outlier_sigmas}};
    }
    const std::string stem = a.name.empty() ? kind : a.name;
    const auto csv = output_path(g, stem + ".csv");
    write_csv(csv.string(), frame);
    write_json(output_path(g, stem + ".json"), sidecar);
    std::cout << "wrote " << csv.string() << " (" << frame.length() << " rows, " << frame.features() << " features)\n";
    return 0;
}

struct FitArgs {
    std::string input;
    bool no_header = false;
    double train_fraction = 0.6;
    std::optional<std::size_t> max_iters, restarts;
    bool fit_nu = false;
    std::string out = "params.json";
};

int run_fit(const Globals& g, const FitArgs& a) {
    const auto cfg = config_json(g);
    auto fc = fit_config(g, cfg);
    if (a.max_iters) fc.max_iters = *a.max_iters;
    if (a.restarts) fc.restarts = *a.restarts;
    if (a.fit_nu) fc.fit_nu = true;
    const auto frame = load_csv(a.input, !a.no_header);
    FrameFit fits;
    fits.results = fit_features(frame, train_rows(frame.length(), a.train_fraction), fc);
    const auto path = output_path(g, a.out);
    write_json(path, to_json(fits));
    for (const auto& [name, r] : fits.results) {
        std::cout << name << ": objective " << r.objective << " (initial " << r.initial_objective << ")"
                  << (r.degenerate ? " degenerate" : "") << "\n";
    }
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

struct NormalizeArgs {
    std::string input;
    bool no_header = false;
    std::string method = "gas_norm";
    std::string params;
    double train_fraction = 0.6;
    std::size_t start = 0;
    std::optional<std::size_t> context_length;
    std::size_t horizon = 1;
    std::string stem = "normalized";
};

int run_normalize(const Globals& g, const NormalizeArgs& a) {
    const auto cfg = config_json(g);
    const auto frame = load_csv(a.input, !a.no_header);
    const auto kind = normalizer_from_string(a.method);
    const auto n_train = train_rows(frame.length(), a.train_fraction);
    if (a.start >= frame.length()) throw ArgumentError("--start is past the end of the series");
    const auto l = a.context_length.value_or(frame.length() - a.start);
    if (l == 0 || a.start + l > frame.length()) throw ArgumentError("context window exceeds the series");

    std::map<std::string, GasParams> params;
    if (kind == NormalizerKind::GasNorm) params = load_or_fit_params(g, cfg, a.params, frame, n_train);
    const auto norm = window_normalizer(kind, frame, n_train, params);
    const auto batch = (*norm)(a.start, frame.values().slice_rows(a.start, l), a.horizon);

    json parameters = json::object();
    for (const auto& [name, p] : params) parameters[name] = p;
    parameters["start"] = a.start;
    write_frame(output_path(g, a.stem + ".csv"), batch.normalized_context, frame.feature_names());
    {
        std::ofstream out(output_path(g, a.stem + "_stats.csv"), std::ios::binary);
        write_stats_csv(out, batch, frame.feature_names());
    }
    write_json(output_path(g, a.stem + "_batch.json"), batch_to_json(batch, frame.feature_names(), parameters));
    std::cout << "normalized " << l << " rows with " << to_string(kind) << " into " << g.output_dir << "\n";
    return 0;
}

struct TrainArgs {
    std::string input;
    bool no_header = false;
    std::string method = "gas_norm";
    std::string params;
    std::size_t context_length = 25;
    std::size_t horizon = 1;
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    std::size_t stride = 1;
    std::optional<std::size_t> epochs, batch_size, patience;
    std::optional<double> lr;
    std::vector<std::size_t> widths;
    std::string activation;
    std::string out = "model.json";
};

int run_train(const Globals& g, const TrainArgs& a) {
    const auto cfg = config_json(g);
    auto spec = cfg.contains("forecaster") ? cfg.at("forecaster").get<MlpSpec>() : MlpSpec{};
    if (a.epochs) spec.epochs = *a.epochs;
    if (a.batch_size) spec.batch_size = *a.batch_size;
    if (a.patience) spec.patience = *a.patience;
    if (a.lr) spec.learning_rate = *a.lr;
    if (!a.widths.empty()) spec.layer_widths = a.widths;
    if (!a.activation.empty()) spec.activation = activation_from_string(a.activation);
    if (g.has_seed()) spec.seed = g.seed;
    spec.validate();

    const auto frame = load_csv(a.input, !a.no_header);
    const SplitSpec split_spec{a.train_fraction, a.val_fraction, a.context_length, a.horizon};
    split_spec.validate();
    const auto [n_train, n_val, n_test] = split_lengths(frame.length(), a.train_fraction, a.val_fraction);
    (void)n_test;
    const auto kind = normalizer_from_string(a.method);
    std::map<std::string, GasParams> params;
    if (kind == NormalizerKind::GasNorm) params = load_or_fit_params(g, cfg, a.params, frame, n_train);
    const auto norm = window_normalizer(kind, frame, n_train, params);

    const auto l = a.context_length, h = a.horizon;
    const auto train_w = detail::prepare(frame, detail::window_starts(0, n_train, l, h, a.stride), l, h, *norm);
    const auto val_w = detail::prepare(frame, detail::window_starts(n_train, n_train + n_val, l, h, h), l, h, *norm);
    if (train_w.samples.empty()) throw ArgumentError("training segment is too short for the window");
    const auto model = train(spec, train_w.samples, val_w.samples);

    json out = model;
    out["normalizer"] = to_string(kind);
    out["feature_names"] = frame.feature_names();
    const auto path = output_path(g, a.out);
    write_json(path, out);
    std::cout << "trained on " << train_w.samples.size() << " windows, final train MSE "
              << model.train_loss_curve.back();
    if (!val_w.samples.empty()) std::cout << ", validation MSE " << evaluate_mse(model, val_w.samples);
    std::cout << "\nwrote " << path.string() << "\n";
    return 0;
}

struct ForecastArgs {
    std::string batch;
    std::string model;
    std::string residual;
    bool no_header = false;
    std::string out = "forecast.csv";
};

int run_forecast(const Globals& g, const ForecastArgs& a) {
    if (a.model.empty() == a.residual.empty()) throw ArgumentError("give exactly one of --model or --residual");
    const auto bj = read_json(a.batch);
    const auto batch = batch_from_json(bj);
    const auto names = bj.at("feature_names").get<std::vector<std::string>>();
    Matrix residual;
    if (!a.model.empty()) {
        const auto model = read_json(a.model).get<TrainedModel>();
        residual = predict(model, batch.normalized_context);
    } else {
        residual = load_csv(a.residual, !a.no_header).values();
    }
    const auto y = denormalize(residual, batch);
    const auto path = output_path(g, a.out);
    write_frame(path, y, names);
    std::cout << "wrote " << path.string() << " (" << y.rows() << " steps)\n";
    return 0;
}

struct EvalArgs {
    std::string actual, forecast, train;
    bool no_header = false;
    std::size_t m = 1;
    std::string out = "mase.json";
};

int run_eval(const Globals& g, const EvalArgs& a) {
    const auto actual = load_csv(a.actual, !a.no_header);
    const auto forecast = load_csv(a.forecast, !a.no_header);
    const auto train = load_csv(a.train, !a.no_header);
    const auto values = mase(actual.values(), forecast.values(), train.values(), a.m);
    json j = json::object();
    for (std::size_t c = 0; c < values.size(); ++c) {
        j[actual.feature_names()[c]] = values[c];
        std::cout << actual.feature_names()[c] << "," << values[c] << "\n";
    }
    write_json(output_path(g, a.out), j);
    return 0;
}

int run_experiment_cmd(const Globals& g, const std::string& positional) {
    const std::string path = !positional.empty() ? positional : g.config;
    if (path.empty()) throw ConfigError("experiment needs a config file (--config or positional path)");
    auto spec = read_json(path).get<ExperimentSpec>();
    if (g.has_seed()) spec.seeds = {g.seed};
    if (g.has_gamma()) spec.gammas = {g.gamma};
    for (auto& n : spec.normalizers) {
        if (n.kind != NormalizerKind::GasNorm) continue;
        if (g.has_dist()) n.family = family_from_string(g.dist);
        if (g.has_nu()) n.nu = g.nu;
    }
    spec.validate();
    const auto report = run_experiment(spec);
    const auto paths = emit_report(report, g.output_dir, spec.name);
    write_report_csv(std::cout, report);
    for (const auto& e : report.errors) std::cerr << "cell failed: " << e << "\n";
    for (const auto& p : paths) std::cout << "wrote " << p.string() << "\n";
    if (report.rows.empty()) throw NumericalError("no experiment cell completed");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score-driven normalization for time-series forecasting"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    g.seed_opt = app.add_option("--seed", g.seed, "Random seed (overrides config)");
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--output-dir", g.output_dir, "Directory for output files")->capture_default_str();
    g.dist_opt = app.add_option("--dist", g.dist, "Filter distribution")->check(CLI::IsMember({"gaussian", "student_t"}));
    g.nu_opt = app.add_option("--nu", g.nu, "Student's t degrees of freedom");
    g.gamma_opt = app.add_option("--gamma", g.gamma, "Normalization strength in [0, 1)");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset (ar or lorenz)");
    gen_cmd->add_option("kind", gen.kind, "ar or lorenz")->check(CLI::IsMember({"ar", "lorenz"}));
    gen_cmd->add_option("--name", gen.name, "Output file stem (default: the generator kind)");
    gen_cmd->add_option("--length", gen.length, "AR series length");
    gen_cmd->add_option("--ar-coeffs", gen.ar_coeffs, "AR coefficients");
    gen_cmd->add_option("--noise-std", gen.noise_std, "Noise std (Lorenz: fraction of clean std)");
    gen_cmd->add_option("--trend-slope", gen.trend_slope, "AR linear trend slope");
    gen_cmd->add_option("--season-amplitude", gen.season_amplitude, "AR season amplitude");
    gen_cmd->add_option("--season-period", gen.season_period, "AR season period");
    gen_cmd->add_option("--steps", gen.steps, "Lorenz integration steps");
    gen_cmd->add_option("--dt", gen.dt, "Lorenz step size");
    gen_cmd->add_option("--record-every", gen.record_every, "Keep every k-th Lorenz state");
    gen_cmd->add_option("--quadratic-coeff", gen.quadratic_coeff, "Add coeff * t^2 to every feature");
    gen_cmd->add_option("--outlier-at", gen.outlier_at, "Row index of an injected outlier");
    gen_cmd->add_option("--outlier-feature", gen.outlier_feature, "Feature index of the outlier");
    gen_cmd->add_option("--outlier-sigmas", gen.outlier_sigmas, "Outlier magnitude in standard deviations");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Fit per-feature filter parameters on the training segment");
    fit_cmd->add_option("--input,-i", fit_args.input, "Input CSV")->required();
    fit_cmd->add_flag("--no-header", fit_args.no_header, "CSV has no header row");
    fit_cmd->add_option("--train-fraction", fit_args.train_fraction, "Leading fraction used for fitting")->capture_default_str();
    fit_cmd->add_option("--max-iters", fit_args.max_iters, "Simplex iterations per restart");
    fit_cmd->add_option("--restarts", fit_args.restarts, "Number of optimizer starts");
    fit_cmd->add_flag("--fit-nu", fit_args.fit_nu, "Also fit the degrees of freedom");
    fit_cmd->add_option("--out", fit_args.out, "Output file name")->capture_default_str();

    NormalizeArgs norm;
    auto* norm_cmd = app.add_subcommand("normalize", "Normalize a context window and emit horizon statistics");
    norm_cmd->add_option("--input,-i", norm.input, "Input CSV")->required();
    norm_cmd->add_flag("--no-header", norm.no_header, "CSV has no header row");
    norm_cmd->add_option("--method", norm.method, "gas_norm, global_norm, local_norm or mean_scaling")->capture_default_str();
    norm_cmd->add_option("--params", norm.params, "Fitted parameter JSON (gas_norm; fitted on the fly when absent)");
    norm_cmd->add_option("--train-fraction", norm.train_fraction, "Training fraction for fitted statistics")->capture_default_str();
    norm_cmd->add_option("--start", norm.start, "First row of the context window")->capture_default_str();
    norm_cmd->add_option("--context-length", norm.context_length, "Context rows (default: to the end)");
    norm_cmd->add_option("--horizon", norm.horizon, "Forecast horizon for the statistics")->capture_default_str();
    norm_cmd->add_option("--stem", norm.stem, "Output file stem")->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the residual forecaster on normalized windows");
    train_cmd->add_option("--input,-i", tr.input, "Input CSV")->required();
    train_cmd->add_flag("--no-header", tr.no_header, "CSV has no header row");
    train_cmd->add_option("--method", tr.method, "Normalizer")->capture_default_str();
    train_cmd->add_option("--params", tr.params, "Fitted parameter JSON (gas_norm)");
    train_cmd->add_option("--context-length", tr.context_length, "Context rows")->capture_default_str();
    train_cmd->add_option("--horizon", tr.horizon, "Forecast horizon")->capture_default_str();
    train_cmd->add_option("--train-fraction", tr.train_fraction)->capture_default_str();
    train_cmd->add_option("--val-fraction", tr.val_fraction)->capture_default_str();
    train_cmd->add_option("--stride", tr.stride, "Stride between training windows")->capture_default_str();
    train_cmd->add_option("--epochs", tr.epochs);
    train_cmd->add_option("--batch-size", tr.batch_size);
    train_cmd->add_option("--patience", tr.patience);
    train_cmd->add_option("--lr", tr.lr, "Learning rate");
    train_cmd->add_option("--widths", tr.widths, "Hidden layer widths");
    train_cmd->add_option("--activation", tr.activation, "relu or identity");
    train_cmd->add_option("--out", tr.out, "Output file name")->capture_default_str();

    ForecastArgs fc;
    auto* forecast_cmd = app.add_subcommand("forecast", "Denormalize a residual forecast into a forecast CSV");
    forecast_cmd->add_option("--batch", fc.batch, "Batch JSON written by normalize")->required();
    forecast_cmd->add_option("--model", fc.model, "Model JSON written by train");
    forecast_cmd->add_option("--residual", fc.residual, "Residual forecast CSV (horizon x features)");
    forecast_cmd->add_flag("--no-header", fc.no_header, "Residual CSV has no header row");
    forecast_cmd->add_option("--out", fc.out, "Output file name")->capture_default_str();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "MASE of a forecast CSV against actual values");
    eval_cmd->add_option("--actual", ev.actual)->required();
    eval_cmd->add_option("--forecast", ev.forecast)->required();
    eval_cmd->add_option("--train", ev.train, "Training segment for the MASE denominator")->required();
    eval_cmd->add_flag("--no-header", ev.no_header, "CSVs have no header row");
    eval_cmd->add_option("--m", ev.m, "Seasonality of the naive benchmark")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Output file name")->capture_default_str();

    std::string experiment_path;
    auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment config and write report files");
    exp_cmd->add_option("config_path", experiment_path, "Experiment JSON (alternative to --config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen_cmd) return run_gen(g, gen);
        if (*fit_cmd) return run_fit(g, fit_args);
        if (*norm_cmd) return run_normalize(g, norm);
        if (*train_cmd) return run_train(g, tr);
        if (*forecast_cmd) return run_forecast(g, fc);
        if (*eval_cmd) return run_eval(g, ev);
        if (*exp_cmd) return run_experiment_cmd(g, experiment_path);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
