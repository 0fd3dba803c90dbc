#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasnorm/errors.hpp"
#include "gasnorm/matrix.hpp"

namespace gasnorm {

enum class Activation { Identity, ReLU };

inline std::string to_string(Activation a) { return a == Activation::Identity ? "identity" : "relu"; }

inline Activation activation_from_string(const std::string& name) {
    if (name == "identity" || name == "linear") return Activation::Identity;
    if (name == "relu") return Activation::ReLU;
    throw ConfigError("unknown activation '" + name + "'");
}

/// Feed-forward network configuration. `layer_widths` lists the hidden layers;
/// the input and output widths follow from the training data. The output
/// layer is always affine.
struct MlpSpec {
    std::vector<std::size_t> layer_widths{64, 64};
    Activation activation = Activation::ReLU;
    double learning_rate = 0.01;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    /// Early-stopping patience in epochs; only active when validation data is given.
    std::size_t patience = 10;

    void validate() const {
        for (auto w : layer_widths) {
            if (w == 0) throw ConfigError("layer widths must be positive");
        }
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
        if (epochs == 0) throw ConfigError("epochs must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
    }

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// A (context, target) training pair; both are flattened row-major.
struct Sample {
    Matrix context;
    Matrix target;
};

struct DenseLayer {
    Matrix weights; // (out, in)
    std::vector<double> bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct TrainedModel {
    MlpSpec spec;
    std::size_t context_length = 0;
    std::size_t input_features = 0;
    std::size_t horizon = 0;
    std::size_t output_features = 0;
    std::vector<DenseLayer> layers;
    std::vector<double> train_loss_curve;
    std::vector<double> validation_loss_curve;

    [[nodiscard]] std::size_t input_width() const noexcept { return context_length * input_features; }
    [[nodiscard]] std::size_t output_width() const noexcept { return horizon * output_features; }

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline TrainedModel init_model(const MlpSpec& spec, std::size_t context_length, std::size_t input_features,
                               std::size_t horizon, std::size_t output_features) {
    spec.validate();
    TrainedModel model{spec, context_length, input_features, horizon, output_features, {}, {}, {}};
    std::vector<std::size_t> widths{model.input_width()};
    widths.insert(widths.end(), spec.layer_widths.begin(), spec.layer_widths.end());
    widths.push_back(model.output_width());
    if (widths.front() == 0 || widths.back() == 0) throw ArgumentError("network input and output must be non-empty");

    std::mt19937_64 rng(spec.seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto in = widths[l];
        const auto out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
        for (auto& w : layer.weights.data()) w = dist(rng);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

namespace detail {

/// Per-layer activations kept for the backward pass.
struct Workspace {
    std::vector<std::vector<double>> pre;  // pre-activation per layer
    std::vector<std::vector<double>> post; // post[0] = input, post[l+1] = output of layer l
    std::vector<double> delta;
    std::vector<double> next_delta;

    explicit Workspace(const TrainedModel& model) {
        post.emplace_back(model.input_width());
        for (const auto& layer : model.layers) {
            pre.emplace_back(layer.bias.size());
            post.emplace_back(layer.bias.size());
        }
    }
};

inline void forward(const TrainedModel& model, std::span<const double> input, Workspace& ws) {
    std::copy(input.begin(), input.end(), ws.post[0].begin());
    const auto last = model.layers.size() - 1;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        const auto& x = ws.post[l];
        auto& z = ws.pre[l];
        auto& a = ws.post[l + 1];
        const auto in = layer.weights.cols();
        for (std::size_t o = 0; o < z.size(); ++o) {
            const double* w = layer.weights.row(o).data();
            double s = layer.bias[o];
            for (std::size_t i = 0; i < in; ++i) s += w[i] * x[i];
            z[o] = s;
            a[o] = (l < last && model.spec.activation == Activation::ReLU) ? std::max(s, 0.0) : s;
        }
    }
}

/// Accumulates d(loss)/d(params) into `grads` for one sample; returns its loss
/// (mean squared error over the outputs).
inline double backward(const TrainedModel& model, std::span<const double> target, Workspace& ws,
                       std::vector<DenseLayer>& grads) {
    const auto& out = ws.post.back();
    const auto n_out = static_cast<double>(out.size());
    double loss = 0.0;
    ws.delta.assign(out.size(), 0.0);
    for (std::size_t o = 0; o < out.size(); ++o) {
        const double e = out[o] - target[o];
        loss += e * e;
        ws.delta[o] = 2.0 * e / n_out;
    }
    loss /= n_out;

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const auto& layer = model.layers[l];
        auto& g = grads[l];
        const auto& x = ws.post[l];
        const auto in = layer.weights.cols();
        for (std::size_t o = 0; o < ws.delta.size(); ++o) {
            const double d = ws.delta[o];
            g.bias[o] += d;
            double* gw = g.weights.row(o).data();
            for (std::size_t i = 0; i < in; ++i) gw[i] += d * x[i];
        }
        if (l == 0) break;
        ws.next_delta.assign(in, 0.0);
        for (std::size_t o = 0; o < ws.delta.size(); ++o) {
            const double d = ws.delta[o];
            const double* w = layer.weights.row(o).data();
            for (std::size_t i = 0; i < in; ++i) ws.next_delta[i] += d * w[i];
        }
        if (model.spec.activation == Activation::ReLU) {
            const auto& z = ws.pre[l - 1];
            for (std::size_t i = 0; i < in; ++i) {
                if (z[i] <= 0.0) ws.next_delta[i] = 0.0;
            }
        }
        std::swap(ws.delta, ws.next_delta);
    }
    return loss;
}

inline std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers) {
    std::vector<DenseLayer> out;
    out.reserve(layers.size());
    for (const auto& l : layers) {
        out.push_back({Matrix(l.weights.rows(), l.weights.cols()), std::vector<double>(l.bias.size(), 0.0)});
    }
    return out;
}

inline void check_sample(const TrainedModel& model, const Sample& s) {
    if (s.context.rows() != model.context_length || s.context.cols() != model.input_features) {
        throw ArgumentError("context shape does not match the model");
    }
    if (s.target.rows() != model.horizon || s.target.cols() != model.output_features) {
        throw ArgumentError("target shape does not match the model");
    }
}

} // namespace detail

/// Mean over samples of the per-sample output MSE.
inline double evaluate_mse(const TrainedModel& model, std::span<const Sample> samples) {
    if (samples.empty()) throw ArgumentError("no samples to evaluate");
    detail::Workspace ws(model);
    double total = 0.0;
    for (const auto& s : samples) {
        detail::check_sample(model, s);
        detail::forward(model, s.context.data(), ws);
        const auto& out = ws.post.back();
        double loss = 0.0;
        for (std::size_t o = 0; o < out.size(); ++o) loss += (out[o] - s.target.data()[o]) * (out[o] - s.target.data()[o]);
        total += loss / static_cast<double>(out.size());
    }
    return total / static_cast<double>(samples.size());
}

/// Loss and parameter gradients for one sample (layer-major, same shapes as the weights).
inline std::pair<double, std::vector<DenseLayer>> loss_gradients(const TrainedModel& model, const Sample& sample) {
    detail::check_sample(model, sample);
    detail::Workspace ws(model);
    auto grads = detail::zero_like(model.layers);
    detail::forward(model, sample.context.data(), ws);
    const double loss = detail::backward(model, sample.target.data(), ws, grads);
    return {loss, std::move(grads)};
}

/// Mini-batch SGD on the output MSE. Shapes come from the first sample. With a
/// non-empty `validation` set, training stops after `patience` epochs without
/// validation improvement and the best weights are restored; the loss curves
/// then cover the epochs actually run.
inline TrainedModel train(const MlpSpec& spec, std::span<const Sample> samples, std::span<const Sample> validation = {}) {
    spec.validate();
    if (samples.empty()) throw ArgumentError("no training samples");
    const auto& first = samples.front();
    auto model = init_model(spec, first.context.rows(), first.context.cols(), first.target.rows(), first.target.cols());
    for (const auto& s : samples) detail::check_sample(model, s);
    for (const auto& s : validation) detail::check_sample(model, s);

    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::Workspace ws(model);
    auto grads = detail::zero_like(model.layers);

    const bool early_stop = !validation.empty() && spec.patience > 0;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<DenseLayer> best_layers;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += spec.batch_size) {
            const auto end = std::min(order.size(), begin + spec.batch_size);
            for (auto& g : grads) {
                std::fill(g.weights.data().begin(), g.weights.data().end(), 0.0);
                std::fill(g.bias.begin(), g.bias.end(), 0.0);
            }
            for (std::size_t i = begin; i < end; ++i) {
                const auto& s = samples[order[i]];
                detail::forward(model, s.context.data(), ws);
                epoch_loss += detail::backward(model, s.target.data(), ws, grads);
            }
            const double step = spec.learning_rate / static_cast<double>(end - begin);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto w = model.layers[l].weights.data();
                const auto gw = grads[l].weights.data();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * gw[i];
                auto& b = model.layers[l].bias;
                for (std::size_t i = 0; i < b.size(); ++i) b[i] -= step * grads[l].bias[i];
            }
        }
        epoch_loss /= static_cast<double>(samples.size());
        if (!std::isfinite(epoch_loss)) throw TrainingError("training loss is not finite", epoch);
        model.train_loss_curve.push_back(epoch_loss);

        if (early_stop) {
            const double val = evaluate_mse(model, validation);
            model.validation_loss_curve.push_back(val);
            if (val < best_val) {
                best_val = val;
                best_layers = model.layers;
                since_best = 0;
            } else if (++since_best >= spec.patience) {
                break;
            }
        }
    }
    if (early_stop && !best_layers.empty()) model.layers = std::move(best_layers);
    return model;
}

/// Feed-forward evaluation of one context window; returns (horizon, output_features).
inline Matrix predict(const TrainedModel& model, const Matrix& context) {
    if (context.rows() != model.context_length || context.cols() != model.input_features) {
        throw ArgumentError("context shape does not match the model");
    }
    detail::Workspace ws(model);
    detail::forward(model, context.data(), ws);
    return Matrix(model.horizon, model.output_features, ws.post.back());
}

/// Largest relative difference between backpropagated gradients and central
/// finite differences of the sample loss, over every weight and bias.
inline double gradient_check(const TrainedModel& model, const Sample& sample, double step = 1e-5) {
    const auto [loss, grads] = loss_gradients(model, sample);
    (void)loss;
    TrainedModel probe = model;
    const std::vector<Sample> one{sample};
    double worst = 0.0;
    auto compare = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + step;
        const double up = evaluate_mse(probe, one);
        param = saved - step;
        const double down = evaluate_mse(probe, one);
        param = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
        worst = std::max(worst, std::abs(analytic - numeric) / scale);
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto w = probe.layers[l].weights.data();
        const auto gw = grads[l].weights.data();
        for (std::size_t i = 0; i < w.size(); ++i) compare(w[i], gw[i]);
        for (std::size_t i = 0; i < probe.layers[l].bias.size(); ++i) compare(probe.layers[l].bias[i], grads[l].bias[i]);
    }
    return worst;
}

/// Builds a model from `spec` (seeded initialization) and checks it on `sample`.
inline double gradient_check(const MlpSpec& spec, const Sample& sample, double step = 1e-5) {
    const auto model = init_model(spec, sample.context.rows(), sample.context.cols(), sample.target.rows(),
                                  sample.target.cols());
    return gradient_check(model, sample, step);
}

inline void to_json(nlohmann::json& j, const MlpSpec& s) {
    j = nlohmann::json{{"layer_widths", s.layer_widths}, {"activation", to_string(s.activation)},
                       {"learning_rate", s.learning_rate}, {"epochs", s.epochs},
                       {"batch_size", s.batch_size},       {"seed", s.seed},
                       {"patience", s.patience}};
}

inline void from_json(const nlohmann::json& j, MlpSpec& s) {
    const MlpSpec defaults;
    try {
        s.layer_widths = j.value("layer_widths", defaults.layer_widths);
        s.activation = activation_from_string(j.value("activation", to_string(defaults.activation)));
        s.learning_rate = j.value("learning_rate", defaults.learning_rate);
        s.epochs = j.value("epochs", defaults.epochs);
        s.batch_size = j.value("batch_size", defaults.batch_size);
        s.seed = j.value("seed", defaults.seed);
        s.patience = j.value("patience", defaults.patience);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid MLP spec JSON: ") + e.what());
    }
    s.validate();
}

/// Layer-major JSON; each weight matrix is a list of rows (one per output unit).
inline void to_json(nlohmann::json& j, const TrainedModel& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t r = 0; r < l.weights.rows(); ++r) {
            rows.push_back(std::vector<double>(l.weights.row(r).begin(), l.weights.row(r).end()));
        }
        layers.push_back({{"weights", rows}, {"bias", l.bias}});
    }
    j = nlohmann::json{{"spec", m.spec},
                       {"context_length", m.context_length},
                       {"input_features", m.input_features},
                       {"horizon", m.horizon},
                       {"output_features", m.output_features},
                       {"layers", layers},
                       {"train_loss_curve", m.train_loss_curve},
                       {"validation_loss_curve", m.validation_loss_curve}};
}

inline void from_json(const nlohmann::json& j, TrainedModel& m) {
    try {
        m.spec = j.at("spec").get<MlpSpec>();
        m.context_length = j.at("context_length").get<std::size_t>();
        m.input_features = j.at("input_features").get<std::size_t>();
        m.horizon = j.at("horizon").get<std::size_t>();
        m.output_features = j.at("output_features").get<std::size_t>();
        m.layers.clear();
        std::size_t expected_in = m.input_width();
        for (const auto& lj : j.at("layers")) {
            const auto& rows = lj.at("weights");
            DenseLayer layer{Matrix(rows.size(), expected_in), lj.at("bias").get<std::vector<double>>()};
            if (layer.bias.size() != rows.size()) throw StructuralError("bias length does not match layer width");
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != expected_in) throw StructuralError("weight row width does not match layer input");
                for (std::size_t c = 0; c < expected_in; ++c) layer.weights(r, c) = rows[r][c].get<double>();
            }
            expected_in = rows.size();
            m.layers.push_back(std::move(layer));
        }
        if (expected_in != m.output_width()) throw StructuralError("final layer width does not match the output shape");
        m.train_loss_curve = j.value("train_loss_curve", std::vector<double>{});
        m.validation_loss_curve = j.value("validation_loss_curve", std::vector<double>{});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model JSON: ") + e.what());
    }
}

} // namespace gasnorm
