#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasnorm/errors.hpp"
#include "gasnorm/gas_filter.hpp"
#include "gasnorm/matrix.hpp"
#include "gasnorm/param_fit.hpp"

namespace gasnorm {

enum class NormalizerKind { GasNorm, GlobalNorm, LocalNorm, MeanScaling };

inline std::string to_string(NormalizerKind kind) {
    switch (kind) {
    case NormalizerKind::GasNorm: return "gas_norm";
    case NormalizerKind::GlobalNorm: return "global_norm";
    case NormalizerKind::LocalNorm: return "local_norm";
    case NormalizerKind::MeanScaling: return "mean_scaling";
    }
    return "unknown";
}

inline NormalizerKind normalizer_from_string(const std::string& name) {
    if (name == "gas_norm" || name == "gas") return NormalizerKind::GasNorm;
    if (name == "global_norm" || name == "global") return NormalizerKind::GlobalNorm;
    if (name == "local_norm" || name == "local") return NormalizerKind::LocalNorm;
    if (name == "mean_scaling" || name == "mean") return NormalizerKind::MeanScaling;
    throw ConfigError("unknown normalizer '" + name + "'");
}

/// A normalized context window plus the location/scale statistics needed to
/// undo it on any forecast horizon.
///
/// Statistics are stored as (mu, sigma) with sigma the signed scale factor:
/// sqrt(sigma2) for the standardizing normalizers and the context mean for
/// mean scaling. Every normalizer therefore denormalizes as y = mu + sigma * e.
struct NormalizedBatch {
    NormalizerKind kind = NormalizerKind::GlobalNorm;
    Matrix normalized_context;
    Matrix context_mu;
    Matrix context_sigma;
    Matrix horizon_mu;
    Matrix horizon_sigma;
    /// Per feature: mean scaling fell back to scale 1 on a zero-mean context.
    std::vector<bool> scale_fallback;

    [[nodiscard]] std::size_t horizon() const noexcept { return horizon_mu.rows(); }
    [[nodiscard]] double context_sigma2(std::size_t t, std::size_t c) const {
        return context_sigma(t, c) * context_sigma(t, c);
    }
    [[nodiscard]] double horizon_sigma2(std::size_t h, std::size_t c) const {
        return horizon_sigma(h, c) * horizon_sigma(h, c);
    }
};

/// Which normalizer to apply and the fitted inputs it needs, keyed by feature name.
struct NormalizerSpec {
    NormalizerKind kind = NormalizerKind::GlobalNorm;
    std::optional<std::map<std::string, GasParams>> gas_params;
    std::optional<std::map<std::string, Moments>> global_stats;

    void validate() const {
        if (gas_params.has_value() != (kind == NormalizerKind::GasNorm)) {
            throw ConfigError("gas_params must be present exactly when the normalizer is gas_norm");
        }
        if (global_stats.has_value() != (kind == NormalizerKind::GlobalNorm)) {
            throw ConfigError("global_stats must be present exactly when the normalizer is global_norm");
        }
    }
};

namespace detail {

inline double stddev_from_var(double sigma2) { return std::sqrt(std::max(sigma2, kVarianceFloor)); }

inline NormalizedBatch empty_batch(NormalizerKind kind, const Matrix& context, std::size_t horizon) {
    if (horizon == 0) throw ArgumentError("horizon must be positive");
    if (context.rows() == 0 || context.cols() == 0) throw ArgumentError("context window is empty");
    const auto l = context.rows();
    const auto k = context.cols();
    return {kind, Matrix(l, k), Matrix(l, k), Matrix(l, k), Matrix(horizon, k), Matrix(horizon, k),
            std::vector<bool>(k, false)};
}

/// Fills one feature with constant statistics across context and horizon.
inline void fill_constant(NormalizedBatch& b, const Matrix& context, std::size_t c, double mu, double sigma) {
    for (std::size_t t = 0; t < context.rows(); ++t) {
        b.context_mu(t, c) = mu;
        b.context_sigma(t, c) = sigma;
        b.normalized_context(t, c) = (context(t, c) - mu) / sigma;
    }
    for (std::size_t h = 0; h < b.horizon(); ++h) {
        b.horizon_mu(h, c) = mu;
        b.horizon_sigma(h, c) = sigma;
    }
}

} // namespace detail

/// Online score-driven normalization of a context window. Each feature is
/// filtered from its initial state (`initial[c]` when given, else the
/// parameters' mu0/sigma2_0) and observation t is standardized with the
/// one-step prediction (mu_{t|t-1}, sigma2_{t|t-1}), so it never sees itself.
/// Horizon statistics come from forecast_statistics after the last step.
inline NormalizedBatch gas_normalize(const Matrix& context, std::span<const GasParams> params, std::size_t horizon,
                                     std::span<const Moments> initial = {}) {
    auto batch = detail::empty_batch(NormalizerKind::GasNorm, context, horizon);
    if (params.size() != context.cols()) {
        throw ConfigError("gas_norm needs fitted parameters for every feature (have " + std::to_string(params.size()) +
                          ", need " + std::to_string(context.cols()) + ")");
    }
    if (!initial.empty() && initial.size() != context.cols()) {
        throw ConfigError("initial state count does not match the feature count");
    }
    for (std::size_t c = 0; c < context.cols(); ++c) {
        const auto& p = params[c];
        const auto ys = context.col(c);
        const Moments start = initial.empty() ? Moments{p.mu0, p.sigma2_0} : initial[c];
        const auto trace = filter_series(p, ys, start);
        for (std::size_t t = 0; t < ys.size(); ++t) {
            const auto& s = trace.states[t];
            const double sigma = detail::stddev_from_var(s.sigma2_pred);
            batch.context_mu(t, c) = s.mu_pred;
            batch.context_sigma(t, c) = sigma;
            batch.normalized_context(t, c) = (ys[t] - s.mu_pred) / sigma;
        }
        const auto forecast = forecast_statistics(p, trace.states.back(), horizon);
        for (std::size_t h = 0; h < horizon; ++h) {
            batch.horizon_mu(h, c) = forecast[h].mu;
            batch.horizon_sigma(h, c) = detail::stddev_from_var(forecast[h].sigma2);
        }
    }
    return batch;
}

/// Standardizes with the window's own mean and population variance.
inline NormalizedBatch local_normalize(const Matrix& context, std::size_t horizon) {
    if (context.rows() < 2) throw ArgumentError("local normalization needs a context of at least 2 steps");
    auto batch = detail::empty_batch(NormalizerKind::LocalNorm, context, horizon);
    for (std::size_t c = 0; c < context.cols(); ++c) {
        const auto m = training_moments(context.col(c));
        detail::fill_constant(batch, context, c, m.mu, detail::stddev_from_var(m.sigma2));
    }
    return batch;
}

/// Standardizes with fixed per-feature (mean, variance), normally the training-set moments.
inline NormalizedBatch global_normalize(const Matrix& context, std::size_t horizon, std::span<const Moments> stats) {
    if (stats.size() != context.cols()) throw ConfigError("global_norm needs statistics for every feature");
    auto batch = detail::empty_batch(NormalizerKind::GlobalNorm, context, horizon);
    for (std::size_t c = 0; c < context.cols(); ++c) {
        detail::fill_constant(batch, context, c, stats[c].mu, detail::stddev_from_var(stats[c].sigma2));
    }
    return batch;
}

/// Divides by the context mean. A mean below 1e-12 in magnitude falls back to
/// scale 1 and sets the feature's fallback flag.
inline NormalizedBatch mean_scale(const Matrix& context, std::size_t horizon) {
    auto batch = detail::empty_batch(NormalizerKind::MeanScaling, context, horizon);
    for (std::size_t c = 0; c < context.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < context.rows(); ++t) mean += context(t, c);
        mean /= static_cast<double>(context.rows());
        double scale = mean;
        if (std::abs(mean) < 1e-12) {
            scale = 1.0;
            batch.scale_fallback[c] = true;
        }
        detail::fill_constant(batch, context, c, 0.0, scale);
    }
    return batch;
}

/// Dispatches on `spec.kind`, resolving fitted inputs by feature name.
inline NormalizedBatch normalize(const Matrix& context, const std::vector<std::string>& names,
                                 const NormalizerSpec& spec, std::size_t horizon) {
    spec.validate();
    if (names.size() != context.cols()) throw ArgumentError("feature name count does not match the context");
    switch (spec.kind) {
    case NormalizerKind::GasNorm: {
        std::vector<GasParams> params;
        for (const auto& name : names) {
            const auto it = spec.gas_params->find(name);
            if (it == spec.gas_params->end()) throw ConfigError("no GAS parameters for feature '" + name + "'");
            params.push_back(it->second);
        }
        return gas_normalize(context, params, horizon);
    }
    case NormalizerKind::GlobalNorm: {
        std::vector<Moments> stats;
        for (const auto& name : names) {
            const auto it = spec.global_stats->find(name);
            if (it == spec.global_stats->end()) throw ConfigError("no global statistics for feature '" + name + "'");
            stats.push_back(it->second);
        }
        return global_normalize(context, horizon, stats);
    }
    case NormalizerKind::LocalNorm: return local_normalize(context, horizon);
    case NormalizerKind::MeanScaling: return mean_scale(context, horizon);
    }
    throw ConfigError("unknown normalizer");
}

/// Recombines a residual forecast (horizon x feature) with the horizon
/// statistics: y = mu + sigma * e.
inline Matrix denormalize(const Matrix& residual_forecast, const NormalizedBatch& batch) {
    if (residual_forecast.rows() != batch.horizon_mu.rows() || residual_forecast.cols() != batch.horizon_mu.cols()) {
        throw ArgumentError("residual forecast shape does not match the horizon statistics");
    }
    Matrix out(residual_forecast.rows(), residual_forecast.cols());
    for (std::size_t h = 0; h < out.rows(); ++h) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            out(h, c) = batch.horizon_mu(h, c) + batch.horizon_sigma(h, c) * residual_forecast(h, c);
        }
    }
    return out;
}

/// Maps observed horizon values into residual space, the inverse of denormalize.
/// Used to build training targets for the residual forecaster.
inline Matrix normalize_horizon(const Matrix& target, const NormalizedBatch& batch) {
    if (target.rows() != batch.horizon_mu.rows() || target.cols() != batch.horizon_mu.cols()) {
        throw ArgumentError("target shape does not match the horizon statistics");
    }
    Matrix out(target.rows(), target.cols());
    for (std::size_t h = 0; h < out.rows(); ++h) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            out(h, c) = (target(h, c) - batch.horizon_mu(h, c)) / batch.horizon_sigma(h, c);
        }
    }
    return out;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigError("matrix JSON must be an array of rows");
    const auto rows = j.size();
    const auto cols = rows ? j[0].size() : 0;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw StructuralError("ragged matrix JSON");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

/// JSON sidecar: normalizer id, feature names, optional parameters and all statistics.
inline nlohmann::json batch_to_json(const NormalizedBatch& b, const std::vector<std::string>& names,
                                    const nlohmann::json& parameters = nlohmann::json::object()) {
    return {{"normalizer", to_string(b.kind)},
            {"feature_names", names},
            {"parameters", parameters},
            {"context_mu", matrix_to_json(b.context_mu)},
            {"context_sigma", matrix_to_json(b.context_sigma)},
            {"horizon_mu", matrix_to_json(b.horizon_mu)},
            {"horizon_sigma", matrix_to_json(b.horizon_sigma)},
            {"scale_fallback", b.scale_fallback},
            {"normalized_context", matrix_to_json(b.normalized_context)}};
}

inline NormalizedBatch batch_from_json(const nlohmann::json& j) {
    try {
        NormalizedBatch b;
        b.kind = normalizer_from_string(j.at("normalizer").get<std::string>());
        b.normalized_context = matrix_from_json(j.at("normalized_context"));
        b.context_mu = matrix_from_json(j.at("context_mu"));
        b.context_sigma = matrix_from_json(j.at("context_sigma"));
        b.horizon_mu = matrix_from_json(j.at("horizon_mu"));
        b.horizon_sigma = matrix_from_json(j.at("horizon_sigma"));
        b.scale_fallback = j.value("scale_fallback", std::vector<bool>(b.horizon_mu.cols(), false));
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid normalized batch JSON: ") + e.what());
    }
}

/// Long-format statistics CSV: phase,step,feature,mu,sigma,sigma2.
inline void write_stats_csv(std::ostream& out, const NormalizedBatch& b, const std::vector<std::string>& names) {
    out << "phase,step,feature,mu,sigma,sigma2\n";
    auto emit = [&](const char* phase, const Matrix& mu, const Matrix& sigma) {
        for (std::size_t t = 0; t < mu.rows(); ++t) {
            for (std::size_t c = 0; c < mu.cols(); ++c) {
                out << phase << ',' << t << ',' << names[c] << ',' << format_double(mu(t, c)) << ','
                    << format_double(sigma(t, c)) << ',' << format_double(sigma(t, c) * sigma(t, c)) << '\n';
            }
        }
    };
    emit("context", b.context_mu, b.context_sigma);
    emit("horizon", b.horizon_mu, b.horizon_sigma);
}

} // namespace gasnorm
