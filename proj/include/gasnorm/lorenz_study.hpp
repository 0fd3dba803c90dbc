#pragma once

#include <cstdint>
#include <vector>

#include "gasnorm/datagen.hpp"
#include "gasnorm/forecaster.hpp"
#include "gasnorm/normalization.hpp"
#include "gasnorm/param_fit.hpp"
#include "gasnorm/timeseries.hpp"

namespace gasnorm {

/// Linear-versus-ReLU comparison on Lorenz data. Both networks share every
/// setting except the activation. Inputs are all three coordinates over
/// `context_length` steps; the target is `target_feature` over the next
/// `horizon` steps. Data are standardized with training-segment moments, so
/// shifted or trending test data arrive outside the training range.
struct LorenzStudyConfig {
    LorenzSpec lorenz;
    std::size_t context_length = 25;
    std::size_t horizon = 1;
    std::size_t target_feature = 0;
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    std::size_t train_stride = 1;
    MlpSpec network;
    /// Test-time input shift in training standard deviations (per coordinate).
    double shift_sigmas = -3.0;
    /// Coefficient of the quadratic trend added for the trend study.
    double quadratic_coeff = 0.0;
};

struct LorenzStudyResult {
    double relu_mse = 0.0;
    double linear_mse = 0.0;
    double relu_shifted_mse = 0.0;
    double linear_shifted_mse = 0.0;

    [[nodiscard]] double ratio() const { return relu_mse / linear_mse; }
    [[nodiscard]] double shifted_ratio() const { return relu_shifted_mse / linear_shifted_mse; }
};

namespace detail {

inline std::vector<Sample> lorenz_samples(const Matrix& standardized, std::size_t first, std::size_t count,
                                          const LorenzStudyConfig& cfg, std::size_t stride) {
    std::vector<Sample> out;
    const auto l = cfg.context_length;
    const auto h = cfg.horizon;
    if (count < l + h) return out;
    for (std::size_t s = first; s + l + h <= first + count; s += stride) {
        Matrix target(h, 1);
        for (std::size_t i = 0; i < h; ++i) target(i, 0) = standardized(s + l + i, cfg.target_feature);
        out.push_back({standardized.slice_rows(s, l), std::move(target)});
    }
    return out;
}

inline Matrix standardize(const Matrix& values, const std::vector<Moments>& stats) {
    const auto batch = global_normalize(values, 1, stats);
    return batch.normalized_context;
}

} // namespace detail

/// Trains the ReLU and linear networks on the training segment of `frame`
/// (early stopping on validation) and scores both on the test segment as is
/// and after shifting every coordinate by `shift_sigmas` training standard
/// deviations. All MSEs are in standardized units.
inline LorenzStudyResult run_lorenz_study(const SeriesFrame& frame, const LorenzStudyConfig& cfg) {
    const auto [n_train, n_val, n_test] = split_lengths(frame.length(), cfg.train_fraction, cfg.val_fraction);
    std::vector<Moments> stats;
    for (std::size_t c = 0; c < frame.features(); ++c) {
        stats.push_back(training_moments(frame.slice(0, n_train).feature(c)));
    }
    const auto z = detail::standardize(frame.values(), stats);

    std::vector<double> shift(frame.features()), unit(frame.features(), 1.0);
    for (std::size_t c = 0; c < frame.features(); ++c) shift[c] = cfg.shift_sigmas * std::sqrt(stats[c].sigma2);
    const auto shifted = detail::standardize(affine_map(frame, shift, unit).values(), stats);

    const auto train_s = detail::lorenz_samples(z, 0, n_train, cfg, cfg.train_stride);
    const auto val_s = detail::lorenz_samples(z, n_train, n_val, cfg, cfg.horizon);
    const auto test_s = detail::lorenz_samples(z, n_train + n_val, n_test, cfg, 1);
    const auto test_shift = detail::lorenz_samples(shifted, n_train + n_val, n_test, cfg, 1);
    if (train_s.empty() || test_s.empty()) throw ArgumentError("Lorenz study segments are too short");

    auto relu_spec = cfg.network;
    relu_spec.activation = Activation::ReLU;
    auto linear_spec = cfg.network;
    linear_spec.activation = Activation::Identity;
    const auto relu = train(relu_spec, train_s, val_s);
    const auto linear = train(linear_spec, train_s, val_s);
    return {evaluate_mse(relu, test_s), evaluate_mse(linear, test_s), evaluate_mse(relu, test_shift),
            evaluate_mse(linear, test_shift)};
}

/// Generates the Lorenz data for `cfg` (plus the quadratic trend when set) and runs the study.
inline LorenzStudyResult run_lorenz_study(const LorenzStudyConfig& cfg) {
    auto frame = gen_lorenz(cfg.lorenz);
    if (cfg.quadratic_coeff != 0.0) frame = add_quadratic_trend(frame, cfg.quadratic_coeff);
    return run_lorenz_study(frame, cfg);
}

} // namespace gasnorm
