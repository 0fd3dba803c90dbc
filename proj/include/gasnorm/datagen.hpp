#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasnorm/errors.hpp"
#include "gasnorm/timeseries.hpp"

namespace gasnorm {

/// AR process with an additive sinusoidal season and linear trend:
/// x_t = a_t + A sin(2 pi t / P) + slope * t, a_t = sum_i phi_i a_{t-i} + eps_t.
struct ArSpec {
    std::size_t length = 2000;
    std::vector<double> ar_coeffs{0.9};
    double noise_std = 1.0;
    double season_amplitude = 2.0;
    std::size_t season_period = 50;
    double trend_slope = 0.01;
    std::uint64_t seed = 0;
    /// Reject AR coefficients whose characteristic roots are not outside the unit circle.
    bool require_stationary = false;
};

/// Lorenz system integrated with fixed-step RK4. `noise_std` is relative to
/// each coordinate's clean standard deviation. Every `record_every`-th state
/// is emitted, starting with the initial one.
struct LorenzSpec {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    double dt = 0.01;
    std::size_t steps = 5000;
    std::array<double, 3> initial{1.0, 1.0, 1.0};
    double noise_std = 0.005;
    std::size_t record_every = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(dt > 0.0 && dt <= 0.05)) throw ArgumentError("Lorenz dt must be in (0, 0.05]");
        if (steps == 0) throw ArgumentError("Lorenz steps must be at least 1");
        if (record_every == 0) throw ArgumentError("record_every must be positive");
        if (!(noise_std >= 0.0)) throw ArgumentError("noise_std must be non-negative");
    }
};

/// True when x_t = sum_i phi_i x_{t-i} + eps_t is stationary, via the
/// step-down (reverse Levinson) recursion on the reflection coefficients.
inline bool ar_is_stationary(std::span<const double> phi) {
    std::vector<double> c(phi.begin(), phi.end());
    for (std::size_t m = c.size(); m > 0; --m) {
        const double k = c[m - 1];
        if (!(std::abs(k) < 1.0)) return false;
        std::vector<double> next(m - 1);
        for (std::size_t i = 0; i + 1 < m; ++i) next[i] = (c[i] + k * c[m - 2 - i]) / (1.0 - k * k);
        c = std::move(next);
    }
    return true;
}

inline SeriesFrame gen_ar(const ArSpec& spec) {
    if (spec.length == 0) throw ArgumentError("AR length must be positive");
    if (spec.season_period == 0) throw ArgumentError("season_period must be positive");
    if (!(spec.noise_std >= 0.0)) throw ArgumentError("noise_std must be non-negative");
    if (spec.require_stationary && !ar_is_stationary(spec.ar_coeffs)) {
        throw ArgumentError("AR coefficients are not stationary");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto p = spec.ar_coeffs.size();
    std::vector<double> ar(spec.length, 0.0);
    Matrix values(spec.length, 1);
    for (std::size_t t = 0; t < spec.length; ++t) {
        double a = spec.noise_std > 0.0 ? spec.noise_std * noise(rng) : 0.0;
        for (std::size_t i = 1; i <= p && i <= t; ++i) a += spec.ar_coeffs[i - 1] * ar[t - i];
        ar[t] = a;
        const auto tt = static_cast<double>(t);
        values(t, 0) = a + spec.season_amplitude * std::sin(2.0 * std::numbers::pi * tt / static_cast<double>(spec.season_period)) +
                       spec.trend_slope * tt;
    }
    return SeriesFrame(std::move(values), {"ar"});
}

using Vec3 = std::array<double, 3>;

inline Vec3 lorenz_rhs(const LorenzSpec& s, const Vec3& v) {
    return {s.sigma * (v[1] - v[0]), v[0] * (s.rho - v[2]) - v[1], v[0] * v[1] - s.beta * v[2]};
}

/// One classical fourth-order Runge-Kutta step of size `dt`.
inline Vec3 rk4_step(const LorenzSpec& s, const Vec3& v, double dt) {
    auto axpy = [](const Vec3& x, double a, const Vec3& k) { return Vec3{x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2]}; };
    const auto k1 = lorenz_rhs(s, v);
    const auto k2 = lorenz_rhs(s, axpy(v, 0.5 * dt, k1));
    const auto k3 = lorenz_rhs(s, axpy(v, 0.5 * dt, k2));
    const auto k4 = lorenz_rhs(s, axpy(v, dt, k3));
    Vec3 out;
    for (std::size_t i = 0; i < 3; ++i) out[i] = v[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Noise-free state after `steps` RK4 steps of size `dt` from `initial`.
inline Vec3 integrate_lorenz(const LorenzSpec& s, Vec3 state, double dt, std::size_t steps) {
    for (std::size_t i = 0; i < steps; ++i) state = rk4_step(s, state, dt);
    return state;
}

inline SeriesFrame gen_lorenz(const LorenzSpec& spec) {
    spec.validate();
    const auto rows = spec.steps / spec.record_every + 1;
    Matrix values(rows, 3);
    Vec3 state = spec.initial;
    std::size_t row = 0;
    for (std::size_t step = 0; step <= spec.steps && row < rows; ++step) {
        if (step > 0) {
            state = rk4_step(spec, state, spec.dt);
            if (!std::isfinite(state[0]) || !std::isfinite(state[1]) || !std::isfinite(state[2])) {
                throw NumericalError("Lorenz state is not finite at step " + std::to_string(step));
            }
        }
        if (step % spec.record_every == 0) {
            for (std::size_t c = 0; c < 3; ++c) values(row, c) = state[c];
            ++row;
        }
    }
    if (spec.noise_std > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::array<double, 3> scale{};
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < rows; ++r) mean += values(r, c);
            mean /= static_cast<double>(rows);
            double var = 0.0;
            for (std::size_t r = 0; r < rows; ++r) var += (values(r, c) - mean) * (values(r, c) - mean);
            scale[c] = spec.noise_std * std::sqrt(var / static_cast<double>(rows));
        }
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < 3; ++c) values(r, c) += scale[c] * noise(rng);
        }
    }
    return SeriesFrame(std::move(values), {"x", "y", "z"});
}

/// x -> scale * x + shift per feature.
inline SeriesFrame affine_map(const SeriesFrame& frame, std::span<const double> shift, std::span<const double> scale) {
    if (shift.size() != frame.features() || scale.size() != frame.features()) {
        throw ArgumentError("affine_map needs one shift and one scale per feature");
    }
    for (double s : scale) {
        if (!(s > 0.0)) throw ArgumentError("affine_map scale must be positive");
    }
    Matrix out = frame.values();
    for (std::size_t t = 0; t < out.rows(); ++t) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(t, c) = scale[c] * out(t, c) + shift[c];
    }
    return frame.with_values(std::move(out));
}

/// x_t -> x_t + coeff * t^2 with t the frame's time tick.
inline SeriesFrame add_quadratic_trend(const SeriesFrame& frame, double coeff) {
    Matrix out = frame.values();
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const auto t = static_cast<double>(frame.time_index()[r]);
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += coeff * t * t;
    }
    return frame.with_values(std::move(out));
}

/// Adds `magnitude_in_sigmas` times the feature's population standard
/// deviation (over the first `reference_rows` rows, or all rows when 0) at (t, feature).
inline SeriesFrame inject_outlier(const SeriesFrame& frame, std::size_t t, std::size_t feature,
                                  double magnitude_in_sigmas, std::size_t reference_rows = 0) {
    if (t >= frame.length() || feature >= frame.features()) throw ArgumentError("outlier index out of range");
    const auto n = reference_rows == 0 ? frame.length() : std::min(reference_rows, frame.length());
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += frame(r, feature);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (frame(r, feature) - mean) * (frame(r, feature) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    Matrix out = frame.values();
    out(t, feature) += magnitude_in_sigmas * sd;
    return frame.with_values(std::move(out));
}

inline void to_json(nlohmann::json& j, const ArSpec& s) {
    j = nlohmann::json{{"kind", "ar"},
                       {"length", s.length},
                       {"ar_coeffs", s.ar_coeffs},
                       {"noise_std", s.noise_std},
                       {"season_amplitude", s.season_amplitude},
                       {"season_period", s.season_period},
                       {"trend_slope", s.trend_slope},
                       {"seed", s.seed},
                       {"require_stationary", s.require_stationary}};
}

inline void from_json(const nlohmann::json& j, ArSpec& s) {
    const ArSpec d;
    try {
        s.length = j.value("length", d.length);
        s.ar_coeffs = j.value("ar_coeffs", d.ar_coeffs);
        s.noise_std = j.value("noise_std", d.noise_std);
        s.season_amplitude = j.value("season_amplitude", d.season_amplitude);
        s.season_period = j.value("season_period", d.season_period);
        s.trend_slope = j.value("trend_slope", d.trend_slope);
        s.seed = j.value("seed", d.seed);
        s.require_stationary = j.value("require_stationary", d.require_stationary);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid AR spec JSON: ") + e.what());
    }
}

inline void to_json(nlohmann::json& j, const LorenzSpec& s) {
    j = nlohmann::json{{"kind", "lorenz"}, {"sigma", s.sigma},     {"rho", s.rho},
                       {"beta", s.beta},   {"dt", s.dt},           {"steps", s.steps},
                       {"initial", s.initial}, {"noise_std", s.noise_std}, {"record_every", s.record_every},
                       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, LorenzSpec& s) {
    const LorenzSpec d;
    try {
        s.sigma = j.value("sigma", d.sigma);
        s.rho = j.value("rho", d.rho);
        s.beta = j.value("beta", d.beta);
        s.dt = j.value("dt", d.dt);
        s.steps = j.value("steps", d.steps);
        s.initial = j.value("initial", d.initial);
        s.noise_std = j.value("noise_std", d.noise_std);
        s.record_every = j.value("record_every", d.record_every);
        s.seed = j.value("seed", d.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid Lorenz spec JSON: ") + e.what());
    }
    s.validate();
}

} // namespace gasnorm
