#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasnorm/errors.hpp"
#include "gasnorm/gas_filter.hpp"
#include "gasnorm/optim.hpp"
#include "gasnorm/timeseries.hpp"

namespace gasnorm {

struct Interval {
    double low = 0.0;
    double high = 0.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Search box for the fitted parameters. Unset boxes are derived from the
/// training moments (see default_bounds).
struct FitBounds {
    Interval alpha{0.0, 2.0};
    Interval beta{0.0, 0.999};
    Interval omega_mu{-1.0, 1.0};
    Interval omega_sigma{0.0, 1.0};
    Interval nu{2.1, 1000.0};
};

struct FitConfig {
    double gamma = 0.1;
    Family family = Family::StudentT;
    /// Degrees of freedom when `fit_nu` is off, and the starting value otherwise.
    double nu = 100.0;
    std::size_t max_iters = 400;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
    bool fit_nu = false;
    std::optional<FitBounds> bounds;

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("fit gamma must be in [0, 1)");
        if (max_iters == 0) throw ConfigError("max_iters must be positive");
        if (restarts == 0) throw ConfigError("restarts must be at least 1");
        if (family == Family::StudentT && !(nu > 2.0)) throw ConfigError("nu must exceed 2");
        if (bounds) {
            const auto& b = *bounds;
            if (b.alpha.low < 0.0 || b.alpha.low > b.alpha.high) throw ConfigError("alpha bounds invalid");
            if (b.beta.low < -1.0 || b.beta.high > 1.0 || b.beta.low > b.beta.high) throw ConfigError("beta bounds invalid");
            if (b.omega_mu.low > b.omega_mu.high || b.omega_sigma.low > b.omega_sigma.high) {
                throw ConfigError("omega bounds invalid");
            }
            if (b.nu.low <= 2.0 || b.nu.low > b.nu.high) throw ConfigError("nu bounds invalid");
        }
    }
};

struct FitResult {
    GasParams params;
    /// Penalized log-likelihood at `params`.
    double objective = 0.0;
    /// Penalized log-likelihood at the default initialization.
    double initial_objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Set for (near-)constant training data, where the filter is left static.
    bool degenerate = false;

    friend bool operator==(const FitResult&, const FitResult&) = default;
};

struct FrameFit {
    std::map<std::string, FitResult> results;
    std::map<std::string, std::string> errors;
};

/// Training mean and population variance, the variance floored at kVarianceFloor.
inline Moments training_moments(std::span<const double> ys) {
    if (ys.empty()) throw ArgumentError("moments of an empty series");
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    var /= static_cast<double>(ys.size());
    return {mean, std::max(var, kVarianceFloor)};
}

inline FitBounds default_bounds(const Moments& m) {
    FitBounds b;
    b.omega_mu = {-10.0 * std::abs(m.mu) - 1.0, 10.0 * std::abs(m.mu) + 1.0};
    b.omega_sigma = {0.0, 10.0 * m.sigma2 + 1.0};
    return b;
}

/// Penalized prediction-error objective
///   sum_t gamma * log p(y_t | theta_{t|t-1}) - (1 - gamma)/2 * ||theta_{t|t} - theta_{t|t-1}||^2_{P_t}
/// with P_t the diagonal Fisher information at theta_{t|t-1}. The filter
/// starts from (mu0, sigma2_0) in `params`.
inline double penalized_objective(const GasParams& params, std::span<const double> ys) {
    if (ys.empty()) throw ArgumentError("objective of an empty series");
    detail::check_density_args(params.family, params.sigma2_0, params.nu);
    const double log_norm = params.family == Family::StudentT ? detail::student_t_log_norm(params.nu) : 0.0;
    const double g = params.gamma;

    double total = 0.0;
    Moments pred{params.mu0, params.sigma2_0};
    for (std::size_t t = 0; t < ys.size(); ++t) {
        const auto state = update(params, pred, ys[t], t);
        const auto fim = score_and_fim(params.family, ys[t], state.mu_pred, state.sigma2_pred, params.nu);
        const double dmu = state.mu_filt - state.mu_pred;
        const double ds2 = state.sigma2_filt - state.sigma2_pred;
        const double penalty = fim.fim_mu * dmu * dmu + fim.fim_sigma2 * ds2 * ds2;
        const double loglik =
            detail::log_density_unchecked(params.family, ys[t], state.mu_pred, state.sigma2_pred, params.nu, log_norm);
        total += g * loglik - 0.5 * (1.0 - g) * penalty;
        pred = predict_next(params, state.filtered());
        if (!std::isfinite(pred.mu) || !std::isfinite(pred.sigma2)) throw FilterError("predicted state is not finite", t);
    }
    if (!std::isfinite(total)) throw NumericalError("penalized objective is not finite");
    return total;
}

/// Starting point of every fit: alpha 0.05, beta 0.95, omega placing the
/// recursion's fixed point at the training moments, theta_0 = training moments.
inline GasParams initial_params(const Moments& m, const FitConfig& config) {
    GasParams p;
    p.family = config.family;
    p.gamma = config.gamma;
    p.nu = config.nu;
    p.alpha_mu = p.alpha_sigma = 0.05;
    p.beta_mu = p.beta_sigma = 0.95;
    p.omega_mu = (1.0 - p.beta_mu) * m.mu;
    p.omega_sigma = (1.0 - p.beta_sigma) * m.sigma2;
    p.mu0 = m.mu;
    p.sigma2_0 = m.sigma2;
    return p;
}

namespace detail {

inline std::vector<double> pack(const GasParams& p, bool with_nu) {
    std::vector<double> x{p.alpha_mu, p.alpha_sigma, p.beta_mu, p.beta_sigma, p.omega_mu, p.omega_sigma};
    if (with_nu) x.push_back(p.nu);
    return x;
}

inline GasParams unpack(const std::vector<double>& x, GasParams base) {
    base.alpha_mu = x[0];
    base.alpha_sigma = x[1];
    base.beta_mu = x[2];
    base.beta_sigma = x[3];
    base.omega_mu = x[4];
    base.omega_sigma = x[5];
    if (x.size() > 6) base.nu = x[6];
    return base;
}

inline optim::Box make_box(const FitBounds& b, bool with_nu) {
    optim::Box box{{b.alpha.low, b.alpha.low, b.beta.low, b.beta.low, b.omega_mu.low, b.omega_sigma.low},
                   {b.alpha.high, b.alpha.high, b.beta.high, b.beta.high, b.omega_mu.high, b.omega_sigma.high}};
    if (with_nu) {
        box.lower.push_back(b.nu.low);
        box.upper.push_back(b.nu.high);
    }
    return box;
}

} // namespace detail

/// Maximizes the penalized objective over (alpha, beta, omega[, nu]) for both
/// channels with a box-clipped Nelder-Mead search. Restart 0 starts at
/// initial_params; later restarts perturb it multiplicatively by up to +-50%.
inline FitResult fit(std::span<const double> ys, const FitConfig& config) {
    config.validate();
    if (ys.size() < 10) throw ArgumentError("fit needs at least 10 observations");
    for (double y : ys) {
        if (!std::isfinite(y)) throw DomainError("fit input contains non-finite values");
    }

    const auto moments = training_moments(ys);
    const auto base = initial_params(moments, config);
    const auto bounds = config.bounds.value_or(default_bounds(moments));
    const bool with_nu = config.fit_nu && config.family == Family::StudentT;
    const auto box = detail::make_box(bounds, with_nu);

    auto clip_params = [&](GasParams p) {
        auto x = detail::pack(p, with_nu);
        box.clip(x);
        return detail::unpack(x, p);
    };
    const auto start = clip_params(base);

    FitResult result;
    result.initial_objective = penalized_objective(start, ys);

    if (moments.sigma2 <= kVarianceFloor) {
        result.params = start;
        result.params.alpha_mu = result.params.alpha_sigma = 0.0;
        result.params = clip_params(result.params);
        result.objective = penalized_objective(result.params, ys);
        if (result.objective < result.initial_objective) {
            result.params = start;
            result.objective = result.initial_objective;
        }
        result.converged = true;
        result.degenerate = true;
        return result;
    }

    auto negative_objective = [&](const std::vector<double>& x) {
        try {
            return -penalized_objective(detail::unpack(x, base), ys);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    optim::NelderMeadOptions opts;
    opts.max_iters = config.max_iters;

    bool found = false;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < config.restarts; ++r) {
        auto x0 = detail::pack(start, with_nu);
        if (r > 0) {
            for (auto& v : x0) v *= jitter(rng);
        }
        const auto run = optim::nelder_mead(negative_objective, x0, box, opts);
        if (std::isfinite(run.value) && run.value < best_value) {
            best_value = run.value;
            result.params = detail::unpack(run.x, base);
            result.iterations = run.iterations;
            result.converged = run.converged;
            found = true;
        }
    }
    if (!found) {
        throw FitError("all " + std::to_string(config.restarts) +
                       " restarts failed numerically; initial objective " + std::to_string(result.initial_objective));
    }
    result.objective = -best_value;
    return result;
}

/// Independent fit per feature. Failures are collected per feature name.
inline FrameFit fit_frame(const SeriesFrame& frame, const FitConfig& config) {
    if (frame.length() == 0 || frame.features() == 0) throw ArgumentError("cannot fit an empty frame");
    FrameFit out;
    for (std::size_t c = 0; c < frame.features(); ++c) {
        const auto& name = frame.feature_names()[c];
        try {
            out.results.emplace(name, fit(frame.feature(c), config));
        } catch (const std::exception& e) {
            out.errors.emplace(name, e.what());
        }
    }
    return out;
}

inline void to_json(nlohmann::json& j, const FitResult& r) {
    j = nlohmann::json{{"params", r.params},
                       {"objective", r.objective},
                       {"initial_objective", r.initial_objective},
                       {"converged", r.converged},
                       {"iterations", r.iterations},
                       {"degenerate", r.degenerate}};
}

inline void from_json(const nlohmann::json& j, FitResult& r) {
    try {
        r.params = j.at("params").get<GasParams>();
        r.objective = j.at("objective").get<double>();
        r.converged = j.at("converged").get<bool>();
        r.iterations = j.at("iterations").get<std::size_t>();
        r.initial_objective = j.value("initial_objective", r.objective);
        r.degenerate = j.value("degenerate", false);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid fit result JSON: ") + e.what());
    }
}

/// { feature_name: { params, objective, converged, iterations, ... } }
inline nlohmann::json to_json(const FrameFit& fits) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, result] : fits.results) j[name] = result;
    return j;
}

/// Reads the per-feature parameter map written by to_json(FrameFit). Also
/// accepts a bare { feature_name: GasParams } object.
inline std::map<std::string, GasParams> params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("parameter JSON must be an object keyed by feature name");
    std::map<std::string, GasParams> out;
    for (const auto& [name, value] : j.items()) {
        out.emplace(name, value.contains("params") ? value.at("params").get<GasParams>() : value.get<GasParams>());
    }
    return out;
}

} // namespace gasnorm
