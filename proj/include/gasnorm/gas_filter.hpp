#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gasnorm/errors.hpp"

namespace gasnorm {

/// Lower bound applied to every filtered and predicted variance.
inline constexpr double kVarianceFloor = 1e-8;

enum class Family { Gaussian, StudentT };

inline std::string to_string(Family family) { return family == Family::Gaussian ? "gaussian" : "student_t"; }

inline Family family_from_string(const std::string& name) {
    if (name == "gaussian") return Family::Gaussian;
    if (name == "student_t") return Family::StudentT;
    throw ConfigError("unknown distribution family '" + name + "' (expected gaussian or student_t)");
}

/// Static parameters of the score-driven filter for one feature.
///
/// Mean and variance channels are independent: each has its own learning rate
/// (alpha), mean-reversion (beta) and level (omega). `gamma` is the
/// normalization strength; the score step is multiplied by gamma / (1 - gamma),
/// so gamma = 0 freezes the filter on the omega/beta recursion.
struct GasParams {
    double alpha_mu = 0.05;
    double alpha_sigma = 0.05;
    double beta_mu = 0.95;
    double beta_sigma = 0.95;
    double omega_mu = 0.0;
    double omega_sigma = 0.05;
    double nu = 100.0;
    double gamma = 0.1;
    double mu0 = 0.0;
    double sigma2_0 = 1.0;
    Family family = Family::StudentT;

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        if (!finite(alpha_mu) || !finite(alpha_sigma) || !finite(beta_mu) || !finite(beta_sigma) ||
            !finite(omega_mu) || !finite(omega_sigma) || !finite(mu0) || !finite(sigma2_0) || !finite(gamma)) {
            throw DomainError("GAS parameters must be finite");
        }
        if (alpha_mu < 0.0 || alpha_sigma < 0.0) throw DomainError("alpha must be non-negative");
        // beta = 1 (random-walk level) is the boundary used by static configurations.
        if (std::abs(beta_mu) > 1.0 || std::abs(beta_sigma) > 1.0) throw DomainError("|beta| must not exceed 1");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must be in [0, 1)");
        if (!(sigma2_0 > 0.0)) throw DomainError("sigma2_0 must be positive");
        if (family == Family::StudentT && !(nu > 2.0 && !std::isnan(nu))) {
            throw DomainError("nu must exceed 2 for the Student's t family");
        }
    }

    /// gamma / (1 - gamma), the weight on the score step.
    [[nodiscard]] double strength_ratio() const noexcept { return gamma / (1.0 - gamma); }

    friend bool operator==(const GasParams&, const GasParams&) = default;
};

struct Moments {
    double mu = 0.0;
    double sigma2 = 1.0;

    friend bool operator==(const Moments&, const Moments&) = default;
};

/// Filter output for one observation: the one-step prediction made before
/// seeing it and the filtered value after incorporating it.
struct FilterState {
    double mu_pred = 0.0;
    double sigma2_pred = 1.0;
    double mu_filt = 0.0;
    double sigma2_filt = 1.0;

    [[nodiscard]] Moments predicted() const noexcept { return {mu_pred, sigma2_pred}; }
    [[nodiscard]] Moments filtered() const noexcept { return {mu_filt, sigma2_filt}; }

    friend bool operator==(const FilterState&, const FilterState&) = default;
};

struct FilterTrace {
    std::vector<FilterState> states;
    /// Sum over t of log p(y_t | mu_{t|t-1}, sigma2_{t|t-1}).
    double loglik = 0.0;
};

struct ScoreFim {
    double score_mu = 0.0;
    double score_sigma2 = 0.0;
    double fim_mu = 0.0;
    double fim_sigma2 = 0.0;
};

namespace detail {

inline void check_density_args(Family family, double sigma2, double nu) {
    if (!(sigma2 > 0.0)) throw DomainError("variance must be positive");
    if (family == Family::StudentT && !(nu > 2.0)) throw DomainError("nu must exceed 2");
}

/// log Gamma((nu+1)/2) - log Gamma(nu/2) - log(pi nu)/2
inline double student_t_log_norm(double nu) {
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(std::numbers::pi * nu);
}

inline double log_density_unchecked(Family family, double y, double mu, double sigma2, double nu, double log_norm) {
    const double e = y - mu;
    if (family == Family::Gaussian) {
        return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(sigma2) - 0.5 * e * e / sigma2;
    }
    return log_norm - 0.5 * std::log(sigma2) - 0.5 * (nu + 1.0) * std::log1p(e * e / (nu * sigma2));
}

} // namespace detail

/// Conditional log-density log p(y | mu, sigma2) of the chosen family.
inline double log_density(Family family, double y, double mu, double sigma2, double nu) {
    detail::check_density_args(family, sigma2, nu);
    const double norm = family == Family::StudentT ? detail::student_t_log_norm(nu) : 0.0;
    return detail::log_density_unchecked(family, y, mu, sigma2, nu, norm);
}

/// Scores (derivatives of the log-density in mu and sigma2) and the diagonal
/// of the Fisher information. The off-diagonal term is zero for both families.
inline ScoreFim score_and_fim(Family family, double y, double mu, double sigma2, double nu) {
    detail::check_density_args(family, sigma2, nu);
    const double e = y - mu;
    const double e2 = e * e;
    if (family == Family::Gaussian) {
        return {e / sigma2, 0.5 * (e2 / (sigma2 * sigma2) - 1.0 / sigma2), 1.0 / sigma2,
                1.0 / (2.0 * sigma2 * sigma2)};
    }
    const double denom = nu * sigma2 + e2;
    return {(nu + 1.0) * e / denom, 0.5 * ((nu + 1.0) * e2 / (sigma2 * denom) - 1.0 / sigma2),
            (nu + 1.0) / ((nu + 3.0) * sigma2), nu / (2.0 * (nu + 3.0) * sigma2 * sigma2)};
}

/// Score premultiplied by the scaling matrix. Gaussian: inverse Fisher
/// information (sigma2, 2 sigma2^2). Student's t: nu sigma2 / (nu + 1) for the
/// mean and 2 sigma2^2 for the variance, which bounds the step for outliers.
inline Moments scaled_score(Family family, double y, double mu, double sigma2, double nu) {
    const double e = y - mu;
    const double e2 = e * e;
    if (family == Family::Gaussian) return {e, e2 - sigma2};
    return {e / (1.0 + e2 / (nu * sigma2)), (nu + 1.0) * e2 / (nu + e2 / sigma2) - sigma2};
}

/// Incorporates observation `y` into the prediction for its time step.
/// Returns the prediction alongside the filtered moments; `step` only labels errors.
inline FilterState update(const GasParams& params, const Moments& predicted, double y, std::size_t step = 0) {
    if (!std::isfinite(y)) throw DomainError("observation at step " + std::to_string(step) + " is not finite");
    const double sigma2 = std::max(predicted.sigma2, kVarianceFloor);
    const double k = params.strength_ratio();
    FilterState state{predicted.mu, sigma2, predicted.mu, sigma2};
    if (k != 0.0) {
        const auto s = scaled_score(params.family, y, predicted.mu, sigma2, params.nu);
        state.mu_filt = predicted.mu + k * params.alpha_mu * s.mu;
        state.sigma2_filt = std::max(sigma2 + k * params.alpha_sigma * s.sigma2, kVarianceFloor);
    }
    if (!std::isfinite(state.mu_filt) || !std::isfinite(state.sigma2_filt)) {
        throw FilterError("filtered state is not finite", step);
    }
    return state;
}

/// One-step prediction theta_{t+1|t} = omega + beta * theta_{t|t}.
inline Moments predict_next(const GasParams& params, const Moments& filtered) {
    return {params.omega_mu + params.beta_mu * filtered.mu,
            std::max(params.omega_sigma + params.beta_sigma * filtered.sigma2, kVarianceFloor)};
}

/// Runs the filter over `ys` starting from the prediction `initial` and
/// accumulates the one-step conditional log-likelihood.
inline FilterTrace filter_series(const GasParams& params, std::span<const double> ys, const Moments& initial) {
    if (ys.empty()) throw ArgumentError("cannot filter an empty series");
    detail::check_density_args(params.family, initial.sigma2, params.nu);
    const double log_norm = params.family == Family::StudentT ? detail::student_t_log_norm(params.nu) : 0.0;

    FilterTrace trace;
    trace.states.reserve(ys.size());
    Moments pred = initial;
    for (std::size_t t = 0; t < ys.size(); ++t) {
        const auto state = update(params, pred, ys[t], t);
        trace.loglik += detail::log_density_unchecked(params.family, ys[t], state.mu_pred, state.sigma2_pred,
                                                      params.nu, log_norm);
        trace.states.push_back(state);
        pred = predict_next(params, state.filtered());
        if (!std::isfinite(pred.mu) || !std::isfinite(pred.sigma2)) {
            throw FilterError("predicted state is not finite", t);
        }
    }
    return trace;
}

/// Runs the filter from the initial state (mu0, sigma2_0) stored in `params`.
inline FilterTrace filter_series(const GasParams& params, std::span<const double> ys) {
    return filter_series(params, ys, Moments{params.mu0, params.sigma2_0});
}

/// Multi-step forecast of (mu, sigma2) after the last observation: iterates
/// theta <- omega + beta * theta starting from the last filtered state, so the
/// first entry is theta_{T+1|T}.
inline std::vector<Moments> forecast_statistics(const GasParams& params, const FilterState& last_state,
                                                std::size_t horizon) {
    if (horizon == 0) throw ArgumentError("forecast horizon must be positive");
    std::vector<Moments> out;
    out.reserve(horizon);
    Moments current = last_state.filtered();
    for (std::size_t h = 0; h < horizon; ++h) {
        current = predict_next(params, current);
        out.push_back(current);
    }
    return out;
}

inline void to_json(nlohmann::json& j, const GasParams& p) {
    j = nlohmann::json{{"alpha_mu", p.alpha_mu},       {"alpha_sigma", p.alpha_sigma}, {"beta_mu", p.beta_mu},
                       {"beta_sigma", p.beta_sigma},   {"omega_mu", p.omega_mu},       {"omega_sigma", p.omega_sigma},
                       {"nu", p.nu},                   {"gamma", p.gamma},             {"mu0", p.mu0},
                       {"sigma2_0", p.sigma2_0},       {"family", to_string(p.family)}};
}

inline void from_json(const nlohmann::json& j, GasParams& p) {
    try {
        p.alpha_mu = j.at("alpha_mu").get<double>();
        p.alpha_sigma = j.at("alpha_sigma").get<double>();
        p.beta_mu = j.at("beta_mu").get<double>();
        p.beta_sigma = j.at("beta_sigma").get<double>();
        p.omega_mu = j.at("omega_mu").get<double>();
        p.omega_sigma = j.at("omega_sigma").get<double>();
        p.nu = j.at("nu").get<double>();
        p.gamma = j.at("gamma").get<double>();
        p.mu0 = j.at("mu0").get<double>();
        p.sigma2_0 = j.at("sigma2_0").get<double>();
        p.family = family_from_string(j.at("family").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid GAS parameter JSON: ") + e.what());
    }
    p.validate();
}

} // namespace gasnorm
