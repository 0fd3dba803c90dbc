#include <gtest/gtest.h>

#include <random>

#include "gasnorm/param_fit.hpp"
#include "oracles.hpp"

using namespace gasnorm;

namespace {

std::vector<double> gaussian_noise(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> ys(n);
    for (auto& y : ys) y = d(rng);
    return ys;
}

GasParams pinned(Family family, double gamma) {
    GasParams p;
    p.family = family;
    p.gamma = gamma;
    p.alpha_mu = p.alpha_sigma = 0.0;
    p.beta_mu = p.beta_sigma = 1.0;
    p.omega_mu = p.omega_sigma = 0.0;
    p.mu0 = 0.0;
    p.sigma2_0 = 1.0;
    return p;
}

void expect_within(const FitResult& r, const FitBounds& b) {
    const auto& p = r.params;
    for (double a : {p.alpha_mu, p.alpha_sigma}) {
        EXPECT_GE(a, b.alpha.low);
        EXPECT_LE(a, b.alpha.high);
    }
    for (double v : {p.beta_mu, p.beta_sigma}) {
        EXPECT_GE(v, b.beta.low);
        EXPECT_LE(v, b.beta.high);
    }
    EXPECT_GE(p.omega_mu, b.omega_mu.low);
    EXPECT_LE(p.omega_mu, b.omega_mu.high);
    EXPECT_GE(p.omega_sigma, b.omega_sigma.low);
    EXPECT_LE(p.omega_sigma, b.omega_sigma.high);
}

} // namespace

TEST(PenalizedObjective, ZeroGammaStaticFilterIsZero) {
    const auto ys = gaussian_noise(100, 1, 3.0, 2.0);
    EXPECT_EQ(penalized_objective(pinned(Family::Gaussian, 0.0), ys), 0.0);
    EXPECT_EQ(penalized_objective(pinned(Family::StudentT, 0.0), ys), 0.0);
}

TEST(PenalizedObjective, ZeroGammaIsNonPositive) {
    const auto ys = gaussian_noise(100, 2);
    auto p = pinned(Family::Gaussian, 0.0);
    p.alpha_mu = 0.5;
    p.beta_mu = 0.9;
    EXPECT_LE(penalized_objective(p, ys), 0.0);
}

TEST(PenalizedObjective, PinnedGaussianIsScaledLogLikelihood) {
    const auto ys = gaussian_noise(500, 3);
    const double gamma = 0.3;
    double expected = 0.0;
    for (double y : ys) expected += oracle::gaussian_logpdf(y, 0.0, 1.0);
    EXPECT_NEAR(penalized_objective(pinned(Family::Gaussian, gamma), ys), gamma * expected, 1e-9);
}

TEST(PenalizedObjective, LengthOneHandValue) {
    GasParams p;
    p.family = Family::Gaussian;
    p.gamma = 0.5;
    p.alpha_mu = 0.1;
    p.alpha_sigma = 0.1;
    const std::vector<double> ys{2.0};
    // k = 1: mu step 0.2, sigma2 step 0.3, FIM (1, 1/2)
    const double expected = 0.5 * oracle::gaussian_logpdf(2.0, 0.0, 1.0) - 0.25 * (0.04 + 0.5 * 0.09);
    EXPECT_NEAR(penalized_objective(p, ys), expected, 1e-14);
}

TEST(PenalizedObjective, Errors) {
    EXPECT_THROW(penalized_objective(GasParams{}, std::vector<double>{}), ArgumentError);
    const std::vector<double> ys{1.0, std::nan("")};
    EXPECT_THROW(penalized_objective(GasParams{}, ys), DomainError);
}

TEST(Fit, ImprovesOnInitializationAcrossRandomSeries) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 20; ++i) {
        auto ys = gaussian_noise(200, 100 + i, 10 * u(rng) - 5, 0.1 + 3 * u(rng));
        const double drift = u(rng) * 0.05;
        for (std::size_t t = 0; t < ys.size(); ++t) ys[t] += drift * static_cast<double>(t);
        FitConfig cfg;
        cfg.gamma = std::vector<double>{0.01, 0.1, 0.5, 0.9}[i % 4];
        cfg.family = i % 2 ? Family::Gaussian : Family::StudentT;
        cfg.max_iters = 200;
        cfg.seed = static_cast<std::uint64_t>(i);
        const auto r = fit(ys, cfg);
        const auto init = initial_params(training_moments(ys), cfg);
        EXPECT_GE(r.objective, penalized_objective(init, ys));
        EXPECT_GE(r.objective, r.initial_objective);
        EXPECT_NEAR(r.objective, penalized_objective(r.params, ys), 1e-9 * (1 + std::abs(r.objective)));
        expect_within(r, default_bounds(training_moments(ys)));
    }
}

TEST(Fit, IidGaussianImproves) {
    const auto ys = gaussian_noise(300, 4);
    FitConfig cfg;
    cfg.family = Family::Gaussian;
    const auto r = fit(ys, cfg);
    EXPECT_GE(r.objective, r.initial_objective);
    EXPECT_FALSE(r.degenerate);
    EXPECT_EQ(r.params.mu0, training_moments(ys).mu);
    EXPECT_EQ(r.params.sigma2_0, training_moments(ys).sigma2);
}

TEST(Fit, DeterministicGivenSeed) {
    const auto ys = gaussian_noise(150, 5);
    FitConfig cfg;
    cfg.restarts = 3;
    cfg.seed = 11;
    const auto a = fit(ys, cfg);
    const auto b = fit(ys, cfg);
    EXPECT_EQ(a, b);
    EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
}

TEST(Fit, TracksLinearTrendBetterThanStaticMean) {
    std::vector<double> ys(200);
    for (std::size_t t = 0; t < ys.size(); ++t) ys[t] = 0.05 * static_cast<double>(t);
    FitConfig cfg;
    cfg.gamma = 0.5;
    cfg.family = Family::Gaussian;
    const auto r = fit(ys, cfg);
    auto static_params = initial_params(training_moments(ys), cfg);
    static_params.gamma = 0.0;
    auto mae = [&](const GasParams& p) {
        const auto trace = filter_series(p, ys);
        double s = 0.0;
        for (std::size_t t = 0; t < ys.size(); ++t) s += std::abs(ys[t] - trace.states[t].mu_pred);
        return s / static_cast<double>(ys.size());
    };
    EXPECT_LT(mae(r.params), mae(static_params));
}

TEST(Fit, RespectsCustomBounds) {
    const auto ys = gaussian_noise(200, 6, 1.0, 1.0);
    FitConfig cfg;
    FitBounds b;
    b.alpha = {0.0, 0.01};
    b.beta = {0.5, 0.6};
    b.omega_mu = {-0.1, 0.1};
    b.omega_sigma = {0.2, 0.3};
    cfg.bounds = b;
    const auto r = fit(ys, cfg);
    expect_within(r, b);
}

TEST(Fit, FitsNuWithinBounds) {
    auto ys = gaussian_noise(300, 7);
    ys[100] = 15.0;
    FitConfig cfg;
    cfg.fit_nu = true;
    cfg.nu = 10.0;
    const auto r = fit(ys, cfg);
    EXPECT_GE(r.params.nu, 2.1);
    EXPECT_LE(r.params.nu, 1000.0);
    EXPECT_GE(r.objective, r.initial_objective);
}

TEST(Fit, ConstantSeriesIsDegenerate) {
    const std::vector<double> ys(50, 3.0);
    const auto r = fit(ys, FitConfig{});
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.params.sigma2_0, kVarianceFloor);
    EXPECT_EQ(r.params.mu0, 3.0);
    EXPECT_TRUE(std::isfinite(r.objective));
}

TEST(Fit, InputErrors) {
    EXPECT_THROW(fit(std::vector<double>(9, 1.0), FitConfig{}), ArgumentError);
    auto ys = gaussian_noise(20, 1);
    ys[3] = INFINITY;
    EXPECT_THROW(fit(ys, FitConfig{}), DomainError);
    FitConfig bad;
    bad.restarts = 0;
    EXPECT_THROW(fit(gaussian_noise(20, 1), bad), ConfigError);
    bad = FitConfig{};
    bad.gamma = 1.0;
    EXPECT_THROW(fit(gaussian_noise(20, 1), bad), ConfigError);
}

TEST(FitFrame, PerFeatureResultsAndIsolation) {
    const auto a = gaussian_noise(100, 8);
    Matrix m(100, 3);
    for (std::size_t t = 0; t < 100; ++t) {
        m(t, 0) = a[t];
        m(t, 1) = 2.5;
        m(t, 2) = a[t];
    }
    const SeriesFrame frame(m, {"a", "flat", "a_copy"});
    FitConfig cfg;
    cfg.max_iters = 150;
    const auto fits = fit_frame(frame, cfg);
    ASSERT_EQ(fits.results.size(), 3u);
    EXPECT_TRUE(fits.errors.empty());
    EXPECT_TRUE(fits.results.at("flat").degenerate);
    EXPECT_FALSE(fits.results.at("a").degenerate);
    EXPECT_EQ(fits.results.at("a"), fits.results.at("a_copy"));
    EXPECT_EQ(fits.results.at("a"), fit(a, cfg));
}

TEST(FitFrame, PermutationInvariant) {
    const auto a = gaussian_noise(80, 9);
    const auto b = gaussian_noise(80, 10, 5.0, 3.0);
    Matrix ab(80, 2), ba(80, 2);
    for (std::size_t t = 0; t < 80; ++t) {
        ab(t, 0) = ba(t, 1) = a[t];
        ab(t, 1) = ba(t, 0) = b[t];
    }
    FitConfig cfg;
    cfg.max_iters = 100;
    const auto f1 = fit_frame(SeriesFrame(ab, {"a", "b"}), cfg);
    const auto f2 = fit_frame(SeriesFrame(ba, {"b", "a"}), cfg);
    EXPECT_EQ(f1.results, f2.results);
}

TEST(FitFrame, CollectsErrors) {
    Matrix m(5, 1, 1.0);
    const auto fits = fit_frame(SeriesFrame(m, {"short"}), FitConfig{});
    EXPECT_TRUE(fits.results.empty());
    EXPECT_EQ(fits.errors.count("short"), 1u);
}

TEST(FitFrame, JsonShape) {
    FrameFit fits;
    FitResult r;
    r.objective = -12.5;
    r.iterations = 42;
    r.converged = true;
    fits.results["x"] = r;
    const auto j = to_json(fits);
    ASSERT_TRUE(j.contains("x"));
    for (const char* key : {"params", "objective", "converged", "iterations"}) EXPECT_TRUE(j["x"].contains(key)) << key;
    const auto back = params_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.at("x"), r.params);
    EXPECT_EQ(j["x"].get<FitResult>(), r);
    EXPECT_THROW(params_from_json(nlohmann::json::array()), ConfigError);
}
