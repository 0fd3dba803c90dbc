// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "gasnorm/gasnorm.hpp"
#include "oracles.hpp"

using namespace gasnorm;

namespace {

std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

GasParams from_oracle(const oracle::FilterConfig& c) {
    GasParams p;
    p.family = c.student ? Family::StudentT : Family::Gaussian;
    p.nu = c.nu;
    p.gamma = c.gamma;
    p.alpha_mu = c.a_mu;
    p.alpha_sigma = c.a_s;
    p.beta_mu = c.b_mu;
    p.beta_sigma = c.b_s;
    p.omega_mu = c.w_mu;
    p.omega_sigma = c.w_s;
    p.mu0 = c.mu0;
    p.sigma2_0 = c.s2_0;
    return p;
}

Outcome ac1_gradient_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> log_s2(std::log(1e-2), std::log(1e2)), nu_d(3.0, 100.0), z(-4.0, 4.0);
    double worst = 0.0;
    for (bool student : {false, true}) {
        const auto fam = student ? Family::StudentT : Family::Gaussian;
        auto logpdf = [&](double y, double mu, double s2, double nu) {
            return student ? oracle::student_logpdf(y, mu, s2, nu) : oracle::gaussian_logpdf(y, mu, s2);
        };
        for (int i = 0; i < 1000; ++i) {
            const double s2 = std::exp(log_s2(rng)), nu = nu_d(rng), mu = 3.0 * z(rng);
            const double y = mu + std::sqrt(s2) * z(rng);
            const auto s = score_and_fim(fam, y, mu, s2, nu);
            const double hm = 1e-5 * std::sqrt(s2), hs = 1e-5 * s2;
            const double dmu = (logpdf(y, mu + hm, s2, nu) - logpdf(y, mu - hm, s2, nu)) / (2 * hm);
            const double ds2 = (logpdf(y, mu, s2 + hs, nu) - logpdf(y, mu, s2 - hs, nu)) / (2 * hs);
            worst = std::max(worst, std::abs(s.score_mu - dmu) / std::max(std::abs(dmu), 1e-3 / std::sqrt(s2)));
            worst = std::max(worst, std::abs(s.score_sigma2 - ds2) / std::max(std::abs(ds2), 1e-3 / s2));
        }
    }
    return {worst < 1e-6, "max rel err " + sci(worst)};
}

Outcome ac2_limit_equivalence() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> d(0.0, 3.0);
    std::vector<double> ys(1000);
    double level = 0.0;
    for (auto& y : ys) {
        level += 0.05 * d(rng);
        y = level + d(rng);
    }
    GasParams g;
    g.family = Family::Gaussian;
    g.gamma = 0.3;
    g.alpha_mu = 0.2;
    g.alpha_sigma = 0.1;
    g.beta_mu = 0.99;
    g.beta_sigma = 0.95;
    g.omega_sigma = 0.4;
    g.sigma2_0 = 9.0;
    auto t = g;
    t.family = Family::StudentT;
    t.nu = 1e6;
    const auto a = filter_series(g, ys);
    const auto b = filter_series(t, ys);
    double worst = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        worst = std::max({worst, std::abs(a.states[i].mu_filt - b.states[i].mu_filt),
                          std::abs(a.states[i].sigma2_filt - b.states[i].sigma2_filt),
                          std::abs(a.states[i].mu_pred - b.states[i].mu_pred),
                          std::abs(a.states[i].sigma2_pred - b.states[i].sigma2_pred)});
    }
    return {worst < 1e-3, "max abs diff " + sci(worst)};
}

Outcome ac3_static_limit() {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d(0.0, 1.0);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t rows = 5 + trial * 7, cols = 1 + trial % 3;
        Matrix ctx(rows, cols);
        const double loc = u(rng), sc = std::exp(0.2 * u(rng) / 10.0);
        for (auto& v : ctx.data()) v = loc + sc * d(rng);
        std::vector<Moments> stats;
        std::vector<GasParams> params;
        FitConfig cfg;
        cfg.gamma = 0.0;
        cfg.family = trial % 2 ? Family::Gaussian : Family::StudentT;
        for (std::size_t c = 0; c < cols; ++c) {
            stats.push_back(training_moments(ctx.col(c)));
            auto p = initial_params(stats.back(), cfg);
            p.alpha_mu = 1.0;  // irrelevant at gamma = 0
            params.push_back(p);
        }
        const auto gas = gas_normalize(ctx, params, 3);
        const auto global = global_normalize(ctx, 3, stats);
        for (std::size_t i = 0; i < ctx.data().size(); ++i) {
            worst = std::max(worst, std::abs(gas.normalized_context.data()[i] - global.normalized_context.data()[i]));
        }
    }
    return {worst <= 1e-12, "max abs diff " + sci(worst)};
}

Outcome ac4_fit_improvement() {
    int ok = 0;
    double min_gain = INFINITY;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ArSpec spec;
        spec.length = 400;
        spec.seed = seed;
        spec.trend_slope = 0.005 + 0.001 * static_cast<double>(seed);
        const auto ys = gen_ar(spec).feature(0);
        FitConfig cfg;
        cfg.gamma = std::vector<double>{0.01, 0.1, 0.5}[seed % 3];
        cfg.seed = seed;
        const auto r = fit(ys, cfg);
        const double init = penalized_objective(initial_params(training_moments(ys), cfg), ys);
        if (r.objective >= init) ++ok;
        min_gain = std::min(min_gain, r.objective - init);
    }
    return {ok == 20, std::to_string(ok) + "/20 improved, min gain " + std::to_string(min_gain)};
}

Outcome ac5_ar_directional() {
    ExperimentSpec s;
    s.name = "ar_trend";
    ArSpec ar;
    ar.length = 2000;
    s.dataset = ar;
    s.normalizers = {{NormalizerKind::GasNorm, Family::StudentT, 100.0}, {NormalizerKind::GlobalNorm}};
    s.split.train_fraction = 0.6;
    s.split.val_fraction = 0.2;
    s.split.context_length = 50;
    s.split.horizon = 20;
    s.forecaster.layer_widths = {64, 64};
    s.forecaster.epochs = 50;
    s.forecaster.learning_rate = 0.01;
    s.gammas = {0.0, 0.01, 0.1, 0.5};
    s.seeds = {0, 1, 2, 3, 4};
    const auto report = run_experiment(s);
    if (report.rows.size() != 2) return {false, "missing rows; errors: " + std::to_string(report.errors.size())};
    const auto& gas = report.rows[0];
    const auto& global = report.rows[1];
    std::ostringstream os;
    os << "gas_norm " << gas.mase_mean << " (gamma " << gas.gamma << ") vs global_norm " << global.mase_mean;
    return {gas.n_seeds == 5 && global.n_seeds == 5 && gas.mase_mean < global.mase_mean, os.str()};
}

LorenzStudyConfig lorenz_config() {
    LorenzStudyConfig c;
    c.lorenz.steps = 20000;
    c.lorenz.record_every = 5;
    c.context_length = 25;
    c.horizon = 5;
    c.network.layer_widths = {64, 64};
    c.network.epochs = 50;
    c.network.learning_rate = 1e-3;
    c.shift_sigmas = -3.0;
    return c;
}

Outcome ac6_lorenz_flip() {
    int wins = 0;
    std::ostringstream os;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto c = lorenz_config();
        c.lorenz.seed = seed;
        c.network.seed = seed;
        const auto r = run_lorenz_study(c);
        if (r.ratio() < 1.0 && r.shifted_ratio() > 1.0) ++wins;
        os << (seed ? "; " : "") << r.ratio() << "->" << r.shifted_ratio();
    }
    return {wins >= 4, std::to_string(wins) + "/5 seeds, relu/linear ratio unshifted->shifted: " + os.str()};
}

Outcome ac7_quadratic_trend() {
    int wins = 0;
    std::ostringstream os;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto c = lorenz_config();
        c.horizon = 100;
        c.quadratic_coeff = 1e-6;
        c.lorenz.seed = seed;
        c.network.seed = seed;
        const auto r = run_lorenz_study(c);
        if (r.linear_mse < r.relu_mse) ++wins;
        os << (seed ? "; " : "") << r.ratio();
    }
    return {wins >= 4, std::to_string(wins) + "/5 seeds, relu/linear extrapolation MSE ratio: " + os.str()};
}

Outcome ac8_outlier_robustness() {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int ok = 0;
    for (int i = 0; i < 100; ++i) {
        GasParams g;
        g.family = Family::Gaussian;
        g.gamma = 0.05 + 0.9 * u(rng);
        g.alpha_mu = 0.01 + u(rng);
        g.alpha_sigma = 0.01 + u(rng);
        g.beta_mu = u(rng);
        g.beta_sigma = u(rng);
        g.omega_mu = 10.0 * u(rng) - 5.0;
        g.omega_sigma = u(rng);
        auto t = g;
        t.family = Family::StudentT;
        t.nu = 20.0;
        const Moments pred{20.0 * u(rng) - 10.0, 0.01 + 10.0 * u(rng)};
        const double y = pred.mu + (u(rng) < 0.5 ? -10.0 : 10.0) * std::sqrt(pred.sigma2);
        const double dg = std::abs(update(g, pred, y).mu_filt - pred.mu);
        const double dt = std::abs(update(t, pred, y).mu_filt - pred.mu);
        if (dt < dg) ++ok;
    }
    return {ok == 100, std::to_string(ok) + "/100 draws"};
}

Outcome ac9_strength_monotonicity() {
    std::vector<double> ys(200, 0.0);
    for (std::size_t t = 100; t < ys.size(); ++t) ys[t] = 4.0;
    const auto ctx = Matrix::column(ys);
    std::ostringstream os;
    double previous = INFINITY;
    bool monotone = true;
    for (double gamma : {0.0, 0.1, 0.5, 0.9}) {
        GasParams p;
        p.family = Family::Gaussian;
        p.gamma = gamma;
        p.alpha_mu = p.alpha_sigma = 0.1;
        p.beta_mu = p.beta_sigma = 1.0;
        p.omega_mu = p.omega_sigma = 0.0;
        p.mu0 = 0.0;
        p.sigma2_0 = 1.0;
        const std::vector<GasParams> params{p};
        const auto b = gas_normalize(ctx, params, 1);
        double err = 0.0;
        for (std::size_t t = 100; t < ys.size(); ++t) err += std::abs(b.context_mu(t, 0) - 4.0);
        monotone = monotone && err <= previous;
        previous = err;
        os << (gamma > 0 ? ", " : "") << "gamma " << gamma << ": " << err;
    }
    return {monotone, os.str()};
}

Outcome ac10_oracle_equivalence() {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        oracle::FilterConfig c;
        c.student = trial % 2 == 0;
        c.nu = 2.5 + 60.0 * u(rng);
        c.gamma = 0.95 * u(rng);
        c.a_mu = u(rng);
        c.a_s = u(rng);
        c.b_mu = 2.0 * u(rng) - 1.0;
        c.b_s = u(rng);
        c.w_mu = n(rng);
        c.w_s = 2.0 * u(rng);
        c.mu0 = n(rng);
        c.s2_0 = 0.1 + 3.0 * u(rng);
        std::vector<double> ys(1 + static_cast<std::size_t>(10.0 * u(rng)) % 10);
        for (auto& y : ys) y = n(rng);
        const auto expected = oracle::naive_filter(c, ys);
        const auto trace = filter_series(from_oracle(c), ys);
        for (std::size_t t = 0; t < ys.size(); ++t) {
            const auto& a = trace.states[t];
            const auto& e = expected[t];
            for (auto [x, r] : {std::pair{a.mu_pred, e.mu_pred}, std::pair{a.sigma2_pred, e.s2_pred},
                                std::pair{a.mu_filt, e.mu_filt}, std::pair{a.sigma2_filt, e.s2_filt}}) {
                worst = std::max(worst, std::abs(x - r) / std::max(1.0, std::abs(r)));
            }
        }
    }
    return {worst <= 1e-12, "max diff " + sci(worst)};
}

Outcome ac11_rk4_order() {
    LorenzSpec s;
    const Vec3 v{1.0, 1.0, 1.0};
    const double horizon = 0.4;
    const auto reference = integrate_lorenz(s, v, 0.0005 / 8, 6400);
    const std::vector<double> dts{0.02, 0.01, 0.005};
    std::vector<double> lx, ly;
    for (double dt : dts) {
        const auto end = integrate_lorenz(s, v, dt, static_cast<std::size_t>(std::lround(horizon / dt)));
        double err = 0.0;
        for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(end[i] - reference[i]));
        lx.push_back(std::log(dt));
        ly.push_back(std::log(err));
    }
    const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 3; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double order = sxy / sxx;
    return {order >= 3.7 && order <= 4.3, "order " + std::to_string(order)};
}

Outcome ac12_mase_hand_case() {
    const auto v = mase(Matrix::column(std::vector<double>{4, 5}), Matrix::column(std::vector<double>{3, 3}),
                        Matrix::column(std::vector<double>{1, 2, 3}), 1);
    return {v.size() == 1 && v[0] == 1.5, "MASE " + std::to_string(v.at(0))};
}

} // namespace

int main() {
    struct Criterion {
        const char* id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"AC-1", "gradient oracle", 5, ac1_gradient_oracle},
        {"AC-2", "limit equivalence", 1, ac2_limit_equivalence},
        {"AC-3", "static limit", 1, ac3_static_limit},
        {"AC-4", "fit improvement", 120, ac4_fit_improvement},
        {"AC-5", "AR directional MASE", 600, ac5_ar_directional},
        {"AC-6", "Lorenz generalization flip", 300, ac6_lorenz_flip},
        {"AC-7", "quadratic trend extrapolation", 300, ac7_quadratic_trend},
        {"AC-8", "outlier robustness", 5, ac8_outlier_robustness},
        {"AC-9", "strength monotonicity", 5, ac9_strength_monotonicity},
        {"AC-10", "oracle equivalence", 5, ac10_oracle_equivalence},
        {"AC-11", "RK4 order", 10, ac11_rk4_order},
        {"AC-12", "MASE hand case", 1, ac12_mase_hand_case},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = out.pass && secs <= c.budget_s;
        if (!pass) ++failures;
        std::printf("%s %s %s: %s [%.2fs, budget %.0fs]\n", c.id, pass ? "PASS" : "FAIL", c.name, out.detail.c_str(),
                    secs, c.budget_s);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
