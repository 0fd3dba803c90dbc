#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace gasnorm::optim {

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    [[nodiscard]] std::size_t size() const noexcept { return lower.size(); }

    void clip(std::vector<double>& x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    }
};

struct NelderMeadOptions {
    std::size_t max_iters = 500;
    double ftol = 1e-9;
    /// Initial simplex edge as a fraction of each coordinate's box width.
    double initial_step = 0.1;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

/// Minimizes `f` inside a box with the Nelder-Mead simplex method. Trial points
/// are clipped onto the box. Non-finite values rank as +inf. The start point is
/// a vertex of the initial simplex, so the result is never worse than `x0`.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const Box& box, const NelderMeadOptions& opts = {}) {
    const std::size_t n = x0.size();
    auto eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    box.clip(x0);
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        const double width = box.upper[i] - box.lower[i];
        double step = opts.initial_step * (width > 0.0 ? width : std::max(std::abs(x0[i]), 1.0));
        if (x0[i] + step > box.upper[i]) step = -step;
        simplex[i + 1][i] += step;
        box.clip(simplex[i + 1]);
    }
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    NelderMeadResult result;
    std::vector<double> centroid(n), trial(n), trial2(n);

    auto point = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
        for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (worst[j] - centroid[j]);
        box.clip(out);
    };

    std::size_t iter = 0;
    for (; iter < opts.max_iters; ++iter) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const auto best = order.front();
        const auto worst = order.back();
        const auto second = order[n - 1];

        if (std::isfinite(values[worst]) &&
            std::abs(values[worst] - values[best]) <= opts.ftol * (std::abs(values[best]) + opts.ftol)) {
            result.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
        }

        point(-1.0, trial, simplex[worst]);
        const double reflected = eval(trial);
        if (reflected < values[best]) {
            point(-2.0, trial2, simplex[worst]);
            const double expanded = eval(trial2);
            if (expanded < reflected) {
                simplex[worst] = trial2;
                values[worst] = expanded;
            } else {
                simplex[worst] = trial;
                values[worst] = reflected;
            }
            continue;
        }
        if (reflected < values[second]) {
            simplex[worst] = trial;
            values[worst] = reflected;
            continue;
        }
        const bool outside = reflected < values[worst];
        point(outside ? -0.5 : 0.5, trial2, simplex[worst]);
        const double contracted = eval(trial2);
        if (contracted < std::min(reflected, values[worst])) {
            simplex[worst] = trial2;
            values[worst] = contracted;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            values[i] = eval(simplex[i]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    result.iterations = iter;
    return result;
}

} // namespace gasnorm::optim
