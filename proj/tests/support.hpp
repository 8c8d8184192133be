#pragma once

// Shared test helpers: seeded random fills and an independent central-difference oracle.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "rangegan/netcore.hpp"

namespace testing {

inline rangegan::net::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    rangegan::net::Matrix m(r, c);
    for (auto& v : m.data) v = n(rng);
    return m;
}

// Central differences of f over every entry of `xs`, computed in the test.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> xs, double h = 1e-5) {
    std::vector<double> g(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double keep = xs[i];
        xs[i] = keep + h;
        const double up = f();
        xs[i] = keep - h;
        const double down = f();
        xs[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double max_rel_error(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

// Sum of elementwise product: a linear functional to turn any output into a scalar loss.
inline double dot(const rangegan::net::Matrix& a, const rangegan::net::Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace testing
