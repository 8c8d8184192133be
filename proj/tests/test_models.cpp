#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rangegan/errors.hpp"
#include "rangegan/models.hpp"
#include "support.hpp"

using namespace rangegan;
using namespace rangegan::models;
using net::Matrix;

namespace {

Matrix uniform_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(r, c);
    for (auto& v : m.data) v = u(rng);
    return m;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
    return out;
}

void randomize(std::vector<net::LayerParams>& layers, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    for (auto& l : layers)
        for (auto buf : net::trainable_buffers(l))
            for (auto& v : buf) v += n(rng);
}

void randomize_running_stats(std::vector<net::LayerParams>& layers, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> m(-0.5, 0.5), v(0.2, 2.0);
    for (auto& l : layers) {
        if (!l.running_mean) continue;
        for (auto& x : *l.running_mean) x = m(rng);
        for (auto& x : *l.running_var) x = v(rng);
    }
}

double selu_ref(double x) { return x > 0 ? 1.0507009873554805 * x : 1.0507009873554805 * 1.6732632423543772 * std::expm1(x); }

// Straight-line eval-mode estimator written from the architecture description.
Matrix estimator_reference(const std::vector<net::LayerParams>& layers, const Matrix& x, bool residual) {
    Matrix a = x;
    Matrix prev;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& L = layers[k];
        Matrix pre(a.rows, L.out_dim());
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t o = 0; o < L.out_dim(); ++o) {
                double s = L.bias[o];
                for (std::size_t j = 0; j < a.cols; ++j) s += L.weight(o, j) * a(i, j);
                pre(i, o) = s;
            }
        if (k + 1 == layers.size()) return pre;
        if (residual && k > 0 && prev.cols == pre.cols)
            for (std::size_t i = 0; i < pre.data.size(); ++i) pre.data[i] += prev.data[i];
        Matrix act(pre.rows, pre.cols);
        for (std::size_t i = 0; i < pre.rows; ++i)
            for (std::size_t o = 0; o < pre.cols; ++o) {
                const double var = std::max((*L.running_var)[o], 1e-5);
                const double xhat = (pre(i, o) - (*L.running_mean)[o]) / std::sqrt(var);
                act(i, o) = selu_ref((*L.bn_gamma)[o] * xhat + (*L.bn_beta)[o]);
            }
        prev = pre;
        a = act;
    }
    return a;
}

// Worst absolute deviation relative to the largest gradient entry. Bias gradients in front of a
// train-mode batch norm are exactly zero, so entrywise ratios would only measure difference noise.
double scaled_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, scale = 1e-12;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / scale;
}

std::vector<double> flatten_grads(std::vector<net::LayerParams>& grads) {
    std::vector<double> out;
    for (auto& g : grads)
        for (auto buf : net::trainable_buffers(g)) out.insert(out.end(), buf.begin(), buf.end());
    return out;
}

std::vector<double> numeric_param_grads(std::vector<net::LayerParams>& layers, const std::function<double()>& f) {
    std::vector<double> out;
    for (auto& l : layers)
        for (auto buf : net::trainable_buffers(l)) {
            const auto g = testing::numeric_gradient(f, buf, 1e-6);
            out.insert(out.end(), g.begin(), g.end());
        }
    return out;
}

GeneratorConfig small_gen() {
    GeneratorConfig c;
    c.noise_dim = 4;
    c.cond_dim = 4;
    c.hidden = {8, 8};
    c.output_dim = 3;
    return c;
}

}  // namespace

TEST_CASE("generator output shape and range") {
    Generator g(GeneratorConfig{}, 1);
    std::mt19937_64 rng(2);
    const Matrix z = testing::random_matrix(32, 16, rng);
    const std::vector<double> cond{0.2, 0.4};
    for (Mode m : {Mode::Train, Mode::Eval}) {
        const Matrix out = g.forward(z, cond, m);
        CHECK(out.rows == 32);
        CHECK(out.cols == 6);
        for (double v : out.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("generator eval mode is pure and deterministic") {
    Generator g(GeneratorConfig{}, 3);
    std::mt19937_64 rng(4);
    randomize(g.layers(), rng, 0.1);
    randomize_running_stats(g.layers(), rng);
    const Matrix z = testing::random_matrix(20, 16, rng);
    const std::vector<double> cond{0.1, 0.7};
    const auto before = net::parameter_hash(g.layers());
    const Matrix a = g.generate(z, cond);
    const Matrix b = g.forward(z, cond, Mode::Eval);
    CHECK(a == b);
    CHECK(net::parameter_hash(g.layers()) == before);
    // per-sample map: each row alone, and under a permutation
    for (std::size_t i = 0; i < z.rows; ++i) {
        const Matrix one = g.generate(take_rows(z, {i}), cond);
        for (std::size_t j = 0; j < one.cols; ++j) CHECK(one(0, j) == doctest::Approx(a(i, j)).epsilon(1e-13));
    }
    std::vector<std::size_t> perm(z.rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(g.generate(take_rows(z, perm), cond) == take_rows(a, perm));
}

TEST_CASE("train-mode forward advances running statistics") {
    Generator g(GeneratorConfig{}, 5);
    std::mt19937_64 rng(6);
    const auto before = net::parameter_hash(g.layers());
    g.forward(testing::random_matrix(16, 16, rng), std::vector<double>{0.0, 1.0}, Mode::Train);
    CHECK(net::parameter_hash(g.layers()) != before);
}

TEST_CASE("condition only matters through nonzero cbn weights") {
    Generator g(GeneratorConfig{}, 7);
    std::mt19937_64 rng(8);
    const Matrix z = testing::random_matrix(10, 16, rng);
    const std::vector<double> c1{0.1, 0.2}, c2{0.6, 0.9};
    // fresh cbn weights are zero
    CHECK(g.generate(z, c1) == g.generate(z, c2));
    for (auto& l : g.layers())
        if (l.cbn_weight_gamma) {
            for (auto& v : l.cbn_weight_gamma->data) v = 0.05;
            for (auto& v : l.cbn_weight_beta->data) v = -0.05;
        }
    const Matrix a = g.generate(z, c1), b = g.generate(z, c2);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) diff = std::max(diff, std::abs(a.data[i] - b.data[i]));
    CHECK(diff > 1e-4);
}

TEST_CASE("generator rejects malformed conditions") {
    Generator g(GeneratorConfig{}, 9);
    const Matrix z(4, 16, 0.1);
    CHECK_THROWS_AS(g.generate(z, std::vector<double>{0.2}), UsageError);
    CHECK_THROWS_AS(g.generate(z, std::vector<double>{0.2, 1.1}), UsageError);
    CHECK_THROWS_AS(g.generate(z, std::vector<double>{-0.1, 0.5}), UsageError);
    CHECK_THROWS_AS(g.generate(z, std::vector<double>{0.6, 0.5}), UsageError);
    CHECK_THROWS_AS(g.generate(z, std::vector<double>{std::nan(""), 0.5}), UsageError);
    CHECK_NOTHROW(g.generate(z, std::vector<double>{0.5, 0.5}));
    CHECK_THROWS_AS(g.generate(Matrix(4, 15), std::vector<double>{0.2, 0.5}), ConfigurationError);
}

TEST_CASE("discriminator starts near one half") {
    Discriminator d(DiscriminatorConfig{}, 10);
    std::mt19937_64 rng(11);
    for (double p : d.probabilities(uniform_matrix(200, 6, rng))) {
        CHECK(p > 0.45);
        CHECK(p < 0.55);
    }
}

TEST_CASE("discriminator is a per-sample map") {
    Discriminator d(DiscriminatorConfig{}, 12);
    std::mt19937_64 rng(13);
    randomize(d.layers(), rng, 0.3);
    Matrix same(5, 6);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 6; ++j) same(i, j) = 0.1 * static_cast<double>(j);
    const auto ps = d.probabilities(same);
    for (double p : ps) CHECK(p == ps[0]);
    const Matrix x = uniform_matrix(30, 6, rng);
    const auto batched = d.probabilities(x);
    for (std::size_t i = 0; i < x.rows; ++i) {
        CHECK(batched[i] > 0.0);
        CHECK(batched[i] < 1.0);
        CHECK(d.probabilities(take_rows(x, {i}))[0] == doctest::Approx(batched[i]).epsilon(1e-13));
    }
}

TEST_CASE("zero final estimator layer predicts zeros") {
    Estimator e(EstimatorConfig{}, 14);
    std::mt19937_64 rng(15);
    auto& last = e.layers().back();
    std::fill(last.weight.data.begin(), last.weight.data.end(), 0.0);
    std::fill(last.bias.begin(), last.bias.end(), 0.0);
    const Matrix out = e.predict(uniform_matrix(17, 6, rng));
    CHECK(out.rows == 17);
    CHECK(out.cols == 2);
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("estimator matches a straight-line reference with and without skips") {
    std::mt19937_64 rng(16);
    for (bool residual : {true, false}) {
        EstimatorConfig cfg;
        cfg.residual = residual;
        Estimator e(cfg, 17);
        randomize(e.layers(), rng, 0.1);
        randomize_running_stats(e.layers(), rng);
        const Matrix x = uniform_matrix(12, 6, rng);
        const Matrix got = e.predict(x);
        const Matrix want = estimator_reference(e.layers(), x, residual);
        for (std::size_t i = 0; i < got.data.size(); ++i) CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-10));
    }
}

TEST_CASE("removing the residual wiring changes predictions") {
    std::mt19937_64 rng(18);
    EstimatorConfig with;
    EstimatorConfig without = with;
    without.residual = false;
    Estimator a(with, 19);
    randomize_running_stats(a.layers(), rng);
    const Estimator b(without, a.layers());
    const Matrix x = uniform_matrix(8, 6, rng);
    const Matrix pa = a.predict(x), pb = b.predict(x);
    double diff = 0.0;
    for (std::size_t i = 0; i < pa.data.size(); ++i) diff = std::max(diff, std::abs(pa.data[i] - pb.data[i]));
    CHECK(diff > 1e-3);
}

TEST_CASE("estimator eval mode is permutation equivariant and finite") {
    Estimator e(EstimatorConfig{}, 20);
    std::mt19937_64 rng(21);
    randomize_running_stats(e.layers(), rng);
    const Matrix x = uniform_matrix(25, 6, rng);
    const Matrix y = e.predict(x);
    CHECK(y.all_finite());
    std::vector<std::size_t> perm(x.rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(e.predict(take_rows(x, perm)) == take_rows(y, perm));
}

TEST_CASE("generator parameter gradients match finite differences") {
    std::mt19937_64 rng(22);
    Generator g(small_gen(), 23);
    randomize(g.layers(), rng, 0.2);
    const Matrix z = testing::random_matrix(6, 4, rng);
    const std::vector<double> cond{0.1, 0.5, 0.3, 0.9};
    for (Mode mode : {Mode::Train, Mode::Eval}) {
        randomize_running_stats(g.layers(), rng);
        const Matrix probe = testing::random_matrix(6, 3, rng);
        auto loss = [&] {
            Generator copy = g;
            return testing::dot(copy.forward(z, cond, mode), probe);
        };
        Generator copy = g;
        Tape tape;
        copy.forward(z, cond, mode, &tape);
        auto grads = net::zeros_like(g.layers());
        g.backward(tape, probe, grads);
        const auto analytic = flatten_grads(grads);
        const auto numeric = numeric_param_grads(g.layers(), loss);
        CAPTURE(static_cast<int>(mode));
        CHECK(scaled_error(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("discriminator gradients match finite differences") {
    std::mt19937_64 rng(24);
    DiscriminatorConfig cfg;
    cfg.hidden = {8, 8};
    Discriminator d(cfg, 25);
    randomize(d.layers(), rng, 0.2);
    Matrix x = uniform_matrix(5, 6, rng);
    const std::vector<double> probe{0.3, -1.2, 0.7, 2.0, -0.4};
    auto loss = [&] {
        const auto l = d.logits(x);
        double s = 0.0;
        for (std::size_t i = 0; i < l.size(); ++i) s += l[i] * probe[i];
        return s;
    };
    Tape tape;
    d.logits(x, &tape);
    auto grads = net::zeros_like(d.layers());
    const Matrix dx = d.backward(tape, probe, &grads);
    CHECK(scaled_error(flatten_grads(grads), numeric_param_grads(d.layers(), loss)) < 1e-6);
    CHECK(testing::max_rel_error(dx.data, testing::numeric_gradient(loss, x.data, 1e-6)) < 1e-4);
}

TEST_CASE("estimator gradients match finite differences, including the input") {
    std::mt19937_64 rng(26);
    EstimatorConfig cfg;
    cfg.hidden = {8, 8, 8};
    Estimator e(cfg, 27);
    randomize(e.layers(), rng, 0.2);
    randomize_running_stats(e.layers(), rng);
    Matrix x = uniform_matrix(6, 6, rng);
    const Matrix probe = testing::random_matrix(6, 2, rng);

    SUBCASE("eval") {
        auto loss = [&] { return testing::dot(e.predict(x), probe); };
        Tape tape;
        e.predict(x, &tape);
        auto grads = net::zeros_like(e.layers());
        const Matrix dx = e.backward(tape, probe, &grads);
        CHECK(scaled_error(flatten_grads(grads), numeric_param_grads(e.layers(), loss)) < 1e-6);
        CHECK(testing::max_rel_error(dx.data, testing::numeric_gradient(loss, x.data, 1e-6)) < 1e-4);
        // frozen use: no parameter gradients requested
        CHECK(e.backward(tape, probe, nullptr) == dx);
    }
    SUBCASE("train") {
        auto loss = [&] {
            Estimator copy = e;
            return testing::dot(copy.forward(x, Mode::Train), probe);
        };
        Estimator copy = e;
        Tape tape;
        copy.forward(x, Mode::Train, &tape);
        auto grads = net::zeros_like(e.layers());
        const Matrix dx = e.backward(tape, probe, &grads);
        CHECK(scaled_error(flatten_grads(grads), numeric_param_grads(e.layers(), loss)) < 1e-6);
        CHECK(testing::max_rel_error(dx.data, testing::numeric_gradient(loss, x.data, 1e-6)) < 1e-4);
    }
}

TEST_CASE("layer lists are validated against the configuration") {
    Generator g(GeneratorConfig{}, 28);
    auto layers = g.layers();
    layers.pop_back();
    CHECK_THROWS_AS(Generator(GeneratorConfig{}, layers), ConfigurationError);
    Estimator e(EstimatorConfig{}, 29);
    auto el = e.layers();
    el[1].bn_gamma.reset();
    el[1].bn_beta.reset();
    el[1].running_mean.reset();
    el[1].running_var.reset();
    CHECK_THROWS_AS(Estimator(EstimatorConfig{}, el), ConfigurationError);
    // a discriminator's layers do not fit a generator
    Discriminator d(DiscriminatorConfig{}, 30);
    CHECK_THROWS_AS(Generator(GeneratorConfig{}, d.layers()), ConfigurationError);
    CHECK_THROWS_AS(e.predict(Matrix(3, 5)), ConfigurationError);
    CHECK_THROWS_AS(d.logits(Matrix(3, 7)), ConfigurationError);
}

TEST_CASE("same seed builds identical networks") {
    CHECK(Generator(GeneratorConfig{}, 31).layers() == Generator(GeneratorConfig{}, 31).layers());
    CHECK_FALSE(Estimator(EstimatorConfig{}, 31).layers() == Estimator(EstimatorConfig{}, 32).layers());
}
