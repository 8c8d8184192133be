#include "rangegan/models.hpp"

#include <random>

#include "rangegan/errors.hpp"

namespace rangegan::models {

namespace {

constexpr double kDiscriminatorOutputScale = 0.01;

void check_input(const Matrix& x, std::size_t dim, const char* who) {
    if (x.cols != dim) {
        throw ConfigurationError(std::string(who) + ": input has " + std::to_string(x.cols) + " columns, expected " +
                                 std::to_string(dim));
    }
}

// Batch norm step; `mutable_layer` is required (and updated) only in train mode.
Matrix normalize(const Matrix& pre, std::span<const double> cond, const LayerParams& layer,
                 LayerParams* mutable_layer, Mode mode, net::BatchNormTape* bn) {
    if (mode == Mode::Train) {
        if (!mutable_layer) throw ConfigurationError("train-mode batch norm needs a mutable layer");
        return net::cond_batchnorm_forward(pre, cond, *mutable_layer, Mode::Train, bn);
    }
    return net::cond_batchnorm_eval(pre, cond, layer, bn);
}

}  // namespace

// ---- generator ---------------------------------------------------------------------

Generator::Generator(GeneratorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    std::mt19937_64 rng(seed);
    std::size_t in = cfg_.noise_dim;
    for (std::size_t width : cfg_.hidden) {
        LayerParams l = net::make_linear(in, width, rng);
        net::add_conditional_batchnorm(l, cfg_.cond_dim);
        layers_.push_back(std::move(l));
        in = width;
    }
    layers_.push_back(net::make_linear(in, cfg_.output_dim, rng));
}

Generator::Generator(GeneratorConfig cfg, std::vector<LayerParams> layers)
    : cfg_(std::move(cfg)), layers_(std::move(layers)) {
    if (layers_.size() != cfg_.hidden.size() + 1) throw ConfigurationError("generator layer count mismatch");
    std::size_t in = cfg_.noise_dim;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        layers_[k].validate();
        const bool hidden = k < cfg_.hidden.size();
        const std::size_t out = hidden ? cfg_.hidden[k] : cfg_.output_dim;
        if (layers_[k].in_dim() != in || layers_[k].out_dim() != out)
            throw ConfigurationError("generator layer " + std::to_string(k) + " has the wrong shape");
        if (hidden && layers_[k].cond_dim() != cfg_.cond_dim)
            throw ConfigurationError("generator hidden layer " + std::to_string(k) + " lacks conditional batch norm");
        in = out;
    }
}

void Generator::check_cond(std::span<const double> cond) const {
    if (cond.size() != cfg_.cond_dim) {
        throw UsageError("generator condition has " + std::to_string(cond.size()) + " entries, expected " +
                         std::to_string(cfg_.cond_dim));
    }
    for (std::size_t i = 0; i < cond.size(); ++i) {
        if (!(cond[i] >= 0.0 && cond[i] <= 1.0)) throw UsageError("generator condition entries must lie in [0,1]");
        if (i % 2 == 1 && cond[i - 1] > cond[i]) throw UsageError("generator condition has lb > ub");
    }
}

Matrix Generator::forward(const Matrix& z, std::span<const double> cond, Mode mode, Tape* tape) {
    check_input(z, cfg_.noise_dim, "generator");
    check_cond(cond);
    if (tape) {
        tape->layers.assign(layers_.size(), {});
        tape->cond.assign(cond.begin(), cond.end());
    }
    Matrix a = z;
    const std::size_t hidden = cfg_.hidden.size();
    for (std::size_t k = 0; k < hidden; ++k) {
        LayerTape local;
        LayerTape& lt = tape ? tape->layers[k] : local;
        Matrix pre = net::linear_forward(a, layers_[k]);
        Matrix normed = normalize(pre, cond, layers_[k], &layers_[k], mode, &lt.bn);
        Matrix next = net::selu_forward(normed);
        if (tape) {
            lt.input = std::move(a);
            lt.pre = std::move(pre);
            lt.normed = std::move(normed);
        }
        a = std::move(next);
    }
    Matrix pre = net::linear_forward(a, layers_[hidden]);
    Matrix out = net::sigmoid_forward(pre);
    if (tape) {
        tape->layers[hidden].input = std::move(a);
        tape->layers[hidden].pre = std::move(pre);
        tape->output = out;
    }
    return out;
}

Matrix Generator::generate(const Matrix& z, std::span<const double> cond) const {
    check_input(z, cfg_.noise_dim, "generator");
    check_cond(cond);
    Matrix a = z;
    const std::size_t hidden = cfg_.hidden.size();
    for (std::size_t k = 0; k < hidden; ++k) {
        Matrix pre = net::linear_forward(a, layers_[k]);
        a = net::selu_forward(net::cond_batchnorm_eval(pre, cond, layers_[k]));
    }
    return net::sigmoid_forward(net::linear_forward(a, layers_[hidden]));
}

void Generator::backward(const Tape& tape, const Matrix& d_out, std::vector<LayerParams>& grads) const {
    const std::size_t hidden = cfg_.hidden.size();
    if (tape.layers.size() != layers_.size() || grads.size() != layers_.size())
        throw ConfigurationError("generator backward: tape or gradient layout mismatch");
    Matrix d = net::sigmoid_backward(tape.output, d_out);
    d = net::linear_backward(tape.layers[hidden].input, d, layers_[hidden], &grads[hidden]);
    for (std::size_t k = hidden; k-- > 0;) {
        const LayerTape& lt = tape.layers[k];
        d = net::selu_backward(lt.normed, d);
        d = net::cond_batchnorm_backward(lt.bn, d, tape.cond, &grads[k]);
        d = net::linear_backward(lt.input, d, layers_[k], &grads[k]);
    }
}

// ---- discriminator -------------------------------------------------------------------

Discriminator::Discriminator(DiscriminatorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    std::mt19937_64 rng(seed);
    std::size_t in = cfg_.input_dim;
    for (std::size_t width : cfg_.hidden) {
        layers_.push_back(net::make_linear(in, width, rng));
        in = width;
    }
    layers_.push_back(net::make_linear(in, 1, rng, kDiscriminatorOutputScale));
}

Discriminator::Discriminator(DiscriminatorConfig cfg, std::vector<LayerParams> layers)
    : cfg_(std::move(cfg)), layers_(std::move(layers)) {
    if (layers_.size() != cfg_.hidden.size() + 1) throw ConfigurationError("discriminator layer count mismatch");
    std::size_t in = cfg_.input_dim;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        layers_[k].validate();
        const std::size_t out = k < cfg_.hidden.size() ? cfg_.hidden[k] : 1;
        if (layers_[k].in_dim() != in || layers_[k].out_dim() != out)
            throw ConfigurationError("discriminator layer " + std::to_string(k) + " has the wrong shape");
        in = out;
    }
}

std::vector<double> Discriminator::logits(const Matrix& x, Tape* tape) const {
    check_input(x, cfg_.input_dim, "discriminator");
    if (tape) tape->layers.assign(layers_.size(), {});
    Matrix a = x;
    const std::size_t hidden = cfg_.hidden.size();
    for (std::size_t k = 0; k < hidden; ++k) {
        Matrix pre = net::linear_forward(a, layers_[k]);
        Matrix next = net::selu_forward(pre);
        if (tape) {
            tape->layers[k].input = std::move(a);
            tape->layers[k].normed = pre;
            tape->layers[k].pre = std::move(pre);
        }
        a = std::move(next);
    }
    Matrix out = net::linear_forward(a, layers_[hidden]);
    if (tape) {
        tape->layers[hidden].input = std::move(a);
        tape->output = out;
    }
    return out.data;
}

std::vector<double> Discriminator::probabilities(const Matrix& x) const {
    auto l = logits(x);
    for (auto& v : l) v = net::sigmoid(v);
    return l;
}

Matrix Discriminator::backward(const Tape& tape, std::span<const double> d_logits,
                               std::vector<LayerParams>* grads) const {
    const std::size_t hidden = cfg_.hidden.size();
    if (tape.layers.size() != layers_.size()) throw ConfigurationError("discriminator backward: tape mismatch");
    if (d_logits.size() != tape.output.rows) throw ConfigurationError("discriminator backward: gradient length");
    Matrix d(d_logits.size(), 1);
    d.data.assign(d_logits.begin(), d_logits.end());
    d = net::linear_backward(tape.layers[hidden].input, d, layers_[hidden], grads ? &(*grads)[hidden] : nullptr);
    for (std::size_t k = hidden; k-- > 0;) {
        d = net::selu_backward(tape.layers[k].pre, d);
        d = net::linear_backward(tape.layers[k].input, d, layers_[k], grads ? &(*grads)[k] : nullptr);
    }
    return d;
}

// ---- estimator -----------------------------------------------------------------------

Estimator::Estimator(EstimatorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    std::mt19937_64 rng(seed);
    std::size_t in = cfg_.input_dim;
    for (std::size_t width : cfg_.hidden) {
        LayerParams l = net::make_linear(in, width, rng);
        net::add_batchnorm(l);
        layers_.push_back(std::move(l));
        in = width;
    }
    layers_.push_back(net::make_linear(in, cfg_.output_dim, rng));
}

Estimator::Estimator(EstimatorConfig cfg, std::vector<LayerParams> layers)
    : cfg_(std::move(cfg)), layers_(std::move(layers)) {
    if (layers_.size() != cfg_.hidden.size() + 1) throw ConfigurationError("estimator layer count mismatch");
    std::size_t in = cfg_.input_dim;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        layers_[k].validate();
        const bool hidden = k < cfg_.hidden.size();
        const std::size_t out = hidden ? cfg_.hidden[k] : cfg_.output_dim;
        if (layers_[k].in_dim() != in || layers_[k].out_dim() != out)
            throw ConfigurationError("estimator layer " + std::to_string(k) + " has the wrong shape");
        if (hidden && !layers_[k].has_batchnorm())
            throw ConfigurationError("estimator hidden layer " + std::to_string(k) + " lacks batch norm");
        in = out;
    }
}

bool Estimator::has_skip(std::size_t k) const {
    return cfg_.residual && k > 0 && k < cfg_.hidden.size() && cfg_.hidden[k] == cfg_.hidden[k - 1];
}

Matrix Estimator::run(const Matrix& x, Mode mode, Tape* tape, std::vector<LayerParams>* train_layers) const {
    check_input(x, cfg_.input_dim, "estimator");
    const std::vector<LayerParams>& layers = layers_;
    if (tape) tape->layers.assign(layers.size(), {});
    const std::span<const double> no_cond;
    Matrix a = x;
    Matrix prev_pre;
    const std::size_t hidden = cfg_.hidden.size();
    for (std::size_t k = 0; k < hidden; ++k) {
        LayerTape local;
        LayerTape& lt = tape ? tape->layers[k] : local;
        Matrix pre = net::linear_forward(a, layers[k]);
        if (has_skip(k)) net::add_in_place(pre, prev_pre);
        Matrix normed = normalize(pre, no_cond, layers[k], train_layers ? &(*train_layers)[k] : nullptr, mode, &lt.bn);
        Matrix next = net::selu_forward(normed);
        if (tape) {
            lt.input = std::move(a);
            lt.pre = pre;
            lt.normed = std::move(normed);
        }
        prev_pre = std::move(pre);
        a = std::move(next);
    }
    Matrix out = net::linear_forward(a, layers[hidden]);
    if (tape) {
        tape->layers[hidden].input = std::move(a);
        tape->output = out;
    }
    return out;
}

Matrix Estimator::forward(const Matrix& x, Mode mode, Tape* tape) { return run(x, mode, tape, &layers_); }

Matrix Estimator::predict(const Matrix& x) const { return predict(x, nullptr); }

Matrix Estimator::predict(const Matrix& x, Tape* tape) const {
    return run(x, Mode::Eval, tape, nullptr);
}

Matrix Estimator::backward(const Tape& tape, const Matrix& d_out, std::vector<LayerParams>* grads) const {
    const std::size_t hidden = cfg_.hidden.size();
    if (tape.layers.size() != layers_.size()) throw ConfigurationError("estimator backward: tape mismatch");
    const std::span<const double> no_cond;
    auto g = [&](std::size_t k) { return grads ? &(*grads)[k] : nullptr; };

    Matrix d = net::linear_backward(tape.layers[hidden].input, d_out, layers_[hidden], g(hidden));
    Matrix carry;  // gradient reaching pre_k through the skip from pre_{k+1}
    for (std::size_t k = hidden; k-- > 0;) {
        const LayerTape& lt = tape.layers[k];
        d = net::selu_backward(lt.normed, d);
        Matrix d_pre = net::cond_batchnorm_backward(lt.bn, d, no_cond, g(k));
        if (!carry.empty()) net::add_in_place(d_pre, carry);
        d = net::linear_backward(lt.input, d_pre, layers_[k], g(k));
        carry = has_skip(k) ? std::move(d_pre) : Matrix{};
    }
    return d;
}

}  // namespace rangegan::models
