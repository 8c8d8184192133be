#pragma once

// Generator (conditional batch norm after every hidden linear layer),
// unconditional discriminator and residual estimator, built from netcore layers.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rangegan/netcore.hpp"

namespace rangegan::models {

using net::LayerParams;
using net::Matrix;
using net::Mode;

struct GeneratorConfig {
    std::size_t noise_dim = 16;
    std::size_t cond_dim = 2;
    std::vector<std::size_t> hidden{64, 64, 64};
    std::size_t output_dim = 6;
};

struct DiscriminatorConfig {
    std::size_t input_dim = 6;
    std::vector<std::size_t> hidden{64, 64, 64};
};

struct EstimatorConfig {
    std::size_t input_dim = 6;
    std::vector<std::size_t> hidden{64, 64, 64, 64};
    std::size_t output_dim = 2;
    bool residual = true;
};

// Per-layer activations kept for the backward pass.
struct LayerTape {
    Matrix input;
    Matrix pre;     // linear output (plus residual, if any)
    Matrix normed;  // after batch norm; equals pre without one
    net::BatchNormTape bn;
};

struct Tape {
    std::vector<LayerTape> layers;
    Matrix output;
    std::vector<double> cond;
};

class Generator {
public:
    Generator() = default;
    Generator(GeneratorConfig cfg, std::uint64_t seed);
    Generator(GeneratorConfig cfg, std::vector<LayerParams> layers);

    // z: N x noise_dim, cond: encoded [lb, ub, ...]. Output in (0,1)^output_dim.
    // Train mode uses batch statistics and advances running statistics.
    Matrix forward(const Matrix& z, std::span<const double> cond, Mode mode, Tape* tape = nullptr);
    // Eval-mode forward; does not modify the generator.
    Matrix generate(const Matrix& z, std::span<const double> cond) const;
    void backward(const Tape& tape, const Matrix& d_out, std::vector<LayerParams>& grads) const;

    const GeneratorConfig& config() const { return cfg_; }
    std::vector<LayerParams>& layers() { return layers_; }
    const std::vector<LayerParams>& layers() const { return layers_; }

private:
    void check_cond(std::span<const double> cond) const;

    GeneratorConfig cfg_;
    std::vector<LayerParams> layers_;
};

class Discriminator {
public:
    Discriminator() = default;
    Discriminator(DiscriminatorConfig cfg, std::uint64_t seed);
    Discriminator(DiscriminatorConfig cfg, std::vector<LayerParams> layers);

    // One logit per row.
    std::vector<double> logits(const Matrix& x, Tape* tape = nullptr) const;
    std::vector<double> probabilities(const Matrix& x) const;
    // d_logits has one entry per row; returns dL/dx.
    Matrix backward(const Tape& tape, std::span<const double> d_logits, std::vector<LayerParams>* grads) const;

    const DiscriminatorConfig& config() const { return cfg_; }
    std::vector<LayerParams>& layers() { return layers_; }
    const std::vector<LayerParams>& layers() const { return layers_; }

private:
    DiscriminatorConfig cfg_;
    std::vector<LayerParams> layers_;
};

class Estimator {
public:
    Estimator() = default;
    Estimator(EstimatorConfig cfg, std::uint64_t seed);
    Estimator(EstimatorConfig cfg, std::vector<LayerParams> layers);

    // Hidden block k: pre_k = W_k a_{k-1} + b_k + pre_{k-1} (when residual and
    // widths match), a_k = SELU(BN(pre_k)). Linear output.
    Matrix forward(const Matrix& x, Mode mode, Tape* tape = nullptr);
    Matrix predict(const Matrix& x) const;
    Matrix predict(const Matrix& x, Tape* tape) const;
    // Returns dL/dx; parameter gradients accumulate when grads is non-null.
    Matrix backward(const Tape& tape, const Matrix& d_out, std::vector<LayerParams>* grads) const;

    const EstimatorConfig& config() const { return cfg_; }
    std::vector<LayerParams>& layers() { return layers_; }
    const std::vector<LayerParams>& layers() const { return layers_; }

private:
    Matrix run(const Matrix& x, Mode mode, Tape* tape, std::vector<LayerParams>* train_layers) const;
    bool has_skip(std::size_t k) const;

    EstimatorConfig cfg_;
    std::vector<LayerParams> layers_;
};

}  // namespace rangegan::models
