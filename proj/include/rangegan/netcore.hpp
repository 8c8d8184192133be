#pragma once

// Dense-network kernel: linear layers, SELU, logistic sigmoid, (conditional)
// batch normalization, Adam with step decay, finite-difference checks and
// JSON checkpoints. All arithmetic is double precision.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rangegan::net {

using Vector = std::vector<double>;

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const { return data.empty(); }
    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Selects rows of `m` by index (rows may repeat).
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
// Copies one column into a vector.
Vector column(const Matrix& m, std::size_t c);

enum class Mode { Train, Eval };

// One linear layer plus the normalization that follows it, if any.
//
// Plain batch norm uses bn_gamma/bn_beta. Conditional batch norm adds
// cbn_weight_gamma * cond to the scale and cbn_weight_beta * cond to the shift,
// so with zero cbn weights it degenerates to plain batch norm.
struct LayerParams {
    Matrix weight;  // out x in
    Vector bias;    // out
    std::optional<Vector> bn_gamma;
    std::optional<Vector> bn_beta;
    std::optional<Matrix> cbn_weight_gamma;  // out x cond_dim
    std::optional<Matrix> cbn_weight_beta;   // out x cond_dim
    std::optional<Vector> running_mean;
    std::optional<Vector> running_var;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
    bool has_batchnorm() const { return bn_gamma.has_value(); }
    bool is_conditional() const { return cbn_weight_gamma.has_value(); }
    std::size_t cond_dim() const { return cbn_weight_gamma ? cbn_weight_gamma->cols : 0; }

    // Throws ConfigurationError when shapes disagree or running_var < 0.
    void validate() const;

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

constexpr double kBatchNormEpsilon = 1e-5;
constexpr double kBatchNormMomentum = 0.9;

// LeCun-normal weights, zero bias.
LayerParams make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng, double weight_scale = 1.0);
// Adds plain batch-norm parameters (gamma=1, beta=0, running stats 0/1).
void add_batchnorm(LayerParams& layer);
// Adds batch norm whose scale/shift are affine in a cond_dim condition vector.
void add_conditional_batchnorm(LayerParams& layer, std::size_t cond_dim);

// Same structure as `p` with every trainable buffer zeroed and no running stats.
LayerParams zeros_like(const LayerParams& p);
std::vector<LayerParams> zeros_like(const std::vector<LayerParams>& ps);

// Trainable buffers in a fixed order: weight, bias, bn_gamma, bn_beta,
// cbn_weight_gamma, cbn_weight_beta (absent ones skipped).
std::vector<std::span<double>> trainable_buffers(LayerParams& p);
std::vector<std::span<const double>> trainable_buffers(const LayerParams& p);
std::size_t parameter_count(const std::vector<LayerParams>& ps);
// FNV-1a over the bytes of every trainable buffer and running statistic.
std::uint64_t parameter_hash(const std::vector<LayerParams>& ps);

// ---- linear -------------------------------------------------------------

Matrix linear_forward(const Matrix& x, const LayerParams& layer);
// Returns dL/dx. When `grads` is non-null, dL/dW and dL/db are accumulated into it.
Matrix linear_backward(const Matrix& x, const Matrix& d_out, const LayerParams& layer, LayerParams* grads);

// ---- activations --------------------------------------------------------

constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

double selu(double x);
double selu_derivative(double x);
double sigmoid(double x);
// log(sigmoid(x)) without overflow.
double log_sigmoid(double x);

Matrix selu_forward(const Matrix& pre);
Matrix selu_backward(const Matrix& pre, const Matrix& d_out);
Matrix sigmoid_forward(const Matrix& pre);
Matrix sigmoid_backward(const Matrix& out, const Matrix& d_out);

// ---- (conditional) batch norm -------------------------------------------

struct BatchNormTape {
    Matrix normalized;  // x_hat
    Vector inv_std;     // per feature
    Vector floored;     // 1 when variance hit the epsilon floor (train mode)
    Vector scale;       // effective gamma
    Mode mode = Mode::Train;
};

// Normalizes per feature (batch statistics in Train, running statistics in Eval)
// then applies the effective scale/shift. Train mode updates running stats.
// Throws UsageError for N < 2 in train mode or a cond of the wrong length.
Matrix cond_batchnorm_forward(const Matrix& h, std::span<const double> cond, LayerParams& layer, Mode mode,
                              BatchNormTape* tape = nullptr);
// Eval-mode forward that never touches the layer.
Matrix cond_batchnorm_eval(const Matrix& h, std::span<const double> cond, const LayerParams& layer,
                           BatchNormTape* tape = nullptr);
Matrix cond_batchnorm_backward(const BatchNormTape& tape, const Matrix& d_out, std::span<const double> cond,
                               LayerParams* grads);

// Effective per-feature scale/shift for a condition.
Vector effective_gamma(const LayerParams& layer, std::span<const double> cond);
Vector effective_beta(const LayerParams& layer, std::span<const double> cond);

// Element-wise sum; used for residual additions.
Matrix add(const Matrix& a, const Matrix& b);
void add_in_place(Matrix& a, const Matrix& b);

// ---- Adam ---------------------------------------------------------------

struct AdamState {
    std::vector<LayerParams> m;
    std::vector<LayerParams> v;
    std::int64_t t = 0;
    double base_lr = 1e-4;
    double decay_factor = 1.0;
    std::int64_t decay_interval = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

AdamState make_adam(const std::vector<LayerParams>& params, double base_lr, double decay_factor,
                    std::int64_t decay_interval, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

// base_lr * decay_factor^floor(t / decay_interval)
double effective_lr(const AdamState& state, std::int64_t t);

// Increments t, then applies the bias-corrected Adam update. A non-finite
// gradient throws TrainingFault before anything is modified.
void adam_step(std::vector<LayerParams>& params, const std::vector<LayerParams>& grads, AdamState& state);

// ---- gradient checking -----------------------------------------------------

// Central differences of `loss` against `analytic` for every entry of `params`.
// Returns max |a - n| / max(|a|, |n|, 1e-6).
double grad_check(const std::function<double()>& loss, std::span<double> params, std::span<const double> analytic,
                  double perturbation = 1e-5);

// ---- checkpoints -------------------------------------------------------------

constexpr int kCheckpointVersion = 1;

struct NamedNetwork {
    std::string name;
    std::vector<LayerParams> layers;
    std::optional<AdamState> adam;
};

nlohmann::json to_json(const LayerParams& p);
LayerParams layer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdamState& s);
AdamState adam_from_json(const nlohmann::json& j);

// Writes/reads a versioned JSON document holding the named layers and the
// optimizer state. Doubles round-trip exactly.
void save_checkpoint(const std::string& path, const NamedNetwork& net);
NamedNetwork load_checkpoint(const std::string& path);

}  // namespace rangegan::net
