#include "rangegan/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rangegan/errors.hpp"

namespace rangegan::net {

using nlohmann::json;

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw ConfigurationError(std::string(what) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                                 std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                 std::to_string(b.cols));
    }
}

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m;
    m.rows = rows.size();
    m.cols = rows.size() ? rows.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows) {
        if (r.size() != m.cols) throw ConfigurationError("Matrix::from_rows: ragged rows");
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = m.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Vector column(const Matrix& m, std::size_t c) {
    Vector out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) out[i] = m(i, c);
    return out;
}

void LayerParams::validate() const {
    const std::size_t out = weight.rows;
    if (weight.data.size() != weight.rows * weight.cols) throw ConfigurationError("weight data length mismatch");
    if (bias.size() != out) throw ConfigurationError("bias length does not match weight rows");
    auto check_vec = [&](const std::optional<Vector>& v, const char* name) {
        if (v && v->size() != out) throw ConfigurationError(std::string(name) + " length does not match weight rows");
    };
    check_vec(bn_gamma, "bn_gamma");
    check_vec(bn_beta, "bn_beta");
    check_vec(running_mean, "running_mean");
    check_vec(running_var, "running_var");
    if (bn_gamma.has_value() != bn_beta.has_value()) throw ConfigurationError("bn_gamma/bn_beta must come together");
    if (cbn_weight_gamma.has_value() != cbn_weight_beta.has_value())
        throw ConfigurationError("cbn weights must come together");
    if (cbn_weight_gamma) {
        if (!bn_gamma) throw ConfigurationError("conditional batch norm requires bn parameters");
        if (cbn_weight_gamma->rows != out || cbn_weight_beta->rows != out ||
            cbn_weight_gamma->cols != cbn_weight_beta->cols)
            throw ConfigurationError("cbn weight shapes inconsistent");
    }
    if (running_var && std::any_of(running_var->begin(), running_var->end(), [](double v) { return v < 0.0; }))
        throw ConfigurationError("running_var has negative entries");
}

LayerParams make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng, double weight_scale) {
    LayerParams p;
    p.weight = Matrix(out, in);
    p.bias.assign(out, 0.0);
    std::normal_distribution<double> normal(0.0, weight_scale / std::sqrt(static_cast<double>(in)));
    for (auto& w : p.weight.data) w = normal(rng);
    return p;
}

void add_batchnorm(LayerParams& layer) {
    const std::size_t out = layer.out_dim();
    layer.bn_gamma = Vector(out, 1.0);
    layer.bn_beta = Vector(out, 0.0);
    layer.running_mean = Vector(out, 0.0);
    layer.running_var = Vector(out, 1.0);
}

void add_conditional_batchnorm(LayerParams& layer, std::size_t cond_dim) {
    add_batchnorm(layer);
    layer.cbn_weight_gamma = Matrix(layer.out_dim(), cond_dim);
    layer.cbn_weight_beta = Matrix(layer.out_dim(), cond_dim);
}

LayerParams zeros_like(const LayerParams& p) {
    LayerParams z;
    z.weight = Matrix(p.weight.rows, p.weight.cols);
    z.bias.assign(p.bias.size(), 0.0);
    if (p.bn_gamma) z.bn_gamma = Vector(p.bn_gamma->size(), 0.0);
    if (p.bn_beta) z.bn_beta = Vector(p.bn_beta->size(), 0.0);
    if (p.cbn_weight_gamma) z.cbn_weight_gamma = Matrix(p.cbn_weight_gamma->rows, p.cbn_weight_gamma->cols);
    if (p.cbn_weight_beta) z.cbn_weight_beta = Matrix(p.cbn_weight_beta->rows, p.cbn_weight_beta->cols);
    return z;
}

std::vector<LayerParams> zeros_like(const std::vector<LayerParams>& ps) {
    std::vector<LayerParams> out;
    out.reserve(ps.size());
    for (const auto& p : ps) out.push_back(zeros_like(p));
    return out;
}

std::vector<std::span<double>> trainable_buffers(LayerParams& p) {
    std::vector<std::span<double>> out{p.weight.data, p.bias};
    if (p.bn_gamma) out.emplace_back(*p.bn_gamma);
    if (p.bn_beta) out.emplace_back(*p.bn_beta);
    if (p.cbn_weight_gamma) out.emplace_back(p.cbn_weight_gamma->data);
    if (p.cbn_weight_beta) out.emplace_back(p.cbn_weight_beta->data);
    return out;
}

std::vector<std::span<const double>> trainable_buffers(const LayerParams& p) {
    std::vector<std::span<const double>> out{p.weight.data, p.bias};
    if (p.bn_gamma) out.emplace_back(*p.bn_gamma);
    if (p.bn_beta) out.emplace_back(*p.bn_beta);
    if (p.cbn_weight_gamma) out.emplace_back(p.cbn_weight_gamma->data);
    if (p.cbn_weight_beta) out.emplace_back(p.cbn_weight_beta->data);
    return out;
}

std::size_t parameter_count(const std::vector<LayerParams>& ps) {
    std::size_t n = 0;
    for (const auto& p : ps)
        for (auto buf : trainable_buffers(p)) n += buf.size();
    return n;
}

std::uint64_t parameter_hash(const std::vector<LayerParams>& ps) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::span<const double> buf) {
        for (double v : buf) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ull;
            }
        }
    };
    for (const auto& p : ps) {
        for (auto buf : trainable_buffers(p)) mix(buf);
        if (p.running_mean) mix(*p.running_mean);
        if (p.running_var) mix(*p.running_var);
    }
    return h;
}

// ---- linear ----------------------------------------------------------------

Matrix linear_forward(const Matrix& x, const LayerParams& layer) {
    if (x.cols != layer.weight.cols) {
        throw ConfigurationError("linear_forward: input has " + std::to_string(x.cols) + " columns, layer expects " +
                                 std::to_string(layer.weight.cols));
    }
    const std::size_t n = x.rows, in = x.cols, out = layer.weight.rows;
    // in x out copy so the inner loop runs along contiguous outputs
    std::vector<double> wt(in * out);
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t k = 0; k < in; ++k) wt[k * out + o] = layer.weight.data[o * in + k];
    Matrix y(n, out);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data.data() + i * in;
        double* yi = y.data.data() + i * out;
        std::copy(layer.bias.begin(), layer.bias.end(), yi);
        for (std::size_t k = 0; k < in; ++k) {
            const double xk = xi[k];
            const double* w = wt.data() + k * out;
            for (std::size_t o = 0; o < out; ++o) yi[o] += xk * w[o];
        }
    }
    return y;
}

Matrix linear_backward(const Matrix& x, const Matrix& d_out, const LayerParams& layer, LayerParams* grads) {
    const std::size_t n = x.rows, in = x.cols, out = layer.weight.rows;
    if (d_out.rows != n || d_out.cols != out) throw ConfigurationError("linear_backward: gradient shape mismatch");
    Matrix dx(n, in);
    for (std::size_t i = 0; i < n; ++i) {
        const double* dyi = d_out.data.data() + i * out;
        double* dxi = dx.data.data() + i * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dyi[o];
            if (g == 0.0) continue;
            const double* w = layer.weight.data.data() + o * in;
            for (std::size_t k = 0; k < in; ++k) dxi[k] += g * w[k];
        }
    }
    if (grads) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.data.data() + i * in;
            const double* dyi = d_out.data.data() + i * out;
            for (std::size_t o = 0; o < out; ++o) {
                const double g = dyi[o];
                grads->bias[o] += g;
                if (g == 0.0) continue;
                double* gw = grads->weight.data.data() + o * in;
                for (std::size_t k = 0; k < in; ++k) gw[k] += g * xi[k];
            }
        }
    }
    return dx;
}

// ---- activations -------------------------------------------------------------

double selu(double x) { return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x); }

double selu_derivative(double x) { return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

Matrix selu_forward(const Matrix& pre) {
    Matrix out(pre.rows, pre.cols);
    std::transform(pre.data.begin(), pre.data.end(), out.data.begin(), selu);
    return out;
}

Matrix selu_backward(const Matrix& pre, const Matrix& d_out) {
    require_same_shape(pre, d_out, "selu_backward");
    Matrix dx(pre.rows, pre.cols);
    for (std::size_t i = 0; i < pre.data.size(); ++i) dx.data[i] = d_out.data[i] * selu_derivative(pre.data[i]);
    return dx;
}

Matrix sigmoid_forward(const Matrix& pre) {
    Matrix out(pre.rows, pre.cols);
    std::transform(pre.data.begin(), pre.data.end(), out.data.begin(), sigmoid);
    return out;
}

Matrix sigmoid_backward(const Matrix& out, const Matrix& d_out) {
    require_same_shape(out, d_out, "sigmoid_backward");
    Matrix dx(out.rows, out.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) dx.data[i] = d_out.data[i] * out.data[i] * (1.0 - out.data[i]);
    return dx;
}

// ---- batch norm ----------------------------------------------------------------

Vector effective_gamma(const LayerParams& layer, std::span<const double> cond) {
    Vector g = layer.bn_gamma ? *layer.bn_gamma : Vector(layer.out_dim(), 1.0);
    if (layer.cbn_weight_gamma) {
        const Matrix& w = *layer.cbn_weight_gamma;
        for (std::size_t j = 0; j < w.rows; ++j)
            for (std::size_t c = 0; c < w.cols; ++c) g[j] += w(j, c) * cond[c];
    }
    return g;
}

Vector effective_beta(const LayerParams& layer, std::span<const double> cond) {
    Vector b = layer.bn_beta ? *layer.bn_beta : Vector(layer.out_dim(), 0.0);
    if (layer.cbn_weight_beta) {
        const Matrix& w = *layer.cbn_weight_beta;
        for (std::size_t j = 0; j < w.rows; ++j)
            for (std::size_t c = 0; c < w.cols; ++c) b[j] += w(j, c) * cond[c];
    }
    return b;
}

namespace {

void check_bn_inputs(const Matrix& h, std::span<const double> cond, const LayerParams& layer) {
    if (!layer.has_batchnorm()) throw ConfigurationError("batch norm applied to a layer without bn parameters");
    if (h.cols != layer.out_dim()) throw ConfigurationError("batch norm: feature count mismatch");
    if (cond.size() != layer.cond_dim()) {
        throw UsageError("conditional batch norm: condition has " + std::to_string(cond.size()) +
                         " entries, layer expects " + std::to_string(layer.cond_dim()));
    }
}

Matrix apply_running_stats(const Matrix& h, std::span<const double> cond, const LayerParams& layer,
                           BatchNormTape* tape) {
    const std::size_t n = h.rows, d = h.cols;
    const Vector gamma = effective_gamma(layer, cond);
    const Vector beta = effective_beta(layer, cond);
    const Vector& rm = *layer.running_mean;
    const Vector& rv = *layer.running_var;
    Vector inv_std(d);
    for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(std::max(rv[j], kBatchNormEpsilon));
    Matrix xhat(n, d), y(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (h(i, j) - rm[j]) * inv_std[j];
            y(i, j) = gamma[j] * xhat(i, j) + beta[j];
        }
    if (tape) {
        tape->normalized = std::move(xhat);
        tape->inv_std = std::move(inv_std);
        tape->floored.assign(d, 0.0);
        tape->scale = gamma;
        tape->mode = Mode::Eval;
    }
    return y;
}

}  // namespace

Matrix cond_batchnorm_forward(const Matrix& h, std::span<const double> cond, LayerParams& layer, Mode mode,
                              BatchNormTape* tape) {
    check_bn_inputs(h, cond, layer);
    if (mode == Mode::Eval) return apply_running_stats(h, cond, layer, tape);

    const std::size_t n = h.rows, d = h.cols;
    if (n < 2) throw UsageError("batch norm in train mode needs at least 2 samples, got " + std::to_string(n));
    const Vector gamma = effective_gamma(layer, cond);
    const Vector beta = effective_beta(layer, cond);

    Vector mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += h(i, j);
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = h(i, j) - mean[j];
            var[j] += c * c;
        }
    for (auto& v : var) v /= static_cast<double>(n);

    Vector inv_std(d), floored(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        if (var[j] < kBatchNormEpsilon) floored[j] = 1.0;
        inv_std[j] = 1.0 / std::sqrt(std::max(var[j], kBatchNormEpsilon));
    }

    Matrix xhat(n, d), y(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (h(i, j) - mean[j]) * inv_std[j];
            y(i, j) = gamma[j] * xhat(i, j) + beta[j];
        }

    if (layer.running_mean && layer.running_var) {
        Vector& rm = *layer.running_mean;
        Vector& rv = *layer.running_var;
        for (std::size_t j = 0; j < d; ++j) {
            rm[j] = kBatchNormMomentum * rm[j] + (1.0 - kBatchNormMomentum) * mean[j];
            rv[j] = kBatchNormMomentum * rv[j] + (1.0 - kBatchNormMomentum) * var[j];
        }
    }

    if (tape) {
        tape->normalized = std::move(xhat);
        tape->inv_std = std::move(inv_std);
        tape->floored = std::move(floored);
        tape->scale = gamma;
        tape->mode = Mode::Train;
    }
    return y;
}

Matrix cond_batchnorm_eval(const Matrix& h, std::span<const double> cond, const LayerParams& layer,
                           BatchNormTape* tape) {
    check_bn_inputs(h, cond, layer);
    return apply_running_stats(h, cond, layer, tape);
}

Matrix cond_batchnorm_backward(const BatchNormTape& tape, const Matrix& d_out, std::span<const double> cond,
                               LayerParams* grads) {
    const Matrix& xhat = tape.normalized;
    require_same_shape(xhat, d_out, "cond_batchnorm_backward");
    const std::size_t n = xhat.rows, d = xhat.cols;

    Vector d_gamma(d, 0.0), d_beta(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            d_gamma[j] += d_out(i, j) * xhat(i, j);
            d_beta[j] += d_out(i, j);
        }

    Matrix dx(n, d);
    if (tape.mode == Mode::Eval) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) dx(i, j) = d_out(i, j) * tape.scale[j] * tape.inv_std[j];
    } else {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
            // sums of dL/dxhat and dL/dxhat * xhat over the batch
            const double sum_dxhat = d_beta[j] * tape.scale[j];
            const double sum_dxhat_xhat = d_gamma[j] * tape.scale[j];
            const bool floored = tape.floored[j] != 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dxhat = d_out(i, j) * tape.scale[j];
                double g = dxhat - sum_dxhat * inv_n;
                if (!floored) g -= xhat(i, j) * sum_dxhat_xhat * inv_n;
                dx(i, j) = g * tape.inv_std[j];
            }
        }
    }

    if (grads) {
        for (std::size_t j = 0; j < d; ++j) {
            (*grads->bn_gamma)[j] += d_gamma[j];
            (*grads->bn_beta)[j] += d_beta[j];
        }
        if (grads->cbn_weight_gamma) {
            Matrix& wg = *grads->cbn_weight_gamma;
            Matrix& wb = *grads->cbn_weight_beta;
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t c = 0; c < wg.cols; ++c) {
                    wg(j, c) += d_gamma[j] * cond[c];
                    wb(j, c) += d_beta[j] * cond[c];
                }
        }
    }
    return dx;
}

Matrix add(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    add_in_place(out, b);
    return out;
}

void add_in_place(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

// ---- Adam ----------------------------------------------------------------------

AdamState make_adam(const std::vector<LayerParams>& params, double base_lr, double decay_factor,
                    std::int64_t decay_interval, double beta1, double beta2, double epsilon) {
    if (!(base_lr > 0.0)) throw ConfigurationError("Adam base_lr must be positive");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigurationError("Adam decay_factor must be in (0,1]");
    if (decay_interval <= 0) throw ConfigurationError("Adam decay_interval must be positive");
    AdamState s;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    s.base_lr = base_lr;
    s.decay_factor = decay_factor;
    s.decay_interval = decay_interval;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
}

double effective_lr(const AdamState& state, std::int64_t t) {
    return state.base_lr * std::pow(state.decay_factor, static_cast<double>(t / state.decay_interval));
}

void adam_step(std::vector<LayerParams>& params, const std::vector<LayerParams>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size())
        throw ConfigurationError("adam_step: layer count mismatch");
    for (std::size_t l = 0; l < grads.size(); ++l) {
        for (auto buf : trainable_buffers(grads[l])) {
            for (double g : buf) {
                if (!std::isfinite(g)) {
                    throw TrainingFault("adam_step: non-finite gradient in layer " + std::to_string(l) +
                                        " at step " + std::to_string(state.t + 1));
                }
            }
        }
    }

    state.t += 1;
    const double lr = effective_lr(state, state.t);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    for (std::size_t l = 0; l < params.size(); ++l) {
        auto p = trainable_buffers(params[l]);
        auto g = trainable_buffers(grads[l]);
        auto m = trainable_buffers(state.m[l]);
        auto v = trainable_buffers(state.v[l]);
        if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
            throw ConfigurationError("adam_step: buffer structure mismatch in layer " + std::to_string(l));
        for (std::size_t b = 0; b < p.size(); ++b) {
            if (p[b].size() != g[b].size() || p[b].size() != m[b].size())
                throw ConfigurationError("adam_step: buffer size mismatch in layer " + std::to_string(l));
            for (std::size_t k = 0; k < p[b].size(); ++k) {
                m[b][k] = state.beta1 * m[b][k] + (1.0 - state.beta1) * g[b][k];
                v[b][k] = state.beta2 * v[b][k] + (1.0 - state.beta2) * g[b][k] * g[b][k];
                const double m_hat = m[b][k] / bc1;
                const double v_hat = v[b][k] / bc2;
                p[b][k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
            }
        }
    }
}

// ---- gradient check --------------------------------------------------------------

double grad_check(const std::function<double()>& loss, std::span<double> params, std::span<const double> analytic,
                  double perturbation) {
    if (params.size() != analytic.size()) throw ConfigurationError("grad_check: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + perturbation;
        const double up = loss();
        params[i] = saved - perturbation;
        const double down = loss();
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * perturbation);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

json matrix_json(const Matrix& m) { return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from(const json& j) {
    Matrix m;
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw ConfigurationError("checkpoint matrix data length mismatch");
    return m;
}

json layers_json(const std::vector<LayerParams>& layers) {
    json arr = json::array();
    for (const auto& l : layers) arr.push_back(to_json(l));
    return arr;
}

std::vector<LayerParams> layers_from(const json& j) {
    std::vector<LayerParams> out;
    for (const auto& l : j) out.push_back(layer_from_json(l));
    return out;
}

}  // namespace

json to_json(const LayerParams& p) {
    json j{{"weight", matrix_json(p.weight)}, {"bias", p.bias}};
    if (p.bn_gamma) j["bn_gamma"] = *p.bn_gamma;
    if (p.bn_beta) j["bn_beta"] = *p.bn_beta;
    if (p.cbn_weight_gamma) j["cbn_weight_gamma"] = matrix_json(*p.cbn_weight_gamma);
    if (p.cbn_weight_beta) j["cbn_weight_beta"] = matrix_json(*p.cbn_weight_beta);
    if (p.running_mean) j["running_mean"] = *p.running_mean;
    if (p.running_var) j["running_var"] = *p.running_var;
    return j;
}

LayerParams layer_from_json(const json& j) {
    LayerParams p;
    p.weight = matrix_from(j.at("weight"));
    p.bias = j.at("bias").get<Vector>();
    if (j.contains("bn_gamma")) p.bn_gamma = j["bn_gamma"].get<Vector>();
    if (j.contains("bn_beta")) p.bn_beta = j["bn_beta"].get<Vector>();
    if (j.contains("cbn_weight_gamma")) p.cbn_weight_gamma = matrix_from(j["cbn_weight_gamma"]);
    if (j.contains("cbn_weight_beta")) p.cbn_weight_beta = matrix_from(j["cbn_weight_beta"]);
    if (j.contains("running_mean")) p.running_mean = j["running_mean"].get<Vector>();
    if (j.contains("running_var")) p.running_var = j["running_var"].get<Vector>();
    p.validate();
    return p;
}

json to_json(const AdamState& s) {
    return json{{"t", s.t},
                {"base_lr", s.base_lr},
                {"decay_factor", s.decay_factor},
                {"decay_interval", s.decay_interval},
                {"beta1", s.beta1},
                {"beta2", s.beta2},
                {"epsilon", s.epsilon},
                {"m", layers_json(s.m)},
                {"v", layers_json(s.v)}};
}

AdamState adam_from_json(const json& j) {
    AdamState s;
    s.t = j.at("t").get<std::int64_t>();
    s.base_lr = j.at("base_lr").get<double>();
    s.decay_factor = j.at("decay_factor").get<double>();
    s.decay_interval = j.at("decay_interval").get<std::int64_t>();
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.epsilon = j.at("epsilon").get<double>();
    s.m = layers_from(j.at("m"));
    s.v = layers_from(j.at("v"));
    return s;
}

void save_checkpoint(const std::string& path, const NamedNetwork& net) {
    json doc{{"format", "rangegan-checkpoint"},
             {"version", kCheckpointVersion},
             {"name", net.name},
             {"layers", layers_json(net.layers)}};
    if (net.adam) doc["adam"] = to_json(*net.adam);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

NamedNetwork load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigurationError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    if (doc.value("format", "") != "rangegan-checkpoint")
        throw ConfigurationError("checkpoint " + path + " has an unknown format tag");
    if (doc.value("version", 0) != kCheckpointVersion)
        throw ConfigurationError("checkpoint " + path + " has unsupported version");
    NamedNetwork net;
    net.name = doc.at("name").get<std::string>();
    net.layers = layers_from(doc.at("layers"));
    if (doc.contains("adam")) net.adam = adam_from_json(doc["adam"]);
    return net;
}

}  // namespace rangegan::net
