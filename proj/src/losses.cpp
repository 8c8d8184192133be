#include "rangegan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "rangegan/errors.hpp"

namespace rangegan::losses {

using net::log_sigmoid;
using net::sigmoid;

std::vector<double> RangeCondition::encode() const {
    std::vector<double> out;
    out.reserve(2 * bounds.size());
    for (const auto& b : bounds) {
        out.push_back(b.lb);
        out.push_back(b.ub);
    }
    return out;
}

void RangeCondition::validate() const {
    if (bounds.empty()) throw UsageError("range condition has no bounds");
    for (std::size_t k = 0; k < bounds.size(); ++k) {
        const auto& b = bounds[k];
        if (!(b.lb >= 0.0 && b.lb <= 1.0 && b.ub >= 0.0 && b.ub <= 1.0))
            throw UsageError("range condition " + std::to_string(k) + " has bounds outside [0,1]");
        if (b.lb > b.ub) throw UsageError("range condition " + std::to_string(k) + " has lb > ub");
    }
}

double satisfaction_probability(double y_pred, double lb, double ub, double phi) {
    return sigmoid(phi * (y_pred - lb)) - sigmoid(phi * (y_pred - ub));
}

// sigma(a) - sigma(b) = sigma(a) sigma(-b) (1 - e^{-(a-b)})
double range_nll(double y_pred, double lb, double ub, double phi) {
    if (!(ub > lb)) throw UsageError("range loss needs lb < ub");
    const double a = phi * (y_pred - lb);
    const double b = phi * (y_pred - ub);
    return -(log_sigmoid(a) + log_sigmoid(-b) + std::log(-std::expm1(-(a - b))));
}

double range_nll_derivative(double y_pred, double lb, double ub, double phi) {
    const double a = phi * (y_pred - lb);
    const double b = phi * (y_pred - ub);
    return -phi * (sigmoid(-a) - sigmoid(b));
}

LossValue range_loss(std::span<const double> y_preds, double lb, double ub, double phi) {
    if (y_preds.empty()) throw UsageError("range_loss on an empty batch");
    LossValue out;
    out.grad.assign(y_preds.size(), 0.0);
    std::size_t violators = 0;
    for (double y : y_preds)
        if ((y - ub) * (y - lb) >= 0.0) ++violators;
    if (violators == 0) return out;
    const double inv = 1.0 / static_cast<double>(violators);
    for (std::size_t i = 0; i < y_preds.size(); ++i) {
        const double y = y_preds[i];
        if ((y - ub) * (y - lb) < 0.0) continue;
        out.value += range_nll(y, lb, ub, phi) * inv;
        out.grad[i] = range_nll_derivative(y, lb, ub, phi) * inv;
    }
    return out;
}

namespace {

// Adds |mean(y in segment) - (lo + hi)/2| * weight and its gradient.
double segment_deviation(std::span<const double> y, std::span<const std::size_t> members, double lo, double hi,
                         double weight, std::vector<double>& grad) {
    if (members.empty()) return 0.0;
    double mean = 0.0;
    for (std::size_t i : members) mean += y[i];
    mean /= static_cast<double>(members.size());
    const double dev = mean - 0.5 * (lo + hi);
    const double sign = dev > 0.0 ? 1.0 : (dev < 0.0 ? -1.0 : 0.0);
    const double g = weight * sign / static_cast<double>(members.size());
    for (std::size_t i : members) grad[i] += g;
    return weight * std::abs(dev);
}

}  // namespace

LossValue uniformity_loss(std::span<const double> y_preds, double lb, double ub, std::span<const double> slices) {
    if (y_preds.empty()) throw UsageError("uniformity_loss on an empty batch");
    if (slices.empty()) throw UsageError("uniformity_loss needs at least one slice point");
    LossValue out;
    out.grad.assign(y_preds.size(), 0.0);

    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < y_preds.size(); ++i)
        if ((y_preds[i] - ub) * (y_preds[i] - lb) <= 0.0) inside.push_back(i);
    if (inside.empty()) return out;

    const double weight = 1.0 / static_cast<double>(slices.size());
    std::vector<std::size_t> upper, lower;
    for (double eps : slices) {
        upper.clear();
        lower.clear();
        for (std::size_t i : inside) {
            const double y = y_preds[i];
            if ((y - ub) * (y - eps) <= 0.0) upper.push_back(i);
            if ((y - lb) * (y - eps) <= 0.0) lower.push_back(i);
        }
        out.value += segment_deviation(y_preds, upper, eps, ub, weight, out.grad);
        out.value += segment_deviation(y_preds, lower, lb, eps, weight, out.grad);
    }
    return out;
}

std::vector<double> draw_slices(double lb, double ub, std::size_t k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lb, ub);
    std::vector<double> s(k);
    for (auto& v : s) v = dist(rng);
    return s;
}

LossValue uniformity_loss(std::span<const double> y_preds, double lb, double ub, std::size_t k,
                          std::mt19937_64& rng) {
    if (k == 0) throw UsageError("uniformity_loss needs K >= 1");
    const auto slices = draw_slices(lb, ub, k, rng);
    return uniformity_loss(y_preds, lb, ub, slices);
}

GanLosses gan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
    if (d_real.empty() || d_fake.empty()) throw UsageError("gan_losses on an empty batch");
    auto clamp = [](double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); };
    double real_term = 0.0, fake_term = 0.0, gen_term = 0.0;
    for (double p : d_real) real_term -= std::log(clamp(p));
    for (double p : d_fake) {
        fake_term -= std::log(1.0 - clamp(p));
        gen_term -= std::log(clamp(p));
    }
    const double nr = static_cast<double>(d_real.size()), nf = static_cast<double>(d_fake.size());
    return {real_term / nr + fake_term / nf, gen_term / nf};
}

DiscriminatorLoss discriminator_loss(std::span<const double> real_logits, std::span<const double> fake_logits) {
    if (real_logits.empty() || fake_logits.empty()) throw UsageError("discriminator_loss on an empty batch");
    DiscriminatorLoss out;
    const double nr = static_cast<double>(real_logits.size()), nf = static_cast<double>(fake_logits.size());
    out.grad_real.resize(real_logits.size());
    out.grad_fake.resize(fake_logits.size());
    for (std::size_t i = 0; i < real_logits.size(); ++i) {
        out.value -= log_sigmoid(real_logits[i]) / nr;
        out.grad_real[i] = -sigmoid(-real_logits[i]) / nr;
    }
    for (std::size_t i = 0; i < fake_logits.size(); ++i) {
        out.value -= log_sigmoid(-fake_logits[i]) / nf;
        out.grad_fake[i] = sigmoid(fake_logits[i]) / nf;
    }
    return out;
}

LossValue generator_adversarial_loss(std::span<const double> fake_logits) {
    if (fake_logits.empty()) throw UsageError("generator_adversarial_loss on an empty batch");
    LossValue out;
    const double n = static_cast<double>(fake_logits.size());
    out.grad.resize(fake_logits.size());
    for (std::size_t i = 0; i < fake_logits.size(); ++i) {
        out.value -= log_sigmoid(fake_logits[i]) / n;
        out.grad[i] = -sigmoid(-fake_logits[i]) / n;
    }
    return out;
}

double generator_total_loss(double adversarial, double range, double uniformity, const LossWeights& w) {
    return adversarial + w.lambda1 * range + w.lambda2 * uniformity;
}

ConditionLosses condition_losses(const net::Matrix& predictions, std::span<const std::size_t> label_columns,
                                 const RangeCondition& cond, double phi,
                                 const std::vector<std::vector<double>>& slices) {
    if (label_columns.size() != cond.size() || slices.size() != cond.size())
        throw ConfigurationError("condition_losses: label/condition/slice counts differ");
    const std::size_t n = predictions.rows;
    ConditionLosses out;
    out.grad_range = net::Matrix(n, predictions.cols);
    out.grad_uniformity = net::Matrix(n, predictions.cols);

    std::vector<std::size_t> satisfying;
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < cond.size() && ok; ++k)
            ok = cond.bounds[k].contains(predictions(i, label_columns[k]));
        if (ok) satisfying.push_back(i);
    }

    for (std::size_t k = 0; k < cond.size(); ++k) {
        const std::size_t c = label_columns[k];
        if (c >= predictions.cols) throw ConfigurationError("condition_losses: label column out of range");
        const auto& b = cond.bounds[k];
        const net::Vector y = net::column(predictions, c);

        const LossValue r = range_loss(y, b.lb, b.ub, phi);
        out.range += r.value;
        for (std::size_t i = 0; i < n; ++i) out.grad_range(i, c) += r.grad[i];

        if (satisfying.empty()) continue;
        std::vector<double> sub(satisfying.size());
        for (std::size_t s = 0; s < satisfying.size(); ++s) sub[s] = y[satisfying[s]];
        const LossValue u = uniformity_loss(sub, b.lb, b.ub, slices[k]);
        out.uniformity += u.value;
        for (std::size_t s = 0; s < satisfying.size(); ++s) out.grad_uniformity(satisfying[s], c) += u.grad[s];
    }
    return out;
}

}  // namespace rangegan::losses
