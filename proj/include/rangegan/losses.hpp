#pragma once

// Training objectives: vanilla GAN terms, the sigmoid-bump satisfaction
// probability, the range loss applied to violating samples, the slice-based
// uniformity loss and their weighted sum.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "rangegan/netcore.hpp"

namespace rangegan::losses {

struct Interval {
    double lb = 0.0;
    double ub = 1.0;

    double width() const { return ub - lb; }
    double center() const { return 0.5 * (lb + ub); }
    // Boundary values count as inside.
    bool contains(double y) const { return (y - ub) * (y - lb) <= 0.0; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

// One [lb, ub] per constrained label, in normalized label units.
struct RangeCondition {
    std::vector<Interval> bounds;

    std::size_t size() const { return bounds.size(); }
    // Generator conditioning vector [lb_1, ub_1, lb_2, ub_2, ...].
    std::vector<double> encode() const;
    // Throws UsageError unless every bound lies in [0,1] with lb <= ub.
    void validate() const;

    friend bool operator==(const RangeCondition&, const RangeCondition&) = default;
};

struct LossWeights {
    double phi = 20.0;
    double lambda1 = 2.0;
    double lambda2 = 1.0;
    std::size_t slices = 5;
};

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // d value / d input, same length as the input
};

// sigma(phi (y - lb)) - sigma(phi (y - ub)); bump-shaped, peaks at the midpoint.
double satisfaction_probability(double y_pred, double lb, double ub, double phi);
// -log of the above, evaluated in log space so it stays finite far outside.
double range_nll(double y_pred, double lb, double ub, double phi);
double range_nll_derivative(double y_pred, double lb, double ub, double phi);

// Mean of range_nll over samples with (y - ub)(y - lb) >= 0; 0 when none violate.
// Samples strictly inside contribute neither loss nor gradient.
LossValue range_loss(std::span<const double> y_preds, double lb, double ub, double phi);

// Slice-mean deviation over samples inside [lb, ub], averaged over the given
// slice points. Empty segments contribute 0; no satisfying samples gives 0.
LossValue uniformity_loss(std::span<const double> y_preds, double lb, double ub, std::span<const double> slices);
// Draws `k` slice points uniformly in [lb, ub] from `rng` first.
LossValue uniformity_loss(std::span<const double> y_preds, double lb, double ub, std::size_t k,
                          std::mt19937_64& rng);
std::vector<double> draw_slices(double lb, double ub, std::size_t k, std::mt19937_64& rng);

struct GanLosses {
    double discriminator = 0.0;
    double generator = 0.0;
};

// Probabilities are clamped to [1e-12, 1 - 1e-12].
GanLosses gan_losses(std::span<const double> d_real, std::span<const double> d_fake);

struct DiscriminatorLoss {
    double value = 0.0;
    std::vector<double> grad_real;  // w.r.t. real logits
    std::vector<double> grad_fake;  // w.r.t. fake logits
};

// Same objectives as gan_losses, on logits, with gradients.
DiscriminatorLoss discriminator_loss(std::span<const double> real_logits, std::span<const double> fake_logits);
// Non-saturating -mean log D(G(z)).
LossValue generator_adversarial_loss(std::span<const double> fake_logits);

double generator_total_loss(double adversarial, double range, double uniformity, const LossWeights& w);

// Range and uniformity terms for several constrained labels at once.
struct ConditionLosses {
    double range = 0.0;
    double uniformity = 0.0;
    net::Matrix grad_range;       // N x predictions.cols
    net::Matrix grad_uniformity;  // N x predictions.cols
};

// `predictions` holds every estimator output column; `label_columns[k]` names
// the column constrained by cond.bounds[k]. Range losses add across labels.
// Uniformity adds across labels but only over samples satisfying every bound.
// `slices[k]` are the frozen slice points for label k.
ConditionLosses condition_losses(const net::Matrix& predictions, std::span<const std::size_t> label_columns,
                                 const RangeCondition& cond, double phi,
                                 const std::vector<std::vector<double>>& slices);

}  // namespace rangegan::losses
