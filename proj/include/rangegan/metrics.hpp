#pragma once

// Condition satisfaction, quadratic entropy, condition sweeps over a trained
// generator, dataset baselines and report files.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rangegan/domain.hpp"
#include "rangegan/losses.hpp"
#include "rangegan/models.hpp"

namespace rangegan::metrics {

using losses::Interval;
using losses::RangeCondition;
using net::Matrix;

// Fraction of rows whose constrained labels all satisfy (y-ub)(y-lb) <= 0.
// `labels` is N x (all labels); `label_columns[k]` pairs with cond.bounds[k].
double satisfaction(const Matrix& labels, std::span<const std::size_t> label_columns, const RangeCondition& cond);
double satisfaction(std::span<const double> labels, const Interval& bound);

// (1/N^2) sum_i sum_j (y_i - y_j)^2 via 2 (E[y^2] - E[y]^2). 0 for an empty batch.
double quadratic_entropy(std::span<const double> labels);

enum class LabelerKind { Estimator, Exact, Data };
const char* to_string(LabelerKind k);

// Maps generated designs to normalized labels, either through the learned
// estimator or through the exact evaluator.
struct Labeler {
    LabelerKind kind = LabelerKind::Exact;
    const models::Estimator* estimator = nullptr;
    const sampling::LabelNormalizer* normalizer = nullptr;

    static Labeler exact(const sampling::LabelNormalizer& n) { return {LabelerKind::Exact, nullptr, &n}; }
    static Labeler learned(const models::Estimator& e) { return {LabelerKind::Estimator, &e, nullptr}; }

    // N x 2 normalized labels for N x 6 designs.
    Matrix operator()(const Matrix& designs) const;
};

// N x noise_dim standard-normal noise.
Matrix sample_noise(std::size_t n, std::size_t dim, std::mt19937_64& rng);
// Eval-mode generation of n designs under one condition.
Matrix generate_designs(const models::Generator& g, const RangeCondition& cond, std::size_t n, std::mt19937_64& rng);

struct SweepRow {
    std::vector<Interval> bounds;
    double range_size = 0.0;
    LabelerKind labeler = LabelerKind::Exact;
    double satisfaction = 0.0;
    double quadratic_entropy = 0.0;  // over satisfying samples only
    std::size_t n_samples = 0;
    std::size_t n_satisfying = 0;
};

struct SweepReport {
    std::vector<std::size_t> label_columns;
    std::vector<SweepRow> rows;
    std::string tag;  // free-form, e.g. "before" / "after"

    double mean_satisfaction() const;
    double std_satisfaction() const;
    double mean_entropy() const;
};

// n centres evenly spaced so that [c - r/2, c + r/2] stays inside [0,1].
std::vector<double> sweep_centers(double range_size, std::size_t n);

// One condition per centre on a single constrained label (label_columns has
// one entry) or, for several labels, on the full grid of centres (n per axis).
// Every condition draws n_samples designs from a stream seeded by (seed, index).
SweepReport condition_sweep(const models::Generator& g, const Labeler& labeler,
                            std::span<const std::size_t> label_columns, double range_size, std::size_t n_conditions,
                            std::size_t n_samples, std::uint64_t seed);

// Same windows as condition_sweep, scored against the dataset's labels.
SweepReport data_baseline(const domain::Dataset& ds, std::span<const std::size_t> label_columns, double range_size,
                          std::size_t n_conditions);

struct UniformityComparison {
    double range_size = 0.0;
    double entropy_with = 0.0;
    double entropy_without = 0.0;
    double satisfaction_with = 0.0;
    double satisfaction_without = 0.0;
    double ratio() const { return entropy_without > 0.0 ? entropy_with / entropy_without : 0.0; }
    double gap() const { return entropy_with - entropy_without; }
};

// Paired estimator-labelled sweeps of two generators that differ only in the
// uniformity weight.
std::vector<UniformityComparison> compare_uniformity(const models::Generator& with_uniformity,
                                                     const models::Generator& without_uniformity,
                                                     const models::Estimator& estimator,
                                                     std::span<const std::size_t> label_columns,
                                                     std::span<const double> range_sizes, std::size_t n_conditions,
                                                     std::size_t n_samples, std::uint64_t seed);

// CSV with one header line; bounds appear as center_/lb_/ub_<label name>.
std::string format_report_csv(std::span<const SweepReport> reports);
void write_report_csv(std::span<const SweepReport> reports, const std::string& path);

// Bin edges and densities of values over [0,1].
std::string format_histogram_csv(std::span<const double> values, std::size_t bins);

}  // namespace rangegan::metrics
