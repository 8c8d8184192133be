#pragma once

// Estimator pretraining, the adversarial loop with range and uniformity terms,
// and one round of label-aware self-augmentation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rangegan/domain.hpp"
#include "rangegan/losses.hpp"
#include "rangegan/metrics.hpp"
#include "rangegan/models.hpp"

namespace rangegan::trainer {

enum class LabelSet { Aspect, Area, Both };

LabelSet parse_label_set(const std::string& s);  // aspect | area | both
const char* to_string(LabelSet s);
std::vector<std::size_t> label_columns(LabelSet s);

struct TrainConfig {
    std::uint64_t seed = 1;
    LabelSet labels = LabelSet::Aspect;

    std::size_t gan_steps = 10000;
    std::size_t batch_size = 32;
    double gen_lr = 3e-4;
    double disc_lr = 3e-4;
    double gan_lr_decay = 0.8;
    std::size_t gan_lr_decay_steps = 5000;
    double gan_beta1 = 0.5;
    double gan_beta2 = 0.999;

    std::size_t estimator_steps = 5000;
    std::size_t estimator_batch_size = 256;
    double estimator_lr = 1e-3;
    double estimator_lr_decay = 0.6;
    std::size_t estimator_lr_decay_steps = 2500;
    double estimator_beta1 = 0.9;
    double estimator_beta2 = 0.999;
    double holdout_fraction = 0.1;

    losses::LossWeights weights;

    std::size_t noise_dim = 16;
    std::vector<std::size_t> generator_widths{64, 64, 64};
    std::vector<std::size_t> discriminator_widths{64, 64, 64};
    std::vector<std::size_t> estimator_widths{64, 64, 64, 64};
    bool estimator_residual = true;

    std::size_t log_interval = 100;

    std::size_t n_pool = 2000;
    std::size_t augment_bins = 10;
    std::size_t pool_conditions = 20;
    double pool_width = 0.1;

    std::size_t sweep_conditions = 50;
    std::size_t sweep_samples = 500;
    double sweep_range = 0.1;

    // Throws ConfigurationError on a non-positive count or out-of-range value.
    void validate() const;
};

// Flat `key = value` lines; '#' starts a comment. Unknown keys and malformed
// values throw ConfigurationError naming the key. Keys absent from the text
// keep the value from `base`.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});
// Every field, one per line, in a form parse_config reads back.
std::string format_config(const TrainConfig& cfg);
// Field names with their defaults, for --help text.
std::vector<std::pair<std::string, std::string>> config_keys();

// Independent stream seeds derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct EstimatorReport {
    std::size_t train_rows = 0;
    std::size_t holdout_rows = 0;
    std::vector<double> holdout_mae;  // per label, normalized units
    double final_loss = 0.0;
};

struct EstimatorRun {
    models::Estimator estimator;
    net::AdamState adam;
    EstimatorReport report;
};

// Mean-squared error on normalized labels with uniform-label batches that
// alternate between labels. A fixed fraction of rows is held out for MAE.
EstimatorRun train_estimator(const domain::Dataset& ds, const TrainConfig& cfg);

struct LogRow {
    std::size_t step = 0;
    double d_loss = 0.0;
    double g_adversarial = 0.0;
    double range = 0.0;
    double uniformity = 0.0;
    double g_total = 0.0;
    double d_real = 0.0;  // mean D probability on the real batch
    double d_fake = 0.0;  // mean D probability on the generated batch
    double gen_lr = 0.0;
    double disc_lr = 0.0;
    double batch_satisfaction = 0.0;  // estimator-predicted, this batch
};

struct GanRun {
    models::Generator generator;
    models::Discriminator discriminator;
    net::AdamState gen_adam;
    net::AdamState disc_adam;
    std::vector<LogRow> log;
};

// One discriminator step then one generator step per iteration. Every batch
// shares one sampled condition; the estimator is only read. Non-finite losses
// throw TrainingFault naming the step and each component.
GanRun train_rangegan(const domain::Dataset& ds, const models::Estimator& est, const TrainConfig& cfg);

std::string format_log_csv(std::span<const LogRow> log, std::uint64_t seed);

// Indices into the pool chosen by the fill rule: for each bin with fewer
// rows than the fullest bin, take pool entries of that bin in pool order
// until the counts match or the bin's candidates run out. `pool_bins[i]` is
// the bin of pool entry i, or -1 for entries outside every bin.
std::vector<std::size_t> fill_bins(std::span<const std::size_t> counts, std::span<const int> pool_bins);

struct AugmentReport {
    std::vector<std::size_t> label_columns;
    std::vector<std::vector<std::size_t>> bins_before;  // per constrained label
    std::vector<std::vector<std::size_t>> bins_after;
    std::size_t pool_size = 0;
    std::size_t rows_added = 0;
};

struct AugmentResult {
    domain::Dataset dataset;
    AugmentReport report;
};

// Generates a pool over evenly spaced windows of each targeted label,
// labels it exactly and fills deficient bins label by label. Added rows are
// flagged Augmented; the normalizer is kept.
AugmentResult self_augment(const models::Generator& g, const domain::Dataset& ds,
                           std::span<const std::size_t> label_columns, std::size_t n_pool, std::size_t bins,
                           std::mt19937_64& rng, std::size_t pool_conditions = 20, double pool_width = 0.1);

struct RoundResult {
    AugmentResult augmented;
    EstimatorRun estimator;
    GanRun gan;
    metrics::SweepReport before;  // exact labeler, base generator
    metrics::SweepReport after;   // exact labeler, retrained generator
};

// self_augment, then a fresh estimator and a fresh GAN on the augmented set.
RoundResult augmentation_round(const domain::Dataset& ds, const models::Generator& base_generator,
                               const TrainConfig& cfg);

std::string format_bin_table(const AugmentReport& r);

// Checkpoint bundle: three networks plus a manifest with dimensions,
// normalizer bounds, label set, config and seed.
struct RunManifest {
    std::size_t noise_dim = 16;
    std::size_t cond_dim = 2;
    std::size_t n_labels = 1;
    LabelSet labels = LabelSet::Aspect;
    sampling::LabelNormalizer normalizer;
    std::uint64_t seed = 0;
    std::string dataset_path;
    std::string config_text;
};

struct TrainedModels {
    RunManifest manifest;
    models::Generator generator;
    models::Discriminator discriminator;
    models::Estimator estimator;
};

void save_run(const std::string& dir, const TrainedModels& m);
// Throws IoError for missing files and ConfigurationError for inconsistent shapes.
TrainedModels load_run(const std::string& dir);

}  // namespace rangegan::trainer
