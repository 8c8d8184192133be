#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "rangegan/domain.hpp"
#include "rangegan/losses.hpp"
#include "rangegan/normalizer.hpp"

namespace rangegan::sampling {

constexpr double kMinConditionWidth = 0.05;

// lb ~ U(0, 0.95), ub ~ U(lb + 0.05, 1) independently per label.
losses::RangeCondition sample_condition(std::mt19937_64& rng, std::size_t n_labels);

// Nearest-label lookup over a dataset, one sorted index per label.
class UniformLabelSampler {
public:
    explicit UniformLabelSampler(const domain::Dataset& ds);

    // Row whose normalized label is closest to u; ties go to the lower row index.
    std::size_t nearest(std::size_t label, double u) const;
    // Draws u ~ U(0,1) per slot and returns nearest rows (with replacement).
    // Rows holding exactly the same label value are drawn uniformly among
    // themselves, so a run of duplicates does not collapse onto one row.
    std::vector<std::size_t> sample(std::size_t batch_size, std::size_t label, std::mt19937_64& rng) const;

    std::size_t size() const { return n_rows_; }

private:
    struct Entry {
        double value;
        std::size_t row;
    };
    double label_value(std::size_t label, std::size_t row) const;

    std::vector<std::vector<Entry>> sorted_;  // per label, by (value, row)
    std::vector<std::vector<double>> values_;  // per label, by row
    std::size_t n_rows_ = 0;
};

std::vector<std::size_t> uniform_label_batch(const domain::Dataset& ds, std::size_t batch_size, std::size_t label,
                                             std::mt19937_64& rng);

}  // namespace rangegan::sampling
