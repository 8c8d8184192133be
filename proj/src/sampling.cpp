#include "rangegan/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "rangegan/errors.hpp"

namespace rangegan::sampling {

LabelNormalizer LabelNormalizer::fit(const std::vector<std::vector<double>>& columns) {
    LabelNormalizer n;
    for (const auto& col : columns) {
        if (col.empty()) throw ConfigurationError("LabelNormalizer::fit on an empty column");
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        n.raw_min.push_back(*lo);
        n.raw_max.push_back(*hi);
    }
    n.validate();
    return n;
}

void LabelNormalizer::validate() const {
    if (raw_min.size() != raw_max.size()) throw ConfigurationError("normalizer min/max length mismatch");
    for (std::size_t l = 0; l < raw_min.size(); ++l) {
        if (!(raw_max[l] > raw_min[l]))
            throw ConfigurationError("normalizer for label " + std::to_string(l) + " has raw_max <= raw_min");
    }
}

double LabelNormalizer::normalize(double raw, std::size_t label) const {
    const double span = raw_max.at(label) - raw_min.at(label);
    if (!(span > 0.0)) throw ConfigurationError("normalizer span is zero for label " + std::to_string(label));
    return (raw - raw_min[label]) / span;
}

double LabelNormalizer::denormalize(double normalized, std::size_t label) const {
    return raw_min.at(label) + normalized * (raw_max.at(label) - raw_min.at(label));
}

losses::RangeCondition sample_condition(std::mt19937_64& rng, std::size_t n_labels) {
    losses::RangeCondition c;
    c.bounds.reserve(n_labels);
    for (std::size_t l = 0; l < n_labels; ++l) {
        std::uniform_real_distribution<double> lower(0.0, 1.0 - kMinConditionWidth);
        const double lb = lower(rng);
        std::uniform_real_distribution<double> upper(lb + kMinConditionWidth, 1.0);
        c.bounds.push_back({lb, std::min(upper(rng), 1.0)});
    }
    return c;
}

UniformLabelSampler::UniformLabelSampler(const domain::Dataset& ds) : n_rows_(ds.size()) {
    if (ds.size() == 0) throw UsageError("uniform label sampling needs a nonempty dataset");
    sorted_.resize(domain::kLabelCount);
    for (std::size_t l = 0; l < domain::kLabelCount; ++l) {
        auto& idx = sorted_[l];
        idx.reserve(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) idx.push_back({ds.normalized_label(i, l), i});
        values_.emplace_back(ds.size());
        for (const auto& e : idx) values_.back()[e.row] = e.value;
        std::sort(idx.begin(), idx.end(), [](const Entry& a, const Entry& b) {
            return a.value < b.value || (a.value == b.value && a.row < b.row);
        });
    }
}

std::size_t UniformLabelSampler::nearest(std::size_t label, double u) const {
    const auto& idx = sorted_.at(label);
    auto by_value = [](const Entry& e, double v) { return e.value < v; };
    // first entry with value >= u: lowest row among ties at that value
    const auto right = std::lower_bound(idx.begin(), idx.end(), u, by_value);
    if (right == idx.begin()) return right->row;
    if (right == idx.end()) {
        const auto left = std::lower_bound(idx.begin(), idx.end(), std::prev(right)->value, by_value);
        return left->row;
    }
    const auto left = std::lower_bound(idx.begin(), idx.end(), std::prev(right)->value, by_value);
    const double dl = u - left->value;
    const double dr = right->value - u;
    if (dl < dr) return left->row;
    if (dr < dl) return right->row;
    return std::min(left->row, right->row);
}

std::vector<std::size_t> UniformLabelSampler::sample(std::size_t batch_size, std::size_t label,
                                                     std::mt19937_64& rng) const {
    const auto& idx = sorted_.at(label);
    auto by_value = [](const Entry& e, double v) { return e.value < v; };
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::size_t> out(batch_size);
    for (auto& r : out) {
        r = nearest(label, unif(rng));
        // rows sharing the winning label value are one label; spread the pick over them
        const double v = label_value(label, r);
        const auto lo = std::lower_bound(idx.begin(), idx.end(), v, by_value);
        auto hi = lo;
        while (hi != idx.end() && hi->value == v) ++hi;
        const auto n = static_cast<std::size_t>(hi - lo);
        if (n > 1) r = lo[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)].row;
    }
    return out;
}

double UniformLabelSampler::label_value(std::size_t label, std::size_t row) const { return values_.at(label).at(row); }

std::vector<std::size_t> uniform_label_batch(const domain::Dataset& ds, std::size_t batch_size, std::size_t label,
                                             std::mt19937_64& rng) {
    return UniformLabelSampler(ds).sample(batch_size, label, rng);
}

}  // namespace rangegan::sampling
