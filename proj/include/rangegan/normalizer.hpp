#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rangegan::sampling {

// Per-label affine map of raw attribute values onto [0,1] using the fitted
// data's extremes. Out-of-sample values are mapped, never clipped.
struct LabelNormalizer {
    std::vector<double> raw_min;
    std::vector<double> raw_max;

    // Fits min/max per column; `columns[l]` holds every raw value of label l.
    static LabelNormalizer fit(const std::vector<std::vector<double>>& columns);

    std::size_t size() const { return raw_min.size(); }
    double normalize(double raw, std::size_t label) const;
    double denormalize(double normalized, std::size_t label) const;
    // Throws ConfigurationError when raw_max <= raw_min for some label.
    void validate() const;

    friend bool operator==(const LabelNormalizer&, const LabelNormalizer&) = default;
};

}  // namespace rangegan::sampling
