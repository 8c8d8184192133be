#pragma once

// Parametric 2D aircraft planform: a fuselage rectangle crossed by a wing and
// a tail. Labels (aspect ratio, planform area ratio) have closed forms, so the
// exact evaluator is cheap and differentiable networks can be checked against it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rangegan/netcore.hpp"
#include "rangegan/normalizer.hpp"

namespace rangegan::domain {

constexpr std::size_t kDesignDim = 6;
constexpr std::size_t kLabelCount = 2;
constexpr std::size_t kAspectLabel = 0;
constexpr std::size_t kAreaLabel = 1;

// Normalized design vector in [0,1]^6: fuselage_length, fuselage_width,
// wingspan, wing_chord, tail_span, tail_chord.
using DesignParams = std::array<double, kDesignDim>;

struct PhysicalRange {
    double lo;
    double hi;
};

inline constexpr std::array<PhysicalRange, kDesignDim> kPhysicalRanges{{
    {0.3, 1.0},    // fuselage_length
    {0.02, 0.15},  // fuselage_width
    {0.3, 1.0},    // wingspan
    {0.05, 0.3},   // wing_chord
    {0.2, 0.5},    // tail_span
    {0.03, 0.15},  // tail_chord
}};

inline constexpr std::array<const char*, kLabelCount> kLabelNames{"aspect_ratio", "area_ratio"};

struct PhysicalDesign {
    double fuselage_length;
    double fuselage_width;
    double wingspan;
    double wing_chord;
    double tail_span;
    double tail_chord;
};

PhysicalDesign to_physical(const DesignParams& d);
DesignParams from_physical(const PhysicalDesign& p);

struct LabelVector {
    double aspect_ratio = 0.0;
    double area_ratio = 0.0;

    double operator[](std::size_t label) const { return label == kAspectLabel ? aspect_ratio : area_ratio; }
    friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

// Closed-form labels. Components outside [0,1] throw UsageError.
LabelVector exact_evaluate(const DesignParams& d);

struct Rect {
    double x, y, width, height;
    bool contains(double px, double py) const { return px >= x && px <= x + width && py >= y && py <= y + height; }
};

struct Planform {
    Rect fuselage;
    Rect wing;
    Rect tail;
};

// Places the rectangles in the unit square: fuselage centred, wing behind the
// nose, tail flush with the rear. Wing and tail stay inside the fuselage's
// length and disjoint whenever fuselage_length >= wing_chord + tail_chord.
Planform layout(const DesignParams& d);
bool layout_is_disjoint(const DesignParams& d);
bool planform_contains(const Planform& p, double x, double y);

enum class Provenance { Original, Augmented };

struct DatasetRow {
    DesignParams design{};
    LabelVector raw{};
    Provenance provenance = Provenance::Original;

    friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::size_t n_requested = 0;
    double percentile = 99.5;
    std::array<double, kLabelCount> percentile_cuts{};
    sampling::LabelNormalizer normalizer;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
    std::vector<DatasetRow> rows;
    DatasetMeta meta;

    std::size_t size() const { return rows.size(); }
    double normalized_label(std::size_t row, std::size_t label) const;
    // N x 6 design matrix and N x 2 normalized label matrix.
    net::Matrix design_matrix() const;
    net::Matrix normalized_labels() const;
    std::size_t count(Provenance p) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Draws n designs from per-parameter truncated Gaussians centred mid-range
// (sigma 0.15), labels them exactly, drops rows beyond the 99.5th percentile
// of either label and fits the normalizer on what remains.
Dataset generate_dataset(std::size_t n, std::uint64_t seed);

// Linear-interpolated percentile (p in [0,100]) of unsorted values.
double percentile(std::vector<double> values, double p);

// Equal-width bins over [0,1]; values outside are ignored, 1.0 lands in the last bin.
std::vector<std::size_t> bin_counts(std::span<const double> values, std::size_t bins = 10);
std::vector<std::size_t> label_bin_counts(const Dataset& ds, std::size_t label, std::size_t bins = 10);
// max/min over the counts; infinity when some bin is empty.
double max_min_ratio(std::span<const std::size_t> counts);

// CSV (d0..d5, aspect_ratio_raw, area_ratio_raw, provenance) plus
// `<path>.meta.json` holding normalization bounds, percentile cuts and seed.
void save_dataset(const Dataset& ds, const std::string& path);
// Throws IoError when unreadable and ParseError (with the file line) for
// malformed rows or stored labels that disagree with exact_evaluate.
Dataset load_dataset(const std::string& path);
std::string metadata_path(const std::string& dataset_path);

// Reads just the design columns (d0..d5) of any CSV that carries them.
std::vector<DesignParams> load_designs(const std::string& path);

// SVG sheet of planforms on a grid; each cell is a unit square drawn to scale.
std::string render_svg(std::span<const DesignParams> designs, std::size_t columns = 8, double cell_px = 120.0);

}  // namespace rangegan::domain
