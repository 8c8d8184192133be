#include "rangegan/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "rangegan/errors.hpp"

namespace rangegan::domain {

using nlohmann::json;

PhysicalDesign to_physical(const DesignParams& d) {
    std::array<double, kDesignDim> p{};
    for (std::size_t i = 0; i < kDesignDim; ++i)
        p[i] = kPhysicalRanges[i].lo + d[i] * (kPhysicalRanges[i].hi - kPhysicalRanges[i].lo);
    return {p[0], p[1], p[2], p[3], p[4], p[5]};
}

DesignParams from_physical(const PhysicalDesign& p) {
    const std::array<double, kDesignDim> v{p.fuselage_length, p.fuselage_width, p.wingspan,
                                           p.wing_chord,      p.tail_span,      p.tail_chord};
    DesignParams d{};
    for (std::size_t i = 0; i < kDesignDim; ++i)
        d[i] = (v[i] - kPhysicalRanges[i].lo) / (kPhysicalRanges[i].hi - kPhysicalRanges[i].lo);
    return d;
}

LabelVector exact_evaluate(const DesignParams& d) {
    for (std::size_t i = 0; i < kDesignDim; ++i) {
        if (!(d[i] >= 0.0 && d[i] <= 1.0))
            throw UsageError("exact_evaluate: design component " + std::to_string(i) + " outside [0,1]");
    }
    const PhysicalDesign p = to_physical(d);
    LabelVector y;
    y.aspect_ratio = p.fuselage_length / p.wingspan;
    y.area_ratio = p.fuselage_length * p.fuselage_width + p.wing_chord * (p.wingspan - p.fuselage_width) +
                   p.tail_chord * (p.tail_span - p.fuselage_width);
    return y;
}

Planform layout(const DesignParams& d) {
    const PhysicalDesign p = to_physical(d);
    const double nose = 0.5 * (1.0 - p.fuselage_length);
    const double slack = std::max(0.0, p.fuselage_length - p.wing_chord - p.tail_chord);
    Planform out;
    out.fuselage = {0.5 - 0.5 * p.fuselage_width, nose, p.fuselage_width, p.fuselage_length};
    out.wing = {0.5 - 0.5 * p.wingspan, nose + 0.3 * slack, p.wingspan, p.wing_chord};
    out.tail = {0.5 - 0.5 * p.tail_span, nose + p.fuselage_length - p.tail_chord, p.tail_span, p.tail_chord};
    return out;
}

bool layout_is_disjoint(const DesignParams& d) {
    const PhysicalDesign p = to_physical(d);
    return p.fuselage_length >= p.wing_chord + p.tail_chord;
}

bool planform_contains(const Planform& p, double x, double y) {
    return p.fuselage.contains(x, y) || p.wing.contains(x, y) || p.tail.contains(x, y);
}

// ---- dataset -------------------------------------------------------------------

double Dataset::normalized_label(std::size_t row, std::size_t label) const {
    return meta.normalizer.normalize(rows[row].raw[label], label);
}

net::Matrix Dataset::design_matrix() const {
    net::Matrix m(rows.size(), kDesignDim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < kDesignDim; ++j) m(i, j) = rows[i].design[j];
    return m;
}

net::Matrix Dataset::normalized_labels() const {
    net::Matrix m(rows.size(), kLabelCount);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t l = 0; l < kLabelCount; ++l) m(i, l) = normalized_label(i, l);
    return m;
}

std::size_t Dataset::count(Provenance p) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [p](const DatasetRow& r) { return r.provenance == p; }));
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw UsageError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Dataset generate_dataset(std::size_t n, std::uint64_t seed) {
    if (n < 100) throw UsageError("generate_dataset: n must be at least 100, got " + std::to_string(n));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.5, 0.15);
    auto truncated = [&] {
        for (;;) {
            const double v = normal(rng);
            if (v >= 0.0 && v <= 1.0) return v;
        }
    };

    std::vector<DatasetRow> raw_rows(n);
    for (auto& row : raw_rows) {
        for (auto& c : row.design) c = truncated();
        row.raw = exact_evaluate(row.design);
    }

    Dataset ds;
    ds.meta.seed = seed;
    ds.meta.n_requested = n;
    for (std::size_t l = 0; l < kLabelCount; ++l) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = raw_rows[i].raw[l];
        ds.meta.percentile_cuts[l] = percentile(std::move(col), ds.meta.percentile);
    }
    for (auto& row : raw_rows) {
        if (row.raw.aspect_ratio > ds.meta.percentile_cuts[kAspectLabel]) continue;
        if (row.raw.area_ratio > ds.meta.percentile_cuts[kAreaLabel]) continue;
        ds.rows.push_back(row);
    }

    std::vector<std::vector<double>> columns(kLabelCount);
    for (const auto& row : ds.rows)
        for (std::size_t l = 0; l < kLabelCount; ++l) columns[l].push_back(row.raw[l]);
    ds.meta.normalizer = sampling::LabelNormalizer::fit(columns);
    return ds;
}

std::vector<std::size_t> bin_counts(std::span<const double> values, std::size_t bins) {
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) continue;
        auto b = static_cast<std::size_t>(v * static_cast<double>(bins));
        counts[std::min(b, bins - 1)] += 1;
    }
    return counts;
}

std::vector<std::size_t> label_bin_counts(const Dataset& ds, std::size_t label, std::size_t bins) {
    std::vector<double> values(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) values[i] = ds.normalized_label(i, label);
    return bin_counts(values, bins);
}

double max_min_ratio(std::span<const std::size_t> counts) {
    if (counts.empty()) return std::numeric_limits<double>::infinity();
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    if (*lo == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(*hi) / static_cast<double>(*lo);
}

// ---- file I/O --------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line, const char* column) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        throw ParseError(std::string("bad number in column ") + column + ": '" + s + "'", line);
    return v;
}

const char* provenance_name(Provenance p) { return p == Provenance::Original ? "original" : "augmented"; }

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::string metadata_path(const std::string& dataset_path) { return dataset_path + ".meta.json"; }

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset: " + path);
    out << "d0,d1,d2,d3,d4,d5,aspect_ratio_raw,area_ratio_raw,provenance\n";
    for (const auto& row : ds.rows) {
        for (double v : row.design) out << fmt_double(v) << ',';
        out << fmt_double(row.raw.aspect_ratio) << ',' << fmt_double(row.raw.area_ratio) << ','
            << provenance_name(row.provenance) << '\n';
    }
    if (!out) throw IoError("failed writing dataset: " + path);

    json meta{{"format", "rangegan-dataset"},
              {"version", 1},
              {"seed", ds.meta.seed},
              {"n_requested", ds.meta.n_requested},
              {"rows", ds.rows.size()},
              {"percentile", ds.meta.percentile},
              {"percentile_cuts", ds.meta.percentile_cuts},
              {"label_names", kLabelNames},
              {"raw_min", ds.meta.normalizer.raw_min},
              {"raw_max", ds.meta.normalizer.raw_max}};
    std::ofstream mout(metadata_path(path));
    if (!mout) throw IoError("cannot write dataset metadata: " + metadata_path(path));
    mout << meta.dump(1) << '\n';
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read dataset: " + path);
    std::ifstream min(metadata_path(path));
    if (!min) throw IoError("cannot read dataset metadata: " + metadata_path(path));

    Dataset ds;
    try {
        const json meta = json::parse(min);
        ds.meta.seed = meta.at("seed").get<std::uint64_t>();
        ds.meta.n_requested = meta.at("n_requested").get<std::size_t>();
        ds.meta.percentile = meta.at("percentile").get<double>();
        ds.meta.percentile_cuts = meta.at("percentile_cuts").get<std::array<double, kLabelCount>>();
        ds.meta.normalizer.raw_min = meta.at("raw_min").get<std::vector<double>>();
        ds.meta.normalizer.raw_max = meta.at("raw_max").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("dataset metadata: ") + e.what(), 0);
    }
    ds.meta.normalizer.validate();

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("dataset file is empty", 1);
    ++line_no;
    if (split_csv(strip_cr(line)).size() != 9) throw ParseError("dataset header must have 9 columns", line_no);

    static const char* kColumns[] = {"d0", "d1", "d2", "d3", "d4", "d5", "aspect_ratio_raw", "area_ratio_raw"};
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 9)
            throw ParseError("expected 9 columns, found " + std::to_string(cells.size()), line_no);
        DatasetRow row;
        for (std::size_t j = 0; j < kDesignDim; ++j) {
            row.design[j] = parse_double(cells[j], line_no, kColumns[j]);
            if (row.design[j] < 0.0 || row.design[j] > 1.0)
                throw ParseError(std::string("design column ") + kColumns[j] + " outside [0,1]", line_no);
        }
        row.raw.aspect_ratio = parse_double(cells[6], line_no, kColumns[6]);
        row.raw.area_ratio = parse_double(cells[7], line_no, kColumns[7]);
        if (cells[8] == "original")
            row.provenance = Provenance::Original;
        else if (cells[8] == "augmented")
            row.provenance = Provenance::Augmented;
        else
            throw ParseError("unknown provenance '" + cells[8] + "'", line_no);

        const LabelVector exact = exact_evaluate(row.design);
        for (std::size_t l = 0; l < kLabelCount; ++l) {
            if (std::abs(exact[l] - row.raw[l]) > 1e-12 * std::max(1.0, std::abs(exact[l])))
                throw ParseError(std::string("stored ") + kLabelNames[l] + " disagrees with the exact evaluator",
                                 line_no);
        }
        ds.rows.push_back(row);
    }
    return ds;
}

std::vector<DesignParams> load_designs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read designs: " + path);
    std::string line;
    std::size_t line_no = 0;
    // leading '#' lines carry run metadata
    do {
        if (!std::getline(in, line)) throw ParseError("design file has no header", line_no + 1);
        ++line_no;
    } while (!line.empty() && line[0] == '#');
    const auto header = split_csv(strip_cr(line));
    std::array<std::size_t, kDesignDim> idx{};
    for (std::size_t j = 0; j < kDesignDim; ++j) {
        const std::string name = "d" + std::to_string(j);
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("design file lacks column " + name, line_no);
        idx[j] = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<DesignParams> out;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " columns, found " +
                                 std::to_string(cells.size()),
                             line_no);
        DesignParams d{};
        for (std::size_t j = 0; j < kDesignDim; ++j) d[j] = parse_double(cells[idx[j]], line_no, header[idx[j]].c_str());
        out.push_back(d);
    }
    return out;
}

std::string render_svg(std::span<const DesignParams> designs, std::size_t columns, double cell_px) {
    columns = std::max<std::size_t>(1, columns);
    const std::size_t rows = (designs.size() + columns - 1) / columns;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_double(cell_px * columns) << "\" height=\""
        << fmt_double(cell_px * std::max<std::size_t>(rows, 1)) << "\">\n";
    auto rect = [&](const Rect& r, const char* cls, const char* fill) {
        svg << "  <rect class=\"" << cls << "\" x=\"" << fmt_double(r.x) << "\" y=\"" << fmt_double(r.y)
            << "\" width=\"" << fmt_double(r.width) << "\" height=\"" << fmt_double(r.height) << "\" fill=\"" << fill
            << "\"/>\n";
    };
    for (std::size_t i = 0; i < designs.size(); ++i) {
        const double ox = cell_px * static_cast<double>(i % columns);
        const double oy = cell_px * static_cast<double>(i / columns);
        const Planform p = layout(designs[i]);
        // one unit of design space = cell_px pixels in every cell
        svg << " <g id=\"design-" << i << "\" transform=\"translate(" << fmt_double(ox) << ' ' << fmt_double(oy)
            << ") scale(" << fmt_double(cell_px) << ")\">\n";
        svg << "  <rect class=\"frame\" x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"none\" stroke=\"#ccc\" "
               "stroke-width=\"0.005\"/>\n";
        rect(p.wing, "wing", "#4a6fa5");
        rect(p.tail, "tail", "#4a6fa5");
        rect(p.fuselage, "fuselage", "#223");
        svg << " </g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace rangegan::domain
