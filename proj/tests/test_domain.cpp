#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include "rangegan/domain.hpp"
#include "rangegan/errors.hpp"

using namespace rangegan;
using namespace rangegan::domain;

namespace {

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

DesignParams from_phys(double fl, double fw, double ws, double wc, double ts, double tc) {
    return from_physical(PhysicalDesign{fl, fw, ws, wc, ts, tc});
}

// Fraction of an n x n cell-centre grid over the unit square covered by the planform.
double raster_area(const DesignParams& d, int n) {
    const Planform p = layout(d);
    long hits = 0;
    for (int i = 0; i < n; ++i) {
        const double y = (i + 0.5) / n;
        for (int j = 0; j < n; ++j) hits += planform_contains(p, (j + 0.5) / n, y) ? 1 : 0;
    }
    return static_cast<double>(hits) / (static_cast<double>(n) * n);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("physical mapping round trip") {
    const DesignParams d{0.0, 0.25, 0.5, 0.75, 1.0, 0.1};
    const PhysicalDesign p = to_physical(d);
    CHECK(p.fuselage_length == doctest::Approx(0.3));
    CHECK(p.fuselage_width == doctest::Approx(0.02 + 0.25 * 0.13));
    CHECK(p.wingspan == doctest::Approx(0.65));
    CHECK(p.wing_chord == doctest::Approx(0.05 + 0.75 * 0.25));
    CHECK(p.tail_span == doctest::Approx(0.5));
    CHECK(p.tail_chord == doctest::Approx(0.03 + 0.1 * 0.12));
    const DesignParams back = from_physical(p);
    for (std::size_t i = 0; i < kDesignDim; ++i) CHECK(back[i] == doctest::Approx(d[i]).epsilon(1e-12));
}

TEST_CASE("exact labels on worked designs") {
    const auto eq = exact_evaluate(from_phys(0.8, 0.1, 0.8, 0.2, 0.3, 0.05));
    CHECK(eq.aspect_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eq.area_ratio == doctest::Approx(0.08 + 0.2 * 0.7 + 0.05 * 0.2).epsilon(1e-12));
    CHECK(eq.area_ratio == doctest::Approx(0.23).epsilon(1e-12));
    // the same design rasterised
    CHECK(std::abs(raster_area(from_phys(0.8, 0.1, 0.8, 0.2, 0.3, 0.05), 1000) - 0.23) < 1e-3);
}

TEST_CASE("label bounds over the corners of the design box") {
    for (int mask = 0; mask < 64; ++mask) {
        DesignParams d{};
        for (int k = 0; k < 6; ++k) d[k] = (mask >> k) & 1 ? 1.0 : 0.0;
        const auto l = exact_evaluate(d);
        CHECK(l.aspect_ratio >= 0.3 - 1e-12);
        CHECK(l.aspect_ratio <= 10.0 / 3.0 + 1e-12);
        CHECK(l.area_ratio > 0.0);
        CHECK(l.area_ratio < 1.0);
    }
}

TEST_CASE("exact_evaluate rejects designs outside the unit box") {
    DesignParams d{0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    d[3] = 1.0000001;
    CHECK_THROWS_AS(exact_evaluate(d), UsageError);
    d[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(exact_evaluate(d), UsageError);
}

TEST_CASE("aspect ratio is scale-free") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.3, 0.5);
    for (int i = 0; i < 100; ++i) {
        const double fl = u(rng), ws = u(rng);
        const auto a = exact_evaluate(from_phys(fl, 0.05, ws, 0.1, 0.3, 0.05));
        const auto b = exact_evaluate(from_phys(2 * fl, 0.05, 2 * ws, 0.1, 0.3, 0.05));
        CHECK(a.aspect_ratio == doctest::Approx(b.aspect_ratio).epsilon(1e-12));
    }
}

TEST_CASE("closed-form area matches rasterised union") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    while (checked < 100) {
        DesignParams d;
        for (auto& v : d) v = u(rng);
        if (!layout_is_disjoint(d)) continue;
        const double closed = exact_evaluate(d).area_ratio;
        CHECK(std::abs(raster_area(d, 1000) - closed) < 2e-3);
        ++checked;
    }
}

TEST_CASE("layout stays inside the unit square") {
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        DesignParams d;
        for (auto& v : d) v = u(rng);
        const Planform p = layout(d);
        for (const Rect& r : {p.fuselage, p.wing, p.tail}) {
            CHECK(r.x >= -1e-12);
            CHECK(r.y >= -1e-12);
            CHECK(r.x + r.width <= 1.0 + 1e-12);
            CHECK(r.y + r.height <= 1.0 + 1e-12);
        }
        // wing and tail span across the fuselage and stay within its length
        CHECK(p.wing.x < p.fuselage.x);
        CHECK(p.tail.x < p.fuselage.x);
        CHECK(p.wing.y >= p.fuselage.y - 1e-12);
        CHECK(p.tail.y + p.tail.height <= p.fuselage.y + p.fuselage.height + 1e-12);
        if (layout_is_disjoint(d)) CHECK(p.wing.y + p.wing.height <= p.tail.y + 1e-12);
    }
}

TEST_CASE("percentile follows linear interpolation") {
    CHECK(percentile({1, 2, 3, 4}, 50.0) == doctest::Approx(2.5));
    CHECK(percentile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(percentile({4, 1, 3, 2}, 100.0) == 4.0);
    // rank = 0.995 * (5 - 1) = 3.98 between 40 and 50
    CHECK(percentile({10, 20, 30, 40, 50}, 99.5) == doctest::Approx(49.8));
}

TEST_CASE("bin counts and ratio edge cases") {
    const std::vector<double> v{0.0, 0.05, 0.1, 0.999, 1.0, -0.01, 1.01};
    const auto c = bin_counts(v, 10);
    CHECK(c[0] == 2);
    CHECK(c[1] == 1);
    CHECK(c[9] == 2);
    std::size_t total = 0;
    for (auto x : c) total += x;
    CHECK(total == 5);
    CHECK(std::isinf(max_min_ratio(c)));
    const std::vector<std::size_t> full{5, 10, 20};
    CHECK(max_min_ratio(full) == 4.0);
}

TEST_CASE("generated dataset contract") {
    const Dataset ds = generate_dataset(4000, 7);
    CHECK(ds.size() >= 3950);
    CHECK(ds.size() <= 4000);
    CHECK(ds.meta.seed == 7);
    CHECK(ds.meta.n_requested == 4000);
    CHECK(ds.meta.percentile == 99.5);
    for (const auto& row : ds.rows) {
        CHECK(row.provenance == Provenance::Original);
        const auto l = exact_evaluate(row.design);
        CHECK(l == row.raw);
        CHECK(row.raw.aspect_ratio <= ds.meta.percentile_cuts[0]);
        CHECK(row.raw.area_ratio <= ds.meta.percentile_cuts[1]);
    }
    for (std::size_t l = 0; l < kLabelCount; ++l) {
        double lo = 1e9, hi = -1e9;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            lo = std::min(lo, ds.normalized_label(i, l));
            hi = std::max(hi, ds.normalized_label(i, l));
        }
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
        CAPTURE(l);
        CHECK(max_min_ratio(label_bin_counts(ds, l)) >= 5.0);
    }
}

TEST_CASE("generated dataset is reproducible and seed-dependent") {
    CHECK(generate_dataset(500, 3) == generate_dataset(500, 3));
    CHECK_FALSE(generate_dataset(500, 3).rows == generate_dataset(500, 4).rows);
    CHECK_THROWS_AS(generate_dataset(10, 1), UsageError);
    CHECK_NOTHROW(generate_dataset(100, 1));
}

// ratio labels are skewed so the mode straddles two bins; the midpoint must land in one of the two peak bins
TEST_CASE("the all-midpoint design sits in a peak-density bin") {
    const Dataset ds = generate_dataset(4000, 7);
    const auto mid = exact_evaluate({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    for (std::size_t l = 0; l < kLabelCount; ++l) {
        auto counts = label_bin_counts(ds, l);
        const double y = ds.meta.normalizer.normalize(mid[l], l);
        const auto b = static_cast<std::size_t>(std::min(9.0, std::floor(y * 10.0)));
        const std::size_t peak = *std::max_element(counts.begin(), counts.end());
        std::vector<std::size_t> sorted = counts;
        std::sort(sorted.rbegin(), sorted.rend());
        CAPTURE(l);
        CHECK(counts[b] >= sorted[1]);
        CHECK(static_cast<double>(counts[b]) >= 0.9 * static_cast<double>(peak));
    }
}

TEST_CASE("dataset save and load round trip") {
    Dataset ds = generate_dataset(300, 11);
    ds.rows[5].provenance = Provenance::Augmented;
    const std::string path = temp_path("rangegan_ds_roundtrip.csv");
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    CHECK(back == ds);
    CHECK(back.meta.percentile_cuts == ds.meta.percentile_cuts);
    CHECK(back.count(Provenance::Augmented) == 1);
    CHECK(std::filesystem::exists(metadata_path(path)));
    const auto designs = load_designs(path);
    REQUIRE(designs.size() == ds.size());
    CHECK(designs[17] == ds.rows[17].design);
    std::filesystem::remove(path);
    std::filesystem::remove(metadata_path(path));
}

TEST_CASE("malformed dataset files name the row") {
    const Dataset ds = generate_dataset(120, 2);
    const std::string path = temp_path("rangegan_ds_bad.csv");
    save_dataset(ds, path);
    std::string text = slurp(path);

    auto rewrite = [&](const std::string& body) {
        std::ofstream f(path);
        f << body;
    };
    auto nth_line_start = [&](const std::string& s, int n) {
        std::size_t pos = 0;
        for (int i = 1; i < n; ++i) pos = s.find('\n', pos) + 1;
        return pos;
    };

    // line 4: drop the last column
    {
        std::string t = text;
        const auto start = nth_line_start(t, 4);
        const auto end = t.find('\n', start);
        const auto comma = t.rfind(',', end);
        t.erase(comma, end - comma);
        rewrite(t);
        try {
            load_dataset(path);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.row() == 4);
            CHECK(std::string(e.what()).find("row 4") != std::string::npos);
        }
    }
    // line 6: label disagrees with the evaluator
    {
        std::string t = text;
        const auto start = nth_line_start(t, 6);
        t.replace(start, t.find(',', start) - start, "0.123");
        rewrite(t);
        try {
            load_dataset(path);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.row() == 6);
        }
    }
    // line 3: not a number
    {
        std::string t = text;
        const auto start = nth_line_start(t, 3);
        t.replace(start, 1, "x");
        rewrite(t);
        CHECK_THROWS_AS(load_dataset(path), ParseError);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(metadata_path(path));
    CHECK_THROWS_AS(load_dataset(temp_path("rangegan_no_such_file.csv")), IoError);
}

TEST_CASE("rendered rectangles carry physical dimensions") {
    const DesignParams d = from_phys(0.8, 0.1, 0.9, 0.2, 0.3, 0.05);
    const DesignParams e = from_phys(0.5, 0.04, 0.6, 0.1, 0.25, 0.08);
    const std::vector<DesignParams> designs{d, e};
    const std::string svg = render_svg(designs, 2, 100.0);

    const std::regex group(R"re(<g id="design-(\d+)" transform="translate\(([^ ]+) ([^)]+)\) scale\(([^)]+)\)">)re");
    const std::regex rect(R"re(<rect class="(wing|tail|fuselage)" x="([^"]+)" y="([^"]+)" width="([^"]+)" height="([^"]+)")re");
    std::vector<std::map<std::string, std::pair<double, double>>> dims(2);
    std::vector<double> scales;
    std::istringstream in(svg);
    std::string line;
    int current = -1;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_search(line, m, group)) {
            current = std::stoi(m[1]);
            scales.push_back(std::stod(m[4]));
        } else if (current >= 0 && std::regex_search(line, m, rect)) {
            dims[current][m[1]] = {std::stod(m[4]), std::stod(m[5])};
        }
    }
    REQUIRE(scales.size() == 2);
    CHECK(scales[0] == 100.0);
    CHECK(scales[1] == 100.0);
    const std::vector<PhysicalDesign> phys{to_physical(d), to_physical(e)};
    for (int k = 0; k < 2; ++k) {
        const auto& p = phys[k];
        CHECK(dims[k]["fuselage"].first == doctest::Approx(p.fuselage_width).epsilon(1e-12));
        CHECK(dims[k]["fuselage"].second == doctest::Approx(p.fuselage_length).epsilon(1e-12));
        CHECK(dims[k]["wing"].first == doctest::Approx(p.wingspan).epsilon(1e-12));
        CHECK(dims[k]["wing"].second == doctest::Approx(p.wing_chord).epsilon(1e-12));
        CHECK(dims[k]["tail"].first == doctest::Approx(p.tail_span).epsilon(1e-12));
        CHECK(dims[k]["tail"].second == doctest::Approx(p.tail_chord).epsilon(1e-12));
    }
}
