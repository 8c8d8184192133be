#include "rangegan/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rangegan/errors.hpp"

namespace rangegan::metrics {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void check_columns(std::span<const std::size_t> label_columns, std::size_t n_bounds) {
    if (label_columns.empty()) throw UsageError("at least one constrained label is required");
    if (label_columns.size() != n_bounds) throw UsageError("label column count does not match the condition");
    for (const auto c : label_columns)
        if (c >= domain::kLabelCount) throw UsageError("label column out of range: " + std::to_string(c));
}

// Labels of the rows satisfying every bound, one vector per constrained label.
std::vector<std::vector<double>> satisfying_labels(const Matrix& labels, std::span<const std::size_t> label_columns,
                                                   const RangeCondition& cond, std::size_t* n_ok) {
    std::vector<std::vector<double>> out(label_columns.size());
    std::size_t ok = 0;
    for (std::size_t i = 0; i < labels.rows; ++i) {
        bool inside = true;
        for (std::size_t k = 0; k < label_columns.size() && inside; ++k)
            inside = cond.bounds[k].contains(labels(i, label_columns[k]));
        if (!inside) continue;
        ++ok;
        for (std::size_t k = 0; k < label_columns.size(); ++k) out[k].push_back(labels(i, label_columns[k]));
    }
    if (n_ok) *n_ok = ok;
    return out;
}

SweepRow score(const Matrix& labels, std::span<const std::size_t> label_columns, const RangeCondition& cond,
               double range_size, LabelerKind kind) {
    SweepRow row;
    row.bounds = cond.bounds;
    row.range_size = range_size;
    row.labeler = kind;
    row.n_samples = labels.rows;
    const auto inside = satisfying_labels(labels, label_columns, cond, &row.n_satisfying);
    row.satisfaction = labels.rows ? static_cast<double>(row.n_satisfying) / static_cast<double>(labels.rows) : 0.0;
    double e = 0.0;
    for (const auto& col : inside) e += quadratic_entropy(col);
    row.quadratic_entropy = e / static_cast<double>(inside.size());
    return row;
}

// Every condition of the sweep: centres for one label, their grid for several.
std::vector<RangeCondition> sweep_conditions(std::size_t n_labels, double range_size, std::size_t n) {
    const auto centers = sweep_centers(range_size, n);
    std::vector<RangeCondition> out;
    std::vector<std::size_t> idx(n_labels, 0);
    while (true) {
        RangeCondition c;
        for (std::size_t k = 0; k < n_labels; ++k) {
            const double m = centers[idx[k]];
            c.bounds.push_back({std::max(0.0, m - 0.5 * range_size), std::min(1.0, m + 0.5 * range_size)});
        }
        out.push_back(std::move(c));
        std::size_t k = n_labels;
        while (k > 0) {
            --k;
            if (++idx[k] < centers.size()) break;
            idx[k] = 0;
            if (k == 0) return out;
        }
    }
}

}  // namespace

double satisfaction(const Matrix& labels, std::span<const std::size_t> label_columns, const RangeCondition& cond) {
    check_columns(label_columns, cond.size());
    if (labels.rows == 0) return 0.0;
    for (const auto c : label_columns)
        if (c >= labels.cols) throw UsageError("label column exceeds label matrix width");
    std::size_t ok = 0;
    satisfying_labels(labels, label_columns, cond, &ok);
    return static_cast<double>(ok) / static_cast<double>(labels.rows);
}

double satisfaction(std::span<const double> labels, const Interval& bound) {
    if (labels.empty()) return 0.0;
    std::size_t ok = 0;
    for (const double y : labels) ok += bound.contains(y) ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(labels.size());
}

double quadratic_entropy(std::span<const double> labels) {
    if (labels.empty()) return 0.0;
    // shift by the first value to keep the moment difference well conditioned
    const double s = labels.front();
    double m1 = 0.0, m2 = 0.0;
    for (const double y : labels) {
        m1 += y - s;
        m2 += (y - s) * (y - s);
    }
    const double n = static_cast<double>(labels.size());
    m1 /= n;
    m2 /= n;
    return std::max(0.0, 2.0 * (m2 - m1 * m1));
}

const char* to_string(LabelerKind k) {
    switch (k) {
        case LabelerKind::Estimator: return "estimator";
        case LabelerKind::Exact: return "exact";
        case LabelerKind::Data: return "data";
    }
    return "?";
}

Matrix Labeler::operator()(const Matrix& designs) const {
    if (kind == LabelerKind::Estimator) {
        if (!estimator) throw UsageError("estimator labeler without an estimator");
        return estimator->predict(designs);
    }
    if (kind != LabelerKind::Exact || !normalizer) throw UsageError("exact labeler needs a normalizer");
    if (designs.cols != domain::kDesignDim) throw UsageError("designs must have 6 columns");
    Matrix out(designs.rows, domain::kLabelCount);
    for (std::size_t i = 0; i < designs.rows; ++i) {
        domain::DesignParams d{};
        for (std::size_t j = 0; j < domain::kDesignDim; ++j) d[j] = designs(i, j);
        const auto raw = domain::exact_evaluate(d);
        for (std::size_t l = 0; l < domain::kLabelCount; ++l) out(i, l) = normalizer->normalize(raw[l], l);
    }
    return out;
}

Matrix sample_noise(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(n, dim);
    for (auto& v : z.data) v = normal(rng);
    return z;
}

Matrix generate_designs(const models::Generator& g, const RangeCondition& cond, std::size_t n,
                        std::mt19937_64& rng) {
    const Matrix z = sample_noise(n, g.config().noise_dim, rng);
    return g.generate(z, cond.encode());
}

double SweepReport::mean_satisfaction() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.satisfaction;
    return s / static_cast<double>(rows.size());
}

double SweepReport::std_satisfaction() const {
    if (rows.empty()) return 0.0;
    const double m = mean_satisfaction();
    double s = 0.0;
    for (const auto& r : rows) s += (r.satisfaction - m) * (r.satisfaction - m);
    return std::sqrt(s / static_cast<double>(rows.size()));
}

double SweepReport::mean_entropy() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.quadratic_entropy;
    return s / static_cast<double>(rows.size());
}

std::vector<double> sweep_centers(double range_size, std::size_t n) {
    if (!(range_size > 0.0 && range_size <= 1.0)) throw UsageError("range size must lie in (0, 1]");
    if (n == 0) throw UsageError("a sweep needs at least one condition");
    const double lo = 0.5 * range_size;
    const double hi = 1.0 - 0.5 * range_size;
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i)
        c[i] = n == 1 ? 0.5 : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return c;
}

SweepReport condition_sweep(const models::Generator& g, const Labeler& labeler,
                            std::span<const std::size_t> label_columns, double range_size, std::size_t n_conditions,
                            std::size_t n_samples, std::uint64_t seed) {
    check_columns(label_columns, label_columns.size());
    if (2 * label_columns.size() != g.config().cond_dim)
        throw UsageError("generator condition width does not match the constrained labels");
    if (n_samples == 0) throw UsageError("a sweep needs at least one sample per condition");
    SweepReport rep;
    rep.label_columns.assign(label_columns.begin(), label_columns.end());
    const auto conds = sweep_conditions(label_columns.size(), range_size, n_conditions);
    for (std::size_t i = 0; i < conds.size(); ++i) {
        std::seed_seq ss{seed, static_cast<std::uint64_t>(i)};
        std::mt19937_64 rng(ss);
        const Matrix designs = generate_designs(g, conds[i], n_samples, rng);
        rep.rows.push_back(score(labeler(designs), label_columns, conds[i], range_size, labeler.kind));
    }
    return rep;
}

SweepReport data_baseline(const domain::Dataset& ds, std::span<const std::size_t> label_columns, double range_size,
                          std::size_t n_conditions) {
    check_columns(label_columns, label_columns.size());
    if (ds.size() == 0) throw UsageError("data baseline on an empty dataset");
    SweepReport rep;
    rep.label_columns.assign(label_columns.begin(), label_columns.end());
    rep.tag = "data";
    const Matrix labels = ds.normalized_labels();
    for (const auto& c : sweep_conditions(label_columns.size(), range_size, n_conditions))
        rep.rows.push_back(score(labels, label_columns, c, range_size, LabelerKind::Data));
    return rep;
}

std::vector<UniformityComparison> compare_uniformity(const models::Generator& with_uniformity,
                                                     const models::Generator& without_uniformity,
                                                     const models::Estimator& estimator,
                                                     std::span<const std::size_t> label_columns,
                                                     std::span<const double> range_sizes, std::size_t n_conditions,
                                                     std::size_t n_samples, std::uint64_t seed) {
    const Labeler lab = Labeler::learned(estimator);
    std::vector<UniformityComparison> out;
    for (const double r : range_sizes) {
        const auto a = condition_sweep(with_uniformity, lab, label_columns, r, n_conditions, n_samples, seed);
        const auto b = condition_sweep(without_uniformity, lab, label_columns, r, n_conditions, n_samples, seed);
        out.push_back({r, a.mean_entropy(), b.mean_entropy(), a.mean_satisfaction(), b.mean_satisfaction()});
    }
    return out;
}

std::string format_report_csv(std::span<const SweepReport> reports) {
    std::ostringstream os;
    os << "tag,labeler,range_size";
    for (const auto& name : domain::kLabelNames)
        os << ",center_" << name << ",lb_" << name << ",ub_" << name;
    os << ",n_samples,n_satisfying,satisfaction,quadratic_entropy\n";
    for (const auto& rep : reports) {
        for (const auto& row : rep.rows) {
            os << rep.tag << ',' << to_string(row.labeler) << ',' << fmt(row.range_size);
            for (std::size_t l = 0; l < domain::kLabelCount; ++l) {
                std::size_t k = 0;
                while (k < rep.label_columns.size() && rep.label_columns[k] != l) ++k;
                if (k < rep.label_columns.size() && k < row.bounds.size()) {
                    const auto& b = row.bounds[k];
                    os << ',' << fmt(b.center()) << ',' << fmt(b.lb) << ',' << fmt(b.ub);
                } else {
                    os << ",,,";
                }
            }
            os << ',' << row.n_samples << ',' << row.n_satisfying << ',' << fmt(row.satisfaction) << ','
               << fmt(row.quadratic_entropy) << '\n';
        }
    }
    return os.str();
}

void write_report_csv(std::span<const SweepReport> reports, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << format_report_csv(reports);
    if (!f) throw IoError("write failed: " + path);
}

std::string format_histogram_csv(std::span<const double> values, std::size_t bins) {
    const auto counts = domain::bin_counts(values, bins);
    std::size_t total = 0;
    for (const auto c : counts) total += c;
    std::ostringstream os;
    os << "bin_lo,bin_hi,count,density\n";
    const double w = 1.0 / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const double density = total ? static_cast<double>(counts[b]) / (static_cast<double>(total) * w) : 0.0;
        os << fmt(w * static_cast<double>(b)) << ',' << fmt(w * static_cast<double>(b + 1)) << ',' << counts[b]
           << ',' << fmt(density) << '\n';
    }
    return os.str();
}

}  // namespace rangegan::metrics
