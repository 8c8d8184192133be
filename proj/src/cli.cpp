#include "rangegan/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rangegan/domain.hpp"
#include "rangegan/errors.hpp"
#include "rangegan/metrics.hpp"
#include "rangegan/sampling.hpp"
#include "rangegan/trainer.hpp"

namespace rangegan::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f) throw IoError("failed writing " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void make_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

std::string histogram_summary(const domain::Dataset& ds) {
    std::ostringstream os;
    for (std::size_t l = 0; l < domain::kLabelCount; ++l) {
        const auto c = domain::label_bin_counts(ds, l);
        os << domain::kLabelNames[l] << " bins:";
        for (auto v : c) os << ' ' << v;
        os << "  max/min " << fmt(domain::max_min_ratio(c)) << '\n';
    }
    return os.str();
}

std::string config_help() {
    std::ostringstream os;
    os << "Config keys (key = value lines in --config, or --set key=value):\n";
    for (const auto& [k, v] : trainer::config_keys()) {
        // stored at full precision for round trips; shorter here
        char* end = nullptr;
        const double d = std::strtod(v.c_str(), &end);
        const bool numeric = !v.empty() && end == v.c_str() + v.size();
        os << "  " << k << " = " << (numeric ? fmt(d) : v) << '\n';
    }
    return os.str();
}

// Config file, then --set pairs, then explicit flags; later lines win.
trainer::TrainConfig assemble_config(const std::string& base_text, const std::string& config_path,
                                     const std::vector<std::string>& sets, const std::vector<std::string>& flags) {
    std::string text = base_text + "\n";
    if (!config_path.empty()) text += read_text(config_path) + "\n";
    for (const auto& s : sets) {
        if (s.find('=') == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        text += s + "\n";
    }
    for (const auto& f : flags) text += f + "\n";
    return trainer::parse_config(text);
}

std::string seed_line(std::uint64_t seed, const std::string& extra = "") {
    return "# seed=" + std::to_string(seed) + (extra.empty() ? "" : " " + extra) + "\n";
}

void check_compatible(const trainer::TrainedModels& m, const trainer::TrainConfig& cfg) {
    const auto cols = trainer::label_columns(cfg.labels);
    if (m.generator.config().cond_dim != 2 * cols.size())
        throw ConfigurationError("checkpoint generator expects " + std::to_string(m.generator.config().cond_dim / 2) +
                                 " constrained labels but the config asks for " + std::to_string(cols.size()));
}

// ---- commands ----------------------------------------------------------------------

struct GenDataOpts {
    std::size_t n = 4000;
    std::uint64_t seed = 7;
    std::string out;
};

int cmd_gen_data(const GenDataOpts& o, std::ostream& out) {
    const auto ds = domain::generate_dataset(o.n, o.seed);
    domain::save_dataset(ds, o.out);
    out << "wrote " << ds.size() << " rows to " << o.out << " (seed " << o.seed << ")\n" << histogram_summary(ds);
    return kOk;
}

struct TrainOpts {
    std::string data;
    std::string labels;
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

int cmd_train(const TrainOpts& o, std::ostream& out) {
    std::vector<std::string> flags;
    if (!o.labels.empty()) flags.push_back("labels = " + o.labels);
    if (o.seed) flags.push_back("seed = " + std::to_string(*o.seed));
    const auto cfg = assemble_config("", o.config, o.sets, flags);
    const auto ds = domain::load_dataset(o.data);
    make_dir(o.out_dir);

    const auto est = trainer::train_estimator(ds, cfg);
    out << "estimator holdout MAE";
    for (std::size_t l = 0; l < domain::kLabelCount; ++l)
        out << ' ' << domain::kLabelNames[l] << '=' << fmt(est.report.holdout_mae[l]);
    out << '\n';
    const auto gan = trainer::train_rangegan(ds, est.estimator, cfg);

    trainer::TrainedModels m;
    m.manifest.noise_dim = cfg.noise_dim;
    m.manifest.cond_dim = gan.generator.config().cond_dim;
    m.manifest.n_labels = trainer::label_columns(cfg.labels).size();
    m.manifest.labels = cfg.labels;
    m.manifest.normalizer = ds.meta.normalizer;
    m.manifest.seed = cfg.seed;
    m.manifest.dataset_path = fs::absolute(o.data).lexically_normal().string();
    m.manifest.config_text = trainer::format_config(cfg);
    m.generator = gan.generator;
    m.discriminator = gan.discriminator;
    m.estimator = est.estimator;
    trainer::save_run(o.out_dir, m);

    write_text(join(o.out_dir, "config.txt"), seed_line(cfg.seed) + m.manifest.config_text);
    write_text(join(o.out_dir, "train_log.csv"), trainer::format_log_csv(gan.log, cfg.seed));
    std::ostringstream er;
    er << seed_line(cfg.seed) << "label,holdout_mae,train_rows,holdout_rows,final_loss\n";
    for (std::size_t l = 0; l < domain::kLabelCount; ++l)
        er << domain::kLabelNames[l] << ',' << fmt(est.report.holdout_mae[l]) << ',' << est.report.train_rows << ','
           << est.report.holdout_rows << ',' << fmt(est.report.final_loss) << '\n';
    write_text(join(o.out_dir, "estimator_report.csv"), er.str());

    const auto cols = trainer::label_columns(cfg.labels);
    auto sweep = metrics::condition_sweep(gan.generator, metrics::Labeler::learned(est.estimator), cols,
                                          cfg.sweep_range, cfg.sweep_conditions, cfg.sweep_samples,
                                          trainer::derive_seed(cfg.seed, 31));
    sweep.tag = "train";
    const std::vector<metrics::SweepReport> reps{sweep};
    write_text(join(o.out_dir, "sweep.csv"), seed_line(cfg.seed) + metrics::format_report_csv(reps));
    out << "labels " << trainer::to_string(cfg.labels) << ", condition width " << 2 * cols.size() << '\n';
    out << "estimator-labelled sweep, range " << fmt(cfg.sweep_range) << ": mean satisfaction "
        << fmt(sweep.mean_satisfaction()) << ", mean entropy " << fmt(sweep.mean_entropy()) << '\n';
    out << "run written to " << o.out_dir << '\n';
    return kOk;
}

struct AugmentOpts {
    std::string gan;
    std::string data;
    std::optional<std::size_t> pool;
    std::vector<std::string> sets;
    std::string out_dir;
};

int cmd_augment(const AugmentOpts& o, std::ostream& out) {
    const auto models = trainer::load_run(o.gan);
    std::vector<std::string> flags;
    if (o.pool) flags.push_back("n_pool = " + std::to_string(*o.pool));
    const auto cfg = assemble_config(models.manifest.config_text, "", o.sets, flags);
    check_compatible(models, cfg);
    const auto ds = domain::load_dataset(o.data);
    if (!(ds.meta.normalizer == models.manifest.normalizer))
        throw ConfigurationError("dataset " + o.data + " was normalized differently from the checkpoint");
    make_dir(o.out_dir);

    const auto round = trainer::augmentation_round(ds, models.generator, cfg);
    const std::string aug_path = join(o.out_dir, "augmented.csv");
    domain::save_dataset(round.augmented.dataset, aug_path);

    trainer::TrainedModels m = models;
    m.manifest.dataset_path = fs::absolute(aug_path).lexically_normal().string();
    m.manifest.config_text = trainer::format_config(cfg);
    m.generator = round.gan.generator;
    m.discriminator = round.gan.discriminator;
    m.estimator = round.estimator.estimator;
    const std::string run_dir = join(o.out_dir, "run");
    trainer::save_run(run_dir, m);

    const std::vector<metrics::SweepReport> reps{round.before, round.after};
    write_text(join(o.out_dir, "report.csv"), seed_line(cfg.seed, "labeler=exact") + metrics::format_report_csv(reps));
    const std::string bins = trainer::format_bin_table(round.augmented.report);
    write_text(join(o.out_dir, "bins.csv"), seed_line(cfg.seed) + bins);
    write_text(join(o.out_dir, "train_log.csv"), trainer::format_log_csv(round.gan.log, cfg.seed));

    out << "pool " << round.augmented.report.pool_size << ", rows added " << round.augmented.report.rows_added
        << '\n'
        << bins;
    out << "[before] mean exact satisfaction " << fmt(round.before.mean_satisfaction()) << '\n';
    out << "[after] mean exact satisfaction " << fmt(round.after.mean_satisfaction()) << '\n';
    return kOk;
}

struct EvaluateOpts {
    std::string gan;
    std::string labeler = "estimator";
    double range_size = 0.1;
    std::size_t n_conditions = 50;
    std::size_t n_samples = 500;
    std::optional<std::uint64_t> seed;
    std::string data;
    std::string out;
};

int cmd_evaluate(const EvaluateOpts& o, std::ostream& out) {
    metrics::sweep_centers(o.range_size, std::max<std::size_t>(o.n_conditions, 1));  // usage check first
    if (o.labeler != "estimator" && o.labeler != "exact")
        throw UsageError("--labeler must be estimator or exact, got '" + o.labeler + "'");
    const auto models = trainer::load_run(o.gan);
    const auto cols = trainer::label_columns(models.manifest.labels);
    const std::uint64_t seed = o.seed.value_or(models.manifest.seed);
    const auto lab = o.labeler == "exact" ? metrics::Labeler::exact(models.manifest.normalizer)
                                          : metrics::Labeler::learned(models.estimator);
    auto sweep = metrics::condition_sweep(models.generator, lab, cols, o.range_size, o.n_conditions, o.n_samples,
                                          trainer::derive_seed(seed, 31));
    sweep.tag = "generator";
    const std::string data_path = o.data.empty() ? models.manifest.dataset_path : o.data;
    auto baseline = metrics::data_baseline(domain::load_dataset(data_path), cols, o.range_size, o.n_conditions);
    const std::vector<metrics::SweepReport> reps{sweep, baseline};
    write_text(o.out, seed_line(seed, "labeler=" + o.labeler) + metrics::format_report_csv(reps));
    out << "labeler " << o.labeler << ", range " << fmt(o.range_size) << ", " << sweep.rows.size()
        << " conditions: mean satisfaction " << fmt(sweep.mean_satisfaction()) << " (std "
        << fmt(sweep.std_satisfaction()) << "), mean entropy " << fmt(sweep.mean_entropy()) << '\n';
    out << "data baseline mean satisfaction " << fmt(baseline.mean_satisfaction()) << '\n';
    return kOk;
}

struct GenerateOpts {
    std::string gan;
    std::vector<double> lb;
    std::vector<double> ub;
    std::size_t n = 100;
    bool raw = false;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_generate(const GenerateOpts& o, std::ostream& out) {
    const auto models = trainer::load_run(o.gan);
    const auto cols = trainer::label_columns(models.manifest.labels);
    if (o.lb.size() != cols.size() || o.ub.size() != cols.size())
        throw UsageError("--lb and --ub need " + std::to_string(cols.size()) + " value(s) for labels " +
                         trainer::to_string(models.manifest.labels));
    const auto& norm = models.manifest.normalizer;
    losses::RangeCondition cond;
    for (std::size_t k = 0; k < cols.size(); ++k) {
        double lb = o.lb[k], ub = o.ub[k];
        if (o.raw) {
            lb = norm.normalize(lb, cols[k]);
            ub = norm.normalize(ub, cols[k]);
        }
        if (lb > ub) throw UsageError("lower bound exceeds upper bound");
        if (ub - lb < sampling::kMinConditionWidth - 1e-12)
            throw UsageError("condition width " + fmt(ub - lb) + " is below the minimum " +
                             fmt(sampling::kMinConditionWidth));
        cond.bounds.push_back({lb, ub});
    }
    cond.validate();
    const std::uint64_t seed = o.seed.value_or(models.manifest.seed);
    std::mt19937_64 rng(trainer::derive_seed(seed, 40));
    const auto designs = metrics::generate_designs(models.generator, cond, o.n, rng);

    std::ostringstream os;
    os << "# seed=" << seed << " labels=" << trainer::to_string(models.manifest.labels);
    for (std::size_t k = 0; k < cols.size(); ++k)
        os << " lb_" << domain::kLabelNames[cols[k]] << '=' << fmt(cond.bounds[k].lb) << " ub_"
           << domain::kLabelNames[cols[k]] << '=' << fmt(cond.bounds[k].ub);
    os << "\nd0,d1,d2,d3,d4,d5,aspect_ratio,area_ratio,aspect_ratio_raw,area_ratio_raw,satisfied\n";
    std::size_t ok = 0;
    for (std::size_t i = 0; i < designs.rows; ++i) {
        domain::DesignParams d{};
        for (std::size_t j = 0; j < domain::kDesignDim; ++j) d[j] = designs(i, j);
        const auto raw = domain::exact_evaluate(d);
        bool inside = true;
        for (std::size_t k = 0; k < cols.size(); ++k)
            inside = inside && cond.bounds[k].contains(norm.normalize(raw[cols[k]], cols[k]));
        ok += inside ? 1 : 0;
        for (double v : d) os << fmt(v) << ',';
        os << fmt(norm.normalize(raw.aspect_ratio, 0)) << ',' << fmt(norm.normalize(raw.area_ratio, 1)) << ','
           << fmt(raw.aspect_ratio) << ',' << fmt(raw.area_ratio) << ',' << (inside ? 1 : 0) << '\n';
    }
    write_text(o.out, os.str());
    out << "wrote " << designs.rows << " designs to " << o.out << "; exact satisfaction "
        << fmt(designs.rows ? static_cast<double>(ok) / static_cast<double>(designs.rows) : 0.0) << '\n';
    return kOk;
}

struct RenderOpts {
    std::string designs;
    std::string out;
    std::size_t columns = 8;
    double cell = 120.0;
};

int cmd_render(const RenderOpts& o, std::ostream& out) {
    const auto designs = domain::load_designs(o.designs);
    for (const auto& d : designs)
        for (double v : d)
            if (!(v >= 0.0 && v <= 1.0)) throw UsageError("design parameters must lie in [0,1]");
    write_text(o.out, domain::render_svg(designs, o.columns, o.cell));
    out << "rendered " << designs.size() << " designs to " << o.out << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Range-constrained planform generation: data, training, augmentation, evaluation."};
    app.name("rangegan");
    app.require_subcommand(1);
    app.footer(config_help());

    GenDataOpts gd;
    auto* gen_data = app.add_subcommand("gen-data", "Sample and label a synthetic planform dataset");
    gen_data->add_option("--n", gd.n, "Designs to draw before the percentile trim (>= 100)")->capture_default_str();
    gen_data->add_option("--seed", gd.seed, "Random seed")->capture_default_str();
    gen_data->add_option("--out", gd.out, "Dataset CSV path (metadata goes to <out>.meta.json)")->required();

    TrainOpts tr;
    auto* train = app.add_subcommand("train", "Pretrain the estimator, then train the conditional GAN");
    train->add_option("--data", tr.data, "Dataset CSV")->required();
    train->add_option("--labels", tr.labels, "aspect | area | both (overrides the config)");
    train->add_option("--config", tr.config, "Config file of key = value lines");
    train->add_option("--set", tr.sets, "Config override key=value (repeatable)");
    train->add_option("--seed", tr.seed, "Run seed (overrides the config)");
    train->add_option("--out-dir", tr.out_dir, "Directory for checkpoints, log and sweep")->required();
    train->footer(config_help());

    AugmentOpts au;
    auto* augment = app.add_subcommand("augment", "One self-augmentation round from a trained run");
    augment->add_option("--gan", au.gan, "Run directory written by train")->required();
    augment->add_option("--data", au.data, "Dataset the run was trained on")->required();
    augment->add_option("--pool", au.pool, "Generated pool size (overrides n_pool)");
    augment->add_option("--set", au.sets, "Config override key=value (repeatable)");
    augment->add_option("--out-dir", au.out_dir, "Directory for the augmented data, new run and report")->required();
    augment->footer(config_help());

    EvaluateOpts ev;
    auto* evaluate = app.add_subcommand("evaluate", "Condition sweep of a trained generator plus data baseline");
    evaluate->add_option("--gan", ev.gan, "Run directory")->required();
    evaluate->add_option("--labeler", ev.labeler, "estimator | exact")->capture_default_str();
    evaluate->add_option("--range-size", ev.range_size, "Condition width in normalized units, in (0,1]")
        ->capture_default_str();
    evaluate->add_option("--n-conditions", ev.n_conditions, "Conditions per label axis")->capture_default_str();
    evaluate->add_option("--n-samples", ev.n_samples, "Designs per condition")->capture_default_str();
    evaluate->add_option("--seed", ev.seed, "Sweep seed (default: the run's seed)");
    evaluate->add_option("--data", ev.data, "Dataset for the baseline (default: the run's dataset)");
    evaluate->add_option("--out", ev.out, "Report CSV path")->required();

    GenerateOpts ge;
    auto* generate = app.add_subcommand("generate", "Generate designs for one range condition");
    generate->add_option("--gan", ge.gan, "Run directory")->required();
    generate->add_option("--lb", ge.lb, "Lower bound(s), one per constrained label")->required()->delimiter(',');
    generate->add_option("--ub", ge.ub, "Upper bound(s), one per constrained label")->required()->delimiter(',');
    generate->add_option("--n", ge.n, "Designs to generate")->capture_default_str();
    generate->add_flag("--raw", ge.raw, "Bounds are raw label values, not normalized");
    generate->add_option("--seed", ge.seed, "Noise seed (default: the run's seed)");
    generate->add_option("--out", ge.out, "Designs CSV path")->required();

    RenderOpts re;
    auto* render = app.add_subcommand("render", "Draw designs to scale as an SVG sheet");
    render->add_option("--designs", re.designs, "CSV with columns d0..d5")->required();
    render->add_option("--out", re.out, "SVG path")->required();
    render->add_option("--columns", re.columns, "Designs per row")->capture_default_str();
    render->add_option("--cell", re.cell, "Cell size in px")->capture_default_str();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
        if (gen_data->parsed()) return cmd_gen_data(gd, out);
        if (train->parsed()) return cmd_train(tr, out);
        if (augment->parsed()) return cmd_augment(au, out);
        if (evaluate->parsed()) return cmd_evaluate(ev, out);
        if (generate->parsed()) return cmd_generate(ge, out);
        if (render->parsed()) return cmd_render(re, out);
        err << app.help();
        return kUsage;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const rangegan::ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kIo;
    } catch (const TrainingFault& e) {
        err << "numerical fault: " << e.what() << '\n';
        return kNumeric;
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace rangegan::cli
