#include "rangegan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "rangegan/errors.hpp"
#include "rangegan/sampling.hpp"

namespace rangegan::trainer {

using net::Matrix;
using net::Mode;

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt10(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d))
        throw ConfigurationError("config key '" + key + "': not a number: '" + v + "'");
    return d;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigurationError("config key '" + key + "': not a non-negative integer: '" + v + "'");
    errno = 0;
    const auto n = std::strtoull(v.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigurationError("config key '" + key + "': integer out of range");
    return n;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigurationError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_count(key, trim(item)));
    if (out.empty()) throw ConfigurationError("config key '" + key + "': empty width list");
    return out;
}

std::string format_widths(const std::vector<std::size_t>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
    return s;
}

struct Field {
    const char* key;
    std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define RG_COUNT(name)                                                                                      \
    Field {                                                                                                 \
        #name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_count(k, v); }, \
            [](const TrainConfig& c) { return std::to_string(c.name); }                                     \
    }
#define RG_REAL(name)                                                                                        \
    Field {                                                                                                  \
        #name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_double(k, v); }, \
            [](const TrainConfig& c) { return fmt17(c.name); }                                               \
    }
#define RG_WIDTHS(name)                                                                                      \
    Field {                                                                                                  \
        #name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_widths(k, v); }, \
            [](const TrainConfig& c) { return format_widths(c.name); }                                       \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        RG_COUNT(seed),
        Field{"labels", [](TrainConfig& c, const std::string&, const std::string& v) { c.labels = parse_label_set(v); },
              [](const TrainConfig& c) { return std::string(to_string(c.labels)); }},
        RG_COUNT(gan_steps),
        RG_COUNT(batch_size),
        RG_REAL(gen_lr),
        RG_REAL(disc_lr),
        RG_REAL(gan_lr_decay),
        RG_COUNT(gan_lr_decay_steps),
        RG_REAL(gan_beta1),
        RG_REAL(gan_beta2),
        RG_COUNT(estimator_steps),
        RG_COUNT(estimator_batch_size),
        RG_REAL(estimator_lr),
        RG_REAL(estimator_lr_decay),
        RG_COUNT(estimator_lr_decay_steps),
        RG_REAL(estimator_beta1),
        RG_REAL(estimator_beta2),
        RG_REAL(holdout_fraction),
        RG_REAL(weights.phi),
        RG_REAL(weights.lambda1),
        RG_REAL(weights.lambda2),
        RG_COUNT(weights.slices),
        RG_COUNT(noise_dim),
        RG_WIDTHS(generator_widths),
        RG_WIDTHS(discriminator_widths),
        RG_WIDTHS(estimator_widths),
        Field{"estimator_residual",
              [](TrainConfig& c, const std::string& k, const std::string& v) {
                  c.estimator_residual = parse_bool(k, v);
              },
              [](const TrainConfig& c) { return std::string(c.estimator_residual ? "true" : "false"); }},
        RG_COUNT(log_interval),
        RG_COUNT(n_pool),
        RG_COUNT(augment_bins),
        RG_COUNT(pool_conditions),
        RG_REAL(pool_width),
        RG_COUNT(sweep_conditions),
        RG_COUNT(sweep_samples),
        RG_REAL(sweep_range),
    };
    return f;
}

#undef RG_COUNT
#undef RG_REAL
#undef RG_WIDTHS

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * m.cols), m.cols,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
    return out;
}

double mean_sigmoid(std::span<const double> logits) {
    double s = 0.0;
    for (const double l : logits) s += net::sigmoid(l);
    return logits.empty() ? 0.0 : s / static_cast<double>(logits.size());
}

int bin_of(double v, std::size_t bins) {
    if (!(v >= 0.0 && v <= 1.0)) return -1;
    const auto b = static_cast<std::size_t>(v * static_cast<double>(bins));
    return static_cast<int>(std::min(b, bins - 1));
}

models::GeneratorConfig generator_config(const TrainConfig& cfg) {
    models::GeneratorConfig g;
    g.noise_dim = cfg.noise_dim;
    g.cond_dim = 2 * label_columns(cfg.labels).size();
    g.hidden = cfg.generator_widths;
    g.output_dim = domain::kDesignDim;
    return g;
}

models::DiscriminatorConfig discriminator_config(const TrainConfig& cfg) {
    models::DiscriminatorConfig d;
    d.input_dim = domain::kDesignDim;
    d.hidden = cfg.discriminator_widths;
    return d;
}

models::EstimatorConfig estimator_config(const TrainConfig& cfg) {
    models::EstimatorConfig e;
    e.input_dim = domain::kDesignDim;
    e.hidden = cfg.estimator_widths;
    e.output_dim = domain::kLabelCount;
    e.residual = cfg.estimator_residual;
    return e;
}

}  // namespace

LabelSet parse_label_set(const std::string& s) {
    if (s == "aspect") return LabelSet::Aspect;
    if (s == "area") return LabelSet::Area;
    if (s == "both") return LabelSet::Both;
    throw ConfigurationError("labels must be aspect, area or both, got '" + s + "'");
}

const char* to_string(LabelSet s) {
    switch (s) {
        case LabelSet::Aspect: return "aspect";
        case LabelSet::Area: return "area";
        case LabelSet::Both: return "both";
    }
    return "?";
}

std::vector<std::size_t> label_columns(LabelSet s) {
    switch (s) {
        case LabelSet::Aspect: return {domain::kAspectLabel};
        case LabelSet::Area: return {domain::kAreaLabel};
        case LabelSet::Both: return {domain::kAspectLabel, domain::kAreaLabel};
    }
    return {};
}

void TrainConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigurationError(std::string("config key '") + name + "' must be positive");
    };
    auto positive_real = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigurationError(std::string("config key '") + name + "' must be positive");
    };
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v < 1.0)) throw ConfigurationError(std::string("config key '") + name + "' must lie in [0,1)");
    };
    positive(gan_steps, "gan_steps");
    positive(batch_size, "batch_size");
    if (batch_size < 2) throw ConfigurationError("config key 'batch_size' must be at least 2 for batch statistics");
    positive_real(gen_lr, "gen_lr");
    positive_real(disc_lr, "disc_lr");
    positive_real(gan_lr_decay, "gan_lr_decay");
    positive(gan_lr_decay_steps, "gan_lr_decay_steps");
    unit(gan_beta1, "gan_beta1");
    unit(gan_beta2, "gan_beta2");
    positive(estimator_steps, "estimator_steps");
    positive(estimator_batch_size, "estimator_batch_size");
    if (estimator_batch_size < 2)
        throw ConfigurationError("config key 'estimator_batch_size' must be at least 2 for batch statistics");
    positive_real(estimator_lr, "estimator_lr");
    positive_real(estimator_lr_decay, "estimator_lr_decay");
    positive(estimator_lr_decay_steps, "estimator_lr_decay_steps");
    unit(estimator_beta1, "estimator_beta1");
    unit(estimator_beta2, "estimator_beta2");
    unit(holdout_fraction, "holdout_fraction");
    positive_real(weights.phi, "weights.phi");
    if (!(weights.lambda1 >= 0.0)) throw ConfigurationError("config key 'weights.lambda1' must be non-negative");
    if (!(weights.lambda2 >= 0.0)) throw ConfigurationError("config key 'weights.lambda2' must be non-negative");
    positive(weights.slices, "weights.slices");
    positive(noise_dim, "noise_dim");
    for (const auto* w : {&generator_widths, &discriminator_widths, &estimator_widths}) {
        if (w->empty()) throw ConfigurationError("network widths must not be empty");
        for (const auto x : *w) positive(x, "widths");
    }
    positive(log_interval, "log_interval");
    positive(augment_bins, "augment_bins");
    positive(pool_conditions, "pool_conditions");
    if (!(pool_width > 0.0 && pool_width <= 1.0)) throw ConfigurationError("config key 'pool_width' must lie in (0,1]");
    positive(sweep_conditions, "sweep_conditions");
    positive(sweep_samples, "sweep_samples");
    if (!(sweep_range > 0.0 && sweep_range <= 1.0))
        throw ConfigurationError("config key 'sweep_range' must lie in (0,1]");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
    std::map<std::string, const Field*> by_key;
    for (const auto& f : fields()) by_key[f.key] = &f;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigurationError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = by_key.find(key);
        if (it == by_key.end()) throw ConfigurationError("unknown config key '" + key + "'");
        it->second->set(base, key, value);
    }
    base.validate();
    return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string format_config(const TrainConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    return out;
}

std::vector<std::pair<std::string, std::string>> config_keys() {
    const TrainConfig defaults;
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.key, f.get(defaults));
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the pair
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + (stream + 1) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---- estimator -----------------------------------------------------------------

EstimatorRun train_estimator(const domain::Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.size() < 2) throw UsageError("estimator training needs at least two rows");
    ds.meta.normalizer.validate();

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 split_rng(derive_seed(cfg.seed, 10));
    std::shuffle(order.begin(), order.end(), split_rng);
    auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(ds.size())));
    n_hold = std::min(n_hold, ds.size() - 2);
    std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
    std::sort(hold.begin(), hold.end());
    std::sort(train.begin(), train.end());

    domain::Dataset train_ds;
    train_ds.meta = ds.meta;
    for (const auto i : train) train_ds.rows.push_back(ds.rows[i]);
    const Matrix x_all = train_ds.design_matrix();
    const Matrix y_all = train_ds.normalized_labels();
    const sampling::UniformLabelSampler sampler(train_ds);

    EstimatorRun run;
    run.estimator = models::Estimator(estimator_config(cfg), derive_seed(cfg.seed, 11));
    run.adam = net::make_adam(run.estimator.layers(), cfg.estimator_lr, cfg.estimator_lr_decay,
                              static_cast<std::int64_t>(cfg.estimator_lr_decay_steps), cfg.estimator_beta1,
                              cfg.estimator_beta2);
    std::mt19937_64 rng(derive_seed(cfg.seed, 12));

    for (std::size_t step = 0; step < cfg.estimator_steps; ++step) {
        const auto idx = sampler.sample(cfg.estimator_batch_size, step % domain::kLabelCount, rng);
        const Matrix x = select_rows(x_all, idx);
        const Matrix y = select_rows(y_all, idx);
        models::Tape tape;
        const Matrix pred = run.estimator.forward(x, Mode::Train, &tape);
        Matrix d(pred.rows, pred.cols);
        double loss = 0.0;
        const double scale = 1.0 / static_cast<double>(pred.data.size());
        for (std::size_t k = 0; k < pred.data.size(); ++k) {
            const double r = pred.data[k] - y.data[k];
            loss += r * r * scale;
            d.data[k] = 2.0 * r * scale;
        }
        if (!std::isfinite(loss))
            throw TrainingFault("estimator loss is non-finite at step " + std::to_string(step + 1) +
                                " (lr " + fmt10(net::effective_lr(run.adam, run.adam.t)) + ")");
        auto grads = net::zeros_like(run.estimator.layers());
        run.estimator.backward(tape, d, &grads);
        net::adam_step(run.estimator.layers(), grads, run.adam);
        run.report.final_loss = loss;
    }

    const std::vector<std::size_t>& eval_rows = hold.empty() ? train : hold;
    domain::Dataset eval_ds;
    eval_ds.meta = ds.meta;
    for (const auto i : eval_rows) eval_ds.rows.push_back(ds.rows[i]);
    const Matrix pred = run.estimator.predict(eval_ds.design_matrix());
    const Matrix truth = eval_ds.normalized_labels();
    run.report.holdout_mae.assign(domain::kLabelCount, 0.0);
    for (std::size_t i = 0; i < pred.rows; ++i)
        for (std::size_t l = 0; l < domain::kLabelCount; ++l)
            run.report.holdout_mae[l] += std::abs(pred(i, l) - truth(i, l)) / static_cast<double>(pred.rows);
    run.report.train_rows = train.size();
    run.report.holdout_rows = hold.size();
    return run;
}

// ---- adversarial training ---------------------------------------------------------

GanRun train_rangegan(const domain::Dataset& ds, const models::Estimator& est, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.size() == 0) throw UsageError("GAN training needs a nonempty dataset");
    if (est.config().input_dim != domain::kDesignDim || est.config().output_dim != domain::kLabelCount)
        throw ConfigurationError("estimator dimensions do not match the design domain");
    const auto cols = label_columns(cfg.labels);
    const auto& w = cfg.weights;

    GanRun run;
    run.generator = models::Generator(generator_config(cfg), derive_seed(cfg.seed, 20));
    run.discriminator = models::Discriminator(discriminator_config(cfg), derive_seed(cfg.seed, 21));
    const auto decay = static_cast<std::int64_t>(cfg.gan_lr_decay_steps);
    run.gen_adam = net::make_adam(run.generator.layers(), cfg.gen_lr, cfg.gan_lr_decay, decay, cfg.gan_beta1,
                                  cfg.gan_beta2);
    run.disc_adam = net::make_adam(run.discriminator.layers(), cfg.disc_lr, cfg.gan_lr_decay, decay, cfg.gan_beta1,
                                   cfg.gan_beta2);
    std::mt19937_64 rng(derive_seed(cfg.seed, 22));

    const Matrix designs = ds.design_matrix();
    const sampling::UniformLabelSampler sampler(ds);
    auto& g = run.generator;
    auto& d = run.discriminator;

    for (std::size_t step = 1; step <= cfg.gan_steps; ++step) {
        const auto cond = sampling::sample_condition(rng, cols.size());
        const auto enc = cond.encode();
        const auto real_rows = sampler.sample(cfg.batch_size, cols[(step - 1) % cols.size()], rng);
        const Matrix real = select_rows(designs, real_rows);
        const Matrix z = metrics::sample_noise(cfg.batch_size, cfg.noise_dim, rng);

        models::Tape g_tape;
        const Matrix fake = g.forward(z, enc, Mode::Train, &g_tape);

        // discriminator
        models::Tape real_tape, fake_tape;
        const auto real_logits = d.logits(real, &real_tape);
        const auto fake_logits = d.logits(fake, &fake_tape);
        const auto dl = losses::discriminator_loss(real_logits, fake_logits);
        auto d_grads = net::zeros_like(d.layers());
        d.backward(real_tape, dl.grad_real, &d_grads);
        d.backward(fake_tape, dl.grad_fake, &d_grads);

        // generator, against the discriminator before its update
        const auto adv = losses::generator_adversarial_loss(fake_logits);
        Matrix d_fake = d.backward(fake_tape, adv.grad, nullptr);

        models::Tape est_tape;
        const Matrix pred = est.predict(fake, &est_tape);
        std::vector<std::vector<double>> slices;
        for (const auto& b : cond.bounds) slices.push_back(losses::draw_slices(b.lb, b.ub, w.slices, rng));
        const auto cl = losses::condition_losses(pred, cols, cond, w.phi, slices);
        const double total = losses::generator_total_loss(adv.value, cl.range, cl.uniformity, w);

        if (!std::isfinite(dl.value) || !std::isfinite(total)) {
            throw TrainingFault("non-finite loss at step " + std::to_string(step) + ": d_loss=" + fmt10(dl.value) +
                                " g_adversarial=" + fmt10(adv.value) + " range=" + fmt10(cl.range) +
                                " uniformity=" + fmt10(cl.uniformity) + " g_total=" + fmt10(total));
        }

        if (w.lambda1 != 0.0 || w.lambda2 != 0.0) {
            Matrix d_pred(pred.rows, pred.cols);
            for (std::size_t k = 0; k < d_pred.data.size(); ++k)
                d_pred.data[k] = w.lambda1 * cl.grad_range.data[k] + w.lambda2 * cl.grad_uniformity.data[k];
            const Matrix d_est = est.backward(est_tape, d_pred, nullptr);
            net::add_in_place(d_fake, d_est);
        }
        auto g_grads = net::zeros_like(g.layers());
        g.backward(g_tape, d_fake, g_grads);

        net::adam_step(d.layers(), d_grads, run.disc_adam);
        net::adam_step(g.layers(), g_grads, run.gen_adam);

        if (step % cfg.log_interval == 0 || step == cfg.gan_steps) {
            LogRow row;
            row.step = step;
            row.d_loss = dl.value;
            row.g_adversarial = adv.value;
            row.range = cl.range;
            row.uniformity = cl.uniformity;
            row.g_total = total;
            row.d_real = mean_sigmoid(real_logits);
            row.d_fake = mean_sigmoid(fake_logits);
            row.gen_lr = net::effective_lr(run.gen_adam, run.gen_adam.t);
            row.disc_lr = net::effective_lr(run.disc_adam, run.disc_adam.t);
            row.batch_satisfaction = metrics::satisfaction(pred, cols, cond);
            run.log.push_back(row);
        }
    }
    return run;
}

std::string format_log_csv(std::span<const LogRow> log, std::uint64_t seed) {
    std::ostringstream os;
    os << "# seed=" << seed << "\n";
    os << "step,d_loss,g_adversarial,range,uniformity,g_total,d_real,d_fake,gen_lr,disc_lr,batch_satisfaction\n";
    for (const auto& r : log) {
        os << r.step << ',' << fmt10(r.d_loss) << ',' << fmt10(r.g_adversarial) << ',' << fmt10(r.range) << ','
           << fmt10(r.uniformity) << ',' << fmt10(r.g_total) << ',' << fmt10(r.d_real) << ',' << fmt10(r.d_fake)
           << ',' << fmt10(r.gen_lr) << ',' << fmt10(r.disc_lr) << ',' << fmt10(r.batch_satisfaction) << '\n';
    }
    return os.str();
}

// ---- self-augmentation -----------------------------------------------------------

std::vector<std::size_t> fill_bins(std::span<const std::size_t> counts, std::span<const int> pool_bins) {
    std::vector<std::size_t> picked;
    if (counts.empty()) return picked;
    const std::size_t target = *std::max_element(counts.begin(), counts.end());
    for (std::size_t b = 0; b < counts.size(); ++b) {
        std::size_t have = counts[b];
        for (std::size_t i = 0; i < pool_bins.size() && have < target; ++i) {
            if (pool_bins[i] == static_cast<int>(b)) {
                picked.push_back(i);
                ++have;
            }
        }
    }
    return picked;
}

AugmentResult self_augment(const models::Generator& g, const domain::Dataset& ds,
                           std::span<const std::size_t> label_columns, std::size_t n_pool, std::size_t bins,
                           std::mt19937_64& rng, std::size_t pool_conditions, double pool_width) {
    if (label_columns.empty()) throw UsageError("self-augmentation needs a targeted label");
    if (g.config().cond_dim != 2 * label_columns.size())
        throw ConfigurationError("generator condition width does not match the targeted labels");
    if (bins == 0 || pool_conditions == 0) throw UsageError("bins and pool conditions must be positive");
    const auto& norm = ds.meta.normalizer;

    AugmentResult out;
    out.dataset = ds;
    auto& rep = out.report;
    rep.label_columns.assign(label_columns.begin(), label_columns.end());
    for (const auto c : label_columns) rep.bins_before.push_back(domain::label_bin_counts(ds, c, bins));

    // pool: windows swept along each targeted label, the others left open
    std::vector<domain::DatasetRow> pool;
    const auto centers = metrics::sweep_centers(pool_width, pool_conditions);
    const std::size_t windows = centers.size() * label_columns.size();
    for (std::size_t wi = 0; wi < windows; ++wi) {
        const std::size_t count = n_pool / windows + (wi < n_pool % windows ? 1 : 0);
        if (count == 0) continue;
        const std::size_t focus = wi / centers.size();
        const double c = centers[wi % centers.size()];
        losses::RangeCondition cond;
        for (std::size_t k = 0; k < label_columns.size(); ++k) {
            if (k == focus)
                cond.bounds.push_back({std::max(0.0, c - 0.5 * pool_width), std::min(1.0, c + 0.5 * pool_width)});
            else
                cond.bounds.push_back({0.0, 1.0});
        }
        const Matrix designs = metrics::generate_designs(g, cond, count, rng);
        for (std::size_t i = 0; i < designs.rows; ++i) {
            domain::DatasetRow row;
            for (std::size_t j = 0; j < domain::kDesignDim; ++j) row.design[j] = std::clamp(designs(i, j), 0.0, 1.0);
            row.raw = domain::exact_evaluate(row.design);
            row.provenance = domain::Provenance::Augmented;
            pool.push_back(row);
        }
    }
    rep.pool_size = pool.size();

    std::vector<bool> used(pool.size(), false);
    for (const auto c : label_columns) {
        const auto counts = domain::label_bin_counts(out.dataset, c, bins);
        std::vector<int> pool_bins(pool.size(), -1);
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (!used[i]) pool_bins[i] = bin_of(norm.normalize(pool[i].raw[c], c), bins);
        for (const auto i : fill_bins(counts, pool_bins)) {
            used[i] = true;
            out.dataset.rows.push_back(pool[i]);
            ++rep.rows_added;
        }
    }
    for (const auto c : label_columns) rep.bins_after.push_back(domain::label_bin_counts(out.dataset, c, bins));
    return out;
}

RoundResult augmentation_round(const domain::Dataset& ds, const models::Generator& base_generator,
                               const TrainConfig& cfg) {
    cfg.validate();
    const auto cols = label_columns(cfg.labels);
    RoundResult r;
    std::mt19937_64 rng(derive_seed(cfg.seed, 30));
    r.augmented = self_augment(base_generator, ds, cols, cfg.n_pool, cfg.augment_bins, rng, cfg.pool_conditions,
                               cfg.pool_width);
    r.estimator = train_estimator(r.augmented.dataset, cfg);
    r.gan = train_rangegan(r.augmented.dataset, r.estimator.estimator, cfg);

    const auto exact = metrics::Labeler::exact(ds.meta.normalizer);
    const auto sweep_seed = derive_seed(cfg.seed, 31);
    r.before = metrics::condition_sweep(base_generator, exact, cols, cfg.sweep_range, cfg.sweep_conditions,
                                        cfg.sweep_samples, sweep_seed);
    r.before.tag = "before";
    r.after = metrics::condition_sweep(r.gan.generator, exact, cols, cfg.sweep_range, cfg.sweep_conditions,
                                       cfg.sweep_samples, sweep_seed);
    r.after.tag = "after";
    return r;
}

std::string format_bin_table(const AugmentReport& r) {
    std::ostringstream os;
    os << "label,stage";
    const std::size_t bins = r.bins_before.empty() ? 0 : r.bins_before.front().size();
    for (std::size_t b = 0; b < bins; ++b) os << ",bin" << b;
    os << ",max_min_ratio\n";
    auto ratio = [](const std::vector<std::size_t>& c) {
        const double v = domain::max_min_ratio(c);
        return std::isinf(v) ? std::string("inf") : fmt10(v);
    };
    for (std::size_t k = 0; k < r.label_columns.size(); ++k) {
        for (const auto* stage : {"before", "after"}) {
            const auto& c = std::string(stage) == "before" ? r.bins_before[k] : r.bins_after[k];
            os << domain::kLabelNames[r.label_columns[k]] << ',' << stage;
            for (const auto v : c) os << ',' << v;
            os << ',' << ratio(c) << '\n';
        }
    }
    return os.str();
}

// ---- run bundles -------------------------------------------------------------------

namespace {

constexpr const char* kManifestFormat = "rangegan-run";

std::string in_dir(const std::string& dir, const char* file) { return (std::filesystem::path(dir) / file).string(); }

}  // namespace

void save_run(const std::string& dir, const TrainedModels& m) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    net::save_checkpoint(in_dir(dir, "generator.json"), {"generator", m.generator.layers(), std::nullopt});
    net::save_checkpoint(in_dir(dir, "discriminator.json"), {"discriminator", m.discriminator.layers(), std::nullopt});
    net::save_checkpoint(in_dir(dir, "estimator.json"), {"estimator", m.estimator.layers(), std::nullopt});

    nlohmann::json j;
    j["format"] = kManifestFormat;
    j["version"] = net::kCheckpointVersion;
    j["networks"] = {{"generator", "generator.json"},
                     {"discriminator", "discriminator.json"},
                     {"estimator", "estimator.json"}};
    j["noise_dim"] = m.manifest.noise_dim;
    j["cond_dim"] = m.manifest.cond_dim;
    j["n_labels"] = m.manifest.n_labels;
    j["labels"] = to_string(m.manifest.labels);
    j["raw_min"] = m.manifest.normalizer.raw_min;
    j["raw_max"] = m.manifest.normalizer.raw_max;
    j["seed"] = m.manifest.seed;
    j["dataset"] = m.manifest.dataset_path;
    j["config"] = m.manifest.config_text;
    const std::string path = in_dir(dir, "manifest.json");
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << j.dump(2) << '\n';
    if (!f) throw IoError("write failed: " + path);
}

TrainedModels load_run(const std::string& dir) {
    const std::string path = in_dir(dir, "manifest.json");
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path + ": " + e.what());
    }
    TrainedModels m;
    try {
        if (j.at("format").get<std::string>() != kManifestFormat) throw ConfigurationError("not a run manifest: " + path);
        auto& man = m.manifest;
        man.noise_dim = j.at("noise_dim").get<std::size_t>();
        man.cond_dim = j.at("cond_dim").get<std::size_t>();
        man.n_labels = j.at("n_labels").get<std::size_t>();
        man.labels = parse_label_set(j.at("labels").get<std::string>());
        man.normalizer.raw_min = j.at("raw_min").get<std::vector<double>>();
        man.normalizer.raw_max = j.at("raw_max").get<std::vector<double>>();
        man.seed = j.at("seed").get<std::uint64_t>();
        man.dataset_path = j.at("dataset").get<std::string>();
        man.config_text = j.at("config").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError("manifest " + path + ": " + e.what());
    }
    const auto& man = m.manifest;
    man.normalizer.validate();
    const TrainConfig cfg = parse_config(man.config_text);
    if (label_columns(man.labels).size() != man.n_labels || 2 * man.n_labels != man.cond_dim ||
        cfg.noise_dim != man.noise_dim || cfg.labels != man.labels)
        throw ConfigurationError("manifest " + path + " has inconsistent dimensions");

    m.generator = models::Generator(generator_config(cfg), net::load_checkpoint(in_dir(dir, "generator.json")).layers);
    m.discriminator =
        models::Discriminator(discriminator_config(cfg), net::load_checkpoint(in_dir(dir, "discriminator.json")).layers);
    m.estimator = models::Estimator(estimator_config(cfg), net::load_checkpoint(in_dir(dir, "estimator.json")).layers);
    return m;
}

}  // namespace rangegan::trainer
