#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rangegan/errors.hpp"
#include "rangegan/trainer.hpp"

using namespace rangegan;
using namespace rangegan::trainer;

namespace {

// Small networks and few steps so a whole run takes well under a second.
TrainConfig tiny() {
    TrainConfig c;
    c.gan_steps = 60;
    c.batch_size = 16;
    c.log_interval = 20;
    c.gan_lr_decay_steps = 25;
    c.estimator_steps = 60;
    c.estimator_batch_size = 32;
    c.noise_dim = 4;
    c.generator_widths = {16, 16};
    c.discriminator_widths = {16, 16};
    c.estimator_widths = {16, 16};
    c.n_pool = 200;
    c.pool_conditions = 5;
    c.sweep_conditions = 5;
    c.sweep_samples = 50;
    return c;
}

// The fill rule replayed directly: walk bins in order, take pool entries of that bin in order.
std::vector<std::size_t> simulate_fill(std::vector<std::size_t> counts, const std::vector<int>& pool) {
    const std::size_t target = *std::max_element(counts.begin(), counts.end());
    std::vector<std::size_t> picked;
    for (std::size_t b = 0; b < counts.size(); ++b)
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (pool[i] == static_cast<int>(b) && counts[b] < target) {
                picked.push_back(i);
                ++counts[b];
            }
    return picked;
}

std::string temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p.string();
}

}  // namespace

TEST_CASE("config text sets fields and keeps the rest") {
    const auto c = parse_config(
        "# comment line\n"
        "seed = 42\n"
        "labels = both   # trailing comment\n"
        "gen_lr=3e-4\n"
        "\n"
        "weights.lambda2 = 0\n"
        "generator_widths = 8, 9\n"
        "estimator_residual = false\n");
    CHECK(c.seed == 42);
    CHECK(c.labels == LabelSet::Both);
    CHECK(c.gen_lr == 3e-4);
    CHECK(c.weights.lambda2 == 0.0);
    CHECK(c.generator_widths == std::vector<std::size_t>{8, 9});
    CHECK_FALSE(c.estimator_residual);
    CHECK(c.disc_lr == TrainConfig{}.disc_lr);
    CHECK(c.batch_size == 32);
}

TEST_CASE("config errors name the key") {
    try {
        parse_config("bogus_key = 1\n");
        FAIL("expected a configuration error");
    } catch (const ConfigurationError& e) {
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }
    try {
        parse_config("batch_size = many\n");
        FAIL("expected a configuration error");
    } catch (const ConfigurationError& e) {
        CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigurationError);
    CHECK_THROWS_AS(parse_config("labels = wingspan\n"), ConfigurationError);
    CHECK_THROWS_AS(load_config("/nonexistent/dir/cfg.txt"), IoError);
}

TEST_CASE("validate rejects zero counts and bad ranges") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigurationError);
    c = TrainConfig{};
    c.holdout_fraction = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigurationError);
    c = TrainConfig{};
    c.gen_lr = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigurationError);
    CHECK_THROWS_AS(parse_config("batch_size = 0\n"), ConfigurationError);
}

TEST_CASE("formatted config reads back to itself and lists every key") {
    TrainConfig c = tiny();
    c.seed = 77;
    c.labels = LabelSet::Area;
    c.weights.phi = 12.5;
    c.pool_width = 0.123456789012345;
    const std::string text = format_config(c);
    CHECK(format_config(parse_config(text)) == text);
    const auto keys = config_keys();
    std::set<std::string> names;
    for (const auto& [k, v] : keys) names.insert(k);
    std::istringstream is(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto key = line.substr(0, line.find(' '));
        CHECK(names.count(key) == 1);
        ++n;
    }
    CHECK(n == keys.size());
}

TEST_CASE("label sets") {
    CHECK(parse_label_set("aspect") == LabelSet::Aspect);
    CHECK(parse_label_set("area") == LabelSet::Area);
    CHECK(parse_label_set("both") == LabelSet::Both);
    CHECK_THROWS_AS(parse_label_set("volume"), ConfigurationError);
    CHECK(label_columns(LabelSet::Aspect) == std::vector<std::size_t>{0});
    CHECK(label_columns(LabelSet::Area) == std::vector<std::size_t>{1});
    CHECK(label_columns(LabelSet::Both) == std::vector<std::size_t>{0, 1});
    CHECK(std::string(to_string(LabelSet::Both)) == "both");
}

TEST_CASE("derived seeds differ across streams and runs") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 10; ++s)
        for (std::uint64_t k = 0; k < 40; ++k) seen.insert(derive_seed(s, k));
    CHECK(seen.size() == 400);
    CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("fill rule worked example") {
    const std::vector<std::size_t> counts{50, 10, 5, 50, 50, 50, 50, 50, 50, 50};
    std::vector<int> pool;
    for (int rep = 0; rep < 60; ++rep)
        for (int b = 0; b < 10; ++b) pool.push_back(b);
    const auto picked = fill_bins(counts, pool);
    CHECK(picked.size() == 85);
    std::vector<std::size_t> after = counts;
    for (auto i : picked) ++after[static_cast<std::size_t>(pool[i])];
    for (auto v : after) CHECK(v == 50);
    CHECK(picked == simulate_fill(counts, pool));
}

TEST_CASE("fill rule exhaustion and no-deficit branches") {
    const std::vector<std::size_t> counts{50, 10, 5, 20, 50, 50, 50, 50, 50, 50};
    std::vector<int> pool;
    for (int rep = 0; rep < 60; ++rep)
        for (int b = 0; b < 10; ++b)
            if (b != 3) pool.push_back(b);
    pool.push_back(-1);
    const auto picked = fill_bins(counts, pool);
    std::vector<std::size_t> after = counts;
    for (auto i : picked) {
        REQUIRE(pool[i] >= 0);
        ++after[static_cast<std::size_t>(pool[i])];
    }
    CHECK(after[3] == 20);
    CHECK(after[1] == 50);
    CHECK(after[2] == 50);
    CHECK(picked.size() == 85);

    const std::vector<std::size_t> flat(10, 40);
    CHECK(fill_bins(flat, pool).empty());
    CHECK(fill_bins(std::vector<std::size_t>{}, pool).empty());
}

TEST_CASE("fill rule matches a replay on random inputs") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> count(0, 30), bin(-1, 9), len(0, 200);
    for (int t = 0; t < 200; ++t) {
        std::vector<std::size_t> counts(10);
        for (auto& c : counts) c = static_cast<std::size_t>(count(rng));
        std::vector<int> pool(static_cast<std::size_t>(len(rng)));
        for (auto& p : pool) p = bin(rng);
        const auto picked = fill_bins(counts, pool);
        CHECK(picked == simulate_fill(counts, pool));
        const std::set<std::size_t> unique(picked.begin(), picked.end());
        CHECK(unique.size() == picked.size());
    }
}

TEST_CASE("estimator on constant labels learns the constant") {
    domain::Dataset ds = domain::generate_dataset(300, 4);
    for (auto& r : ds.rows) {
        r.raw.aspect_ratio = 1.0;
        r.raw.area_ratio = 0.5;
    }
    ds.meta.normalizer.raw_min = {0.0, 0.0};
    ds.meta.normalizer.raw_max = {2.0, 1.0};  // normalized labels 0.5 and 0.5
    TrainConfig c = tiny();
    c.estimator_steps = 1500;
    c.estimator_lr = 1e-2;
    c.estimator_lr_decay_steps = 750;
    const auto run = train_estimator(ds, c);
    CHECK(run.report.holdout_rows == static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(ds.size()))));
    CHECK(run.report.train_rows + run.report.holdout_rows == ds.size());
    REQUIRE(run.report.holdout_mae.size() == 2);
    CHECK(run.report.holdout_mae[0] < 0.02);
    CHECK(run.report.holdout_mae[1] < 0.02);
    CHECK(std::isfinite(run.report.final_loss));
}

TEST_CASE("estimator training is reproducible") {
    const domain::Dataset ds = domain::generate_dataset(300, 5);
    const auto a = train_estimator(ds, tiny());
    const auto b = train_estimator(ds, tiny());
    CHECK(a.estimator.layers() == b.estimator.layers());
    CHECK(a.report.holdout_mae == b.report.holdout_mae);
}

TEST_CASE("GAN run leaves the estimator alone and logs deterministically") {
    const domain::Dataset ds = domain::generate_dataset(300, 6);
    const TrainConfig c = tiny();
    const auto est = train_estimator(ds, c).estimator;
    const auto hash = net::parameter_hash(est.layers());
    const auto a = train_rangegan(ds, est, c);
    CHECK(net::parameter_hash(est.layers()) == hash);
    const auto b = train_rangegan(ds, est, c);
    CHECK(format_log_csv(a.log, c.seed) == format_log_csv(b.log, c.seed));
    CHECK(a.generator.layers() == b.generator.layers());

    REQUIRE(a.log.size() == 3);
    CHECK(a.log[0].step == 20);
    CHECK(a.log[2].step == 60);
    for (const auto& r : a.log) {
        CHECK(std::isfinite(r.g_total));
        CHECK(r.g_total == doctest::Approx(r.g_adversarial + c.weights.lambda1 * r.range + c.weights.lambda2 * r.uniformity));
        CHECK(r.batch_satisfaction >= 0.0);
        CHECK(r.batch_satisfaction <= 1.0);
    }
    // decay every 25 steps by 0.8
    CHECK(a.log[0].gen_lr == doctest::Approx(c.gen_lr));
    CHECK(a.log[1].gen_lr == doctest::Approx(c.gen_lr * 0.8));
    CHECK(a.log[2].gen_lr == doctest::Approx(c.gen_lr * 0.64));

    TrainConfig other = c;
    other.seed = 2;
    CHECK_FALSE(format_log_csv(train_rangegan(ds, est, other).log, 2) == format_log_csv(a.log, 2));
}

TEST_CASE("log csv carries the seed and a header") {
    std::vector<LogRow> rows(2);
    rows[1].step = 5;
    const auto csv = format_log_csv(rows, 1234);
    std::istringstream is(csv);
    std::string l1, l2;
    std::getline(is, l1);
    std::getline(is, l2);
    CHECK(l1 == "# seed=1234");
    CHECK(l2.rfind("step,d_loss,", 0) == 0);
}

TEST_CASE("vanilla GAN: zero weights leave only the adversarial term") {
    const domain::Dataset ds = domain::generate_dataset(400, 7);
    TrainConfig c = tiny();
    c.weights.lambda1 = 0.0;
    c.weights.lambda2 = 0.0;
    c.gan_steps = 600;
    c.log_interval = 100;
    c.gan_lr_decay_steps = 5000;
    c.gen_lr = c.disc_lr = 1e-3;
    const auto est = train_estimator(ds, tiny()).estimator;
    const auto run = train_rangegan(ds, est, c);
    for (const auto& r : run.log) CHECK(r.g_total == r.g_adversarial);
    // the discriminator cannot separate real from fake by the end
    const auto& last = run.log.back();
    CHECK(last.d_fake > 0.3);
    CHECK(last.d_fake < 0.7);
    CHECK(std::abs(last.d_real - last.d_fake) < 0.2);
}

TEST_CASE("self augmentation adds exact rows and never worsens the balance") {
    const domain::Dataset ds = domain::generate_dataset(1000, 8);
    TrainConfig c = tiny();
    const auto est = train_estimator(ds, c).estimator;
    const auto gan = train_rangegan(ds, est, c);
    const std::vector<std::size_t> aspect{0};
    std::mt19937_64 rng(9);
    const auto res = self_augment(gan.generator, ds, aspect, 500, 10, rng, 5, 0.1);
    CHECK(res.report.pool_size == 500);
    CHECK(res.dataset.size() == ds.size() + res.report.rows_added);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(res.dataset.rows[i] == ds.rows[i]);
    for (std::size_t i = ds.size(); i < res.dataset.size(); ++i) {
        const auto& r = res.dataset.rows[i];
        CHECK(r.provenance == domain::Provenance::Augmented);
        CHECK(r.raw == domain::exact_evaluate(r.design));
    }
    CHECK(res.dataset.meta.normalizer == ds.meta.normalizer);
    CHECK(res.report.bins_before[0] == domain::label_bin_counts(ds, 0));
    CHECK(res.report.bins_after[0] == domain::label_bin_counts(res.dataset, 0));
    const auto peak = *std::max_element(res.report.bins_before[0].begin(), res.report.bins_before[0].end());
    for (std::size_t b = 0; b < 10; ++b) {
        CHECK(res.report.bins_after[0][b] >= res.report.bins_before[0][b]);
        CHECK(res.report.bins_after[0][b] <= std::max(peak, res.report.bins_before[0][b]));
    }
    CHECK(domain::max_min_ratio(res.report.bins_after[0]) <= domain::max_min_ratio(res.report.bins_before[0]));

    std::mt19937_64 rng0(9);
    const auto none = self_augment(gan.generator, ds, aspect, 0, 10, rng0, 5, 0.1);
    CHECK(none.report.rows_added == 0);
    CHECK(none.dataset == ds);

    const std::vector<std::size_t> both{0, 1};
    CHECK_THROWS_AS(self_augment(gan.generator, ds, both, 10, 10, rng0, 5, 0.1), ConfigurationError);
}

TEST_CASE("an empty-pool round reproduces the base run") {
    const domain::Dataset ds = domain::generate_dataset(300, 10);
    TrainConfig c = tiny();
    c.n_pool = 0;
    const auto est = train_estimator(ds, c).estimator;
    const auto base = train_rangegan(ds, est, c);
    const auto round = augmentation_round(ds, base.generator, c);
    CHECK(round.augmented.report.rows_added == 0);
    CHECK(round.gan.generator.layers() == base.generator.layers());
    REQUIRE(round.before.rows.size() == round.after.rows.size());
    CHECK(round.before.mean_satisfaction() == round.after.mean_satisfaction());
    CHECK(round.before.tag == "before");
    CHECK(round.after.tag == "after");
    CHECK(round.before.rows.front().labeler == metrics::LabelerKind::Exact);
    const auto table = format_bin_table(round.augmented.report);
    CHECK(table.rfind("label,stage,bin0", 0) == 0);
    CHECK(table.find("aspect_ratio,before") != std::string::npos);
    CHECK(table.find("aspect_ratio,after") != std::string::npos);
}

TEST_CASE("run bundle round trip") {
    const domain::Dataset ds = domain::generate_dataset(300, 11);
    const TrainConfig c = tiny();
    const auto est = train_estimator(ds, c).estimator;
    const auto gan = train_rangegan(ds, est, c);
    TrainedModels m;
    m.manifest.noise_dim = c.noise_dim;
    m.manifest.cond_dim = 2;
    m.manifest.n_labels = 1;
    m.manifest.labels = LabelSet::Aspect;
    m.manifest.normalizer = ds.meta.normalizer;
    m.manifest.seed = c.seed;
    m.manifest.dataset_path = "data.csv";
    m.manifest.config_text = format_config(c);
    m.generator = gan.generator;
    m.discriminator = gan.discriminator;
    m.estimator = est;
    const auto dir = temp_dir("rangegan_run_test");
    save_run(dir, m);
    const auto back = load_run(dir);
    CHECK(back.generator.layers() == m.generator.layers());
    CHECK(back.discriminator.layers() == m.discriminator.layers());
    CHECK(back.estimator.layers() == m.estimator.layers());
    CHECK(back.manifest.normalizer == m.manifest.normalizer);
    CHECK(back.manifest.config_text == m.manifest.config_text);
    CHECK(back.manifest.seed == c.seed);
    CHECK(back.manifest.labels == LabelSet::Aspect);

    std::filesystem::remove(std::filesystem::path(dir) / "estimator.json");
    CHECK_THROWS_AS(load_run(dir), IoError);
    CHECK_THROWS_AS(load_run(temp_dir("rangegan_missing_run")), IoError);

    // a manifest that disagrees with the stored networks
    m.manifest.noise_dim = 7;
    save_run(dir, m);
    CHECK_THROWS_AS(load_run(dir), ConfigurationError);
    std::filesystem::remove_all(dir);
}
