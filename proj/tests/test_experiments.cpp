#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "smuq/experiments.hpp"
#include "support/checks.hpp"

using namespace smuq;
namespace fs = std::filesystem;

namespace {

// Small enough to run in about a second; the shape of every stage is preserved.
ExperimentConfig small_config(std::size_t threads = 1) {
    auto c = resolve_config(KeyValueConfig::parse(
        "synth.steps = 150\nsynth.regimes = 3\nregime.0.cells = 4\nregime.1.cells = 4\nregime.2.cells = 4\n"
        "model.hidden = 6\ntrain.epochs = 3\ntrain.batches_per_epoch = 4\nuq.members = 6\ntune.grid = 0.1, 0.4\n"));
    c.threads = threads;
    return c;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("smuq-test-" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Temporal, SmallStudyIsConsistent) {
    const auto config = small_config();
    const auto data = load_dataset(config);
    const auto r = run_temporal_study(config, data);
    ASSERT_EQ(r.tune.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(r.tune.selected_rate(), r.tune.rows[r.tune.selected].rate);
    EXPECT_EQ(r.test_predictions.rate, r.tune.selected_rate());
    EXPECT_EQ(r.test_predictions.cells.size(), data.n_cells());
    EXPECT_LE(oracle::combination_residual(r.test_predictions), 1e-12);
    EXPECT_EQ(r.evaluation.metrics.size(), data.n_cells());
    EXPECT_TRUE(r.evaluation.correlation.has_value());
    EXPECT_EQ(r.evaluation.calibration.n_points(), 19u);
    EXPECT_EQ(r.evaluation.regions.size(), 3u);
    for (const auto& row : r.evaluation.regions) EXPECT_EQ(row.train_regime, -1);
}

TEST(Temporal, ArtifactsAndThreadIndependence) {
    const auto a_dir = scratch("temporal-a"), b_dir = scratch("temporal-b");
    for (auto [threads, dir] : {std::pair{std::size_t(1), a_dir}, std::pair{std::size_t(3), b_dir}}) {
        const auto config = small_config(threads);
        const auto data = load_dataset(config);
        write_temporal_artifacts(dir, config, data, run_temporal_study(config, data));
    }
    for (const char* f : {"config.txt", "manifest.txt", "tune.csv", "predictions.csv", "metrics.csv", "calibration.csv",
                          "regions.csv", "summary.csv"}) {
        ASSERT_TRUE(fs::exists(a_dir / f)) << f;
        EXPECT_EQ(slurp(a_dir / f), slurp(b_dir / f)) << f;
    }
    fs::remove_all(a_dir);
    fs::remove_all(b_dir);
}

TEST(Temporal, SharedModelWhenRetrainIsOff) {
    auto config = small_config();
    config.retrain = false;
    const auto data = load_dataset(config);
    const auto views = split(data, resolved_split(config, data.n_steps()));
    const auto models = train_grid(views.train, fit_normalizer(views.train), config);
    ASSERT_EQ(models.size(), 2u);
    EXPECT_TRUE(models[0] == models[1]);
}

TEST(Regions, RowsSortedByDistanceFromTheTrainingRegime) {
    auto config = small_config();
    config.region_train = {0, 2};
    const auto data = load_dataset(config);
    const auto results = run_region_study(config, data);
    ASSERT_EQ(results.size(), 2u);
    const MatrixXd d = regime_distances(data);
    for (const auto& r : results) {
        ASSERT_EQ(r.rows.size(), 3u);
        EXPECT_EQ(r.rows.front().eval_regime, r.train_regime);
        EXPECT_EQ(r.rows.front().distance, 0.0);
        for (std::size_t j = 0; j < r.rows.size(); ++j) {
            EXPECT_EQ(r.rows[j].train_regime, r.train_regime);
            EXPECT_EQ(r.rows[j].distance, d(r.train_regime, r.rows[j].eval_regime));
            EXPECT_EQ(r.rows[j].n_cells, 4u);
            if (j) EXPECT_LE(r.rows[j - 1].distance, r.rows[j].distance);
        }
        bool ordered = true;
        for (std::size_t j = 1; j < r.rows.size(); ++j) ordered = ordered && r.rows[j - 1].mean_sigma_mc < r.rows[j].mean_sigma_mc;
        EXPECT_EQ(r.full_order, ordered);
        EXPECT_EQ(r.in_below_far, r.rows.front().mean_sigma_mc < r.rows.back().mean_sigma_mc);
    }
}

TEST(Regions, IdenticalRegimesGiveSimilarSpread) {
    // Control: two regimes drawn from the same parameters must not be told apart by the
    // epistemic term; the gap between their means stays within the per-cell spread.
    auto config = small_config();
    config.synth.regimes = {config.synth.regimes[1], config.synth.regimes[1]};
    config.synth.regimes[0].cells = config.synth.regimes[1].cells = 16;
    config.synth.n_steps = 300;
    config.train.epochs = 10;
    config.region_train = {0};
    const auto data = load_dataset(config);
    const auto r = run_region_study(config, data).at(0);
    ASSERT_EQ(r.rows.size(), 2u);

    // Same model and predictions as the study, kept per cell.
    const auto seeds = stage_seeds(config.seed);
    const auto views = split(data, resolved_split(config, data.n_steps()));
    const auto train = views.train.regime(0);
    const auto normalizer = fit_normalizer(train);
    const auto model = fit(train, normalizer, train_config_for(config, config.region_dropout, seeds.region_train(0))).params;
    const auto metrics = cell_metrics(
        predict_dataset(model, normalizer, views.test, config.region_dropout, config.members, seeds.region_predict(0)), views.test);
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        if (views.test.cell(i).regime_id != 0) continue;
        sum += metrics[i].mean_sigma_mc;
        sq += metrics[i].mean_sigma_mc * metrics[i].mean_sigma_mc;
        n += 1.0;
    }
    const double mean = sum / n, spread = std::sqrt((sq - n * mean * mean) / (n - 1.0));
    EXPECT_NEAR(r.rows[0].mean_sigma_mc, mean, 1e-12);
    EXPECT_LT(std::abs(r.rows[0].mean_sigma_mc - r.rows[1].mean_sigma_mc), spread);
}

TEST(Regions, ThreadIndependent) {
    auto one = small_config(1), three = small_config(3);
    one.region_train = three.region_train = {1};
    const auto data = load_dataset(one);
    EXPECT_EQ(regions_csv(run_region_study(one, data)[0].rows), regions_csv(run_region_study(three, data)[0].rows));
}

TEST(Regions, Errors) {
    auto config = small_config();
    config.synth.regimes.resize(1);
    EXPECT_THROW(run_region_study(config, load_dataset(config)), Error);
    config = small_config();
    config.region_train = {5};
    try {
        run_region_study(config, load_dataset(config));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

TEST(Manifest, ListsHashesAndSeeds) {
    const auto config = small_config();
    const auto m = KeyValueConfig::parse(manifest_text(config, "x"));
    EXPECT_TRUE(m.has("config_hash"));
    EXPECT_TRUE(m.has("data_hash"));
    EXPECT_EQ(*m.find("seed.root"), "42");
    EXPECT_EQ(*m.find("seed.train.1"), std::to_string(stage_seeds(42).train(1)));
    EXPECT_TRUE(m.has("seed.region_predict.2"));
}
