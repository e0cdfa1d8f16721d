#include <gtest/gtest.h>

#include <cmath>

#include "smuq/seed.hpp"
#include "smuq/synthetic.hpp"
#include "smuq/tuning.hpp"
#include "support/checks.hpp"

using namespace smuq;

namespace {

SynthConfig tiny_config() {
    SynthConfig c;
    c.n_steps = 60;
    RegimeConfig r;
    r.cells = 4;
    c.regimes = {r};
    return c;
}

struct Fixture {
    Dataset data = generate_synthetic(tiny_config(), 2);
    SplitViews views = split(data, SplitSpec::thirds(60));
    Normalizer normalizer = fit_normalizer(views.train);
    LstmParams<double> params = init_params<double>(4, data.n_inputs(), 1);

    Fixture(const Fixture&) = delete;
    Fixture() = default;
};

}  // namespace

TEST(Grid, DefaultContents) {
    const auto g = default_grid();
    ASSERT_EQ(g.size(), 7u);
    EXPECT_NE(std::find(g.begin(), g.end(), 0.6), g.end());
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_GE(g[k], 0.0);
        EXPECT_LT(g[k], 1.0);
        if (k) EXPECT_GT(g[k], g[k - 1]);
    }
    EXPECT_DOUBLE_EQ(g.front(), 0.1);
    EXPECT_DOUBLE_EQ(g.back(), 0.7);
}

TEST(Select, Argmin) {
    const auto r = select_rate({{0.2, 0, 0, 0.02}, {0.4, 0, 0, 0.01}});
    EXPECT_EQ(r.selected, 1u);
    EXPECT_DOUBLE_EQ(r.selected_rate(), 0.4);
}

TEST(Select, TiesGoToTheSmallerRate) {
    EXPECT_DOUBLE_EQ(select_rate({{0.5, 0, 0, 0.01}, {0.3, 0, 0, 0.01}}).selected_rate(), 0.3);
    EXPECT_DOUBLE_EQ(select_rate({{0.3, 0, 0, 0.01}, {0.5, 0, 0, 0.01}}).selected_rate(), 0.3);
}

TEST(Tune, DegenerateGridSelectsItsOnlyRate) {
    const Fixture f;
    const double grid[] = {0.6};
    const LstmParams<double> models[] = {f.params};
    const auto r = tune_dropout(models, f.views.tune, f.normalizer, 4, 7, grid);
    EXPECT_DOUBLE_EQ(r.selected_rate(), 0.6);
}

TEST(Tune, MismatchIsTheGapBetweenSpatialMeans) {
    const Fixture f;
    const double grid[] = {0.2, 0.5};
    const LstmParams<double> models[] = {f.params, f.params};
    const auto r = tune_dropout(models, f.views.tune, f.normalizer, 6, 11, grid);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto pred = predict_dataset(f.params, f.normalizer, f.views.tune, grid[k], 6, derive_seed(11, "tune-rate", k));
        EXPECT_LE(oracle::combination_residual(pred), 1e-12);
        double sigma = 0.0, err = 0.0;
        for (std::size_t i = 0; i < pred.cells.size(); ++i) {
            sigma += pred.cells[i].sigma_comb.mean();
            err += ubrmse(pred.cells[i].mu, f.views.tune.target(i), f.views.tune.observed(i));
        }
        const double n = double(pred.cells.size());
        EXPECT_NEAR(r.rows[k].mismatch, std::abs(sigma / n - err / n), 1e-12);
    }
    EXPECT_EQ(r.selected, r.rows[0].mismatch <= r.rows[1].mismatch ? 0u : 1u);
}

TEST(Tune, CalibrationObjectiveScoresCurveDeviation) {
    const Fixture f;
    const double grid[] = {0.3};
    const LstmParams<double> models[] = {f.params};
    const auto r = tune_dropout(models, f.views.tune, f.normalizer, 4, 3, grid, TuneObjective::calibration);
    const auto pred = predict_dataset(f.params, f.normalizer, f.views.tune, 0.3, 4, derive_seed(3, "tune-rate", 0));
    EXPECT_DOUBLE_EQ(r.rows[0].mismatch,
                     calibration_curve(pred, f.views.tune, default_calibration_grid()).mean_abs_deviation());
}

TEST(Tune, ReproducibleAndThreadIndependent) {
    const Fixture f;
    const double grid[] = {0.1, 0.4};
    const LstmParams<double> models[] = {f.params, f.params};
    const auto a = tune_dropout(models, f.views.tune, f.normalizer, 5, 1, grid, TuneObjective::magnitude, 1);
    const auto b = tune_dropout(models, f.views.tune, f.normalizer, 5, 1, grid, TuneObjective::magnitude, 2);
    EXPECT_EQ(tune_csv(a), tune_csv(b));
}

TEST(Tune, Errors) {
    const Fixture f;
    const LstmParams<double> models[] = {f.params};
    EXPECT_THROW(tune_dropout({}, f.views.tune, f.normalizer, 4, 1, std::span<const double>{}), Error);
    const double two[] = {0.1, 0.2};
    EXPECT_THROW(tune_dropout(models, f.views.tune, f.normalizer, 4, 1, two), Error);
}

TEST(Objective, ParseAndPrint) {
    EXPECT_EQ(parse_tune_objective("magnitude"), TuneObjective::magnitude);
    EXPECT_EQ(parse_tune_objective("calibration"), TuneObjective::calibration);
    EXPECT_EQ(to_string(TuneObjective::calibration), "calibration");
    EXPECT_THROW(parse_tune_objective("loss"), Error);
}
