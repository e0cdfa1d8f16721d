#include <gtest/gtest.h>

#include <cmath>

#include "smuq/seed.hpp"
#include "smuq/synthetic.hpp"
#include "smuq/uq.hpp"
#include "support/checks.hpp"

using namespace smuq;

namespace {

SynthConfig fixture_config() {
    SynthConfig c;
    c.n_steps = 90;
    for (int i = 0; i < 2; ++i) {
        RegimeConfig r;
        r.cells = 3;
        r.wet_prob = 0.2 + 0.2 * i;
        c.regimes.push_back(r);
    }
    return c;
}

// Views point into `data`, so the fixture is built in place and never copied.
struct Fixture {
    Dataset data = generate_synthetic(fixture_config(), 13);
    SplitViews views = split(data, SplitSpec::thirds(90));
    Normalizer normalizer = fit_normalizer(views.train);
    LstmParams<double> params = init_params<double>(6, data.n_inputs(), 5);

    Fixture() { params.b_logvar = -1.0; }
    Fixture(const Fixture&) = delete;
};

}  // namespace

TEST(Combine, Examples) {
    EXPECT_EQ(combine_uncertainty(3.0, 4.0), 5.0);
    EXPECT_EQ(combine_uncertainty(0.0, 0.7), 0.7);
    EXPECT_NEAR(combine_uncertainty(0.1, 0.2), std::sqrt(0.05), 1e-16);
    EXPECT_THROW(combine_uncertainty(-1e-9, 1.0), Error);
    EXPECT_THROW(combine_uncertainty(1.0, -1.0), Error);
}

TEST(Summary, HandSampleStd) {
    const MatrixXd mu{{1.0, 2.0, 3.0}};
    const MatrixXd s = MatrixXd::Constant(1, 3, std::log(4.0));
    const auto z = summarize_ensemble(mu, s);
    EXPECT_DOUBLE_EQ(z.mu(0), 2.0);
    EXPECT_DOUBLE_EQ(z.sigma_mc(0), 1.0);
    EXPECT_DOUBLE_EQ(z.sigma_x(0), 2.0);
    EXPECT_DOUBLE_EQ(z.sigma_comb(0), std::sqrt(5.0));
}

TEST(Summary, AleatoricTermAveragesVariances) {
    // Members with variances 1 and 9 average to 5, not to the squared mean std (4).
    const MatrixXd mu = MatrixXd::Zero(1, 2);
    const MatrixXd s{{0.0, std::log(9.0)}};
    EXPECT_NEAR(summarize_ensemble(mu, s).sigma_x(0), std::sqrt(5.0), 1e-15);
}

TEST(Summary, FewerThanTwoMembersIsAnError) {
    EXPECT_THROW(summarize_ensemble(MatrixXd::Zero(3, 1), MatrixXd::Zero(3, 1)), Error);
}

TEST(Denormalize, ShiftsMeanAndScalesSigmas) {
    Normalizer n;
    n.target_mean = 0.3;
    n.target_std = 0.1;
    PredictiveSeries z{VectorXd{{1.0}}, VectorXd{{3.0}}, VectorXd{{4.0}}, VectorXd{{5.0}}};
    const auto out = denormalize(z, n);
    EXPECT_NEAR(out.mu(0), 0.4, 1e-15);
    EXPECT_NEAR(out.sigma_mc(0), 0.3, 1e-15);
    EXPECT_NEAR(out.sigma_x(0), 0.4, 1e-15);
    EXPECT_NEAR(out.sigma_comb(0), 0.5, 1e-15);
}

TEST(McPredict, ZeroRateCollapsesTheEnsemble) {
    const Fixture f;
    const MatrixXd x = f.normalizer.model_input(f.data.cell(0).forcings, f.data.cell(0).static_attrs);
    const auto s = mc_predict(f.params, f.normalizer, x, 0.0, 8, 3);
    EXPECT_TRUE((s.sigma_mc.array() == 0.0).all());
    EXPECT_EQ(s.sigma_comb, s.sigma_x);
}

TEST(McPredict, MatchesIndependentMemberLoop) {
    const Fixture f;
    const MatrixXd x = f.normalizer.model_input(f.data.cell(1).forcings, f.data.cell(1).static_attrs);
    const double p = 0.4;
    const Index K = 6;
    const std::uint64_t seed = 99;
    const auto s = mc_predict(f.params, f.normalizer, x, p, K, seed);

    const Index T = x.rows();
    MatrixXd mu(T, K), var(T, K);
    for (Index k = 0; k < K; ++k) {
        const auto m = sample_masks<double>(p, x.cols(), f.params.hidden, derive_seed(seed, "member", std::uint64_t(k)));
        const auto out = forward(f.params, m, x).outputs;
        for (Index t = 0; t < T; ++t) {
            mu(t, k) = out[std::size_t(t)].mu;
            var(t, k) = std::exp(out[std::size_t(t)].log_var);
        }
    }
    const double sd = f.normalizer.target_std;
    for (Index t = 0; t < T; t += 7) {
        const double mean = mu.row(t).mean();
        const double sample_var = (mu.row(t).array() - mean).square().sum() / double(K - 1);
        EXPECT_NEAR(s.mu(t), f.normalizer.denormalize_target(mean), 1e-12);
        EXPECT_NEAR(s.sigma_mc(t), std::sqrt(sample_var) * sd, 1e-12);
        EXPECT_NEAR(s.sigma_x(t), std::sqrt(var.row(t).mean()) * sd, 1e-12);
    }
}

TEST(McPredict, PreconditionErrors) {
    const Fixture f;
    const MatrixXd x = MatrixXd::Zero(4, f.data.n_inputs());
    EXPECT_THROW(mc_predict(f.params, f.normalizer, x, 0.3, 1, 1), Error);
    EXPECT_THROW(mc_predict(f.params, f.normalizer, x, 1.0, 4, 1), Error);
}

TEST(PredictDataset, CombinationIdentityAndNonNegativity) {
    const Fixture f;
    for (double p : {0.0, 0.2, 0.6}) {
        const auto pred = predict_dataset(f.params, f.normalizer, f.views.test, p, 10, 4);
        EXPECT_LE(oracle::combination_residual(pred), 1e-12) << "p = " << p;
        if (p == 0.0)
            for (const auto& c : pred.cells) EXPECT_TRUE((c.sigma_mc.array() == 0.0).all());
    }
}

TEST(PredictDataset, KeyedByCellIdNotPosition) {
    const Fixture f;
    const auto all = predict_dataset(f.params, f.normalizer, f.views.test, 0.3, 5, 8);
    const std::size_t order[] = {4, 1};
    const auto some = predict_dataset(f.params, f.normalizer, f.views.test.subset(order), 0.3, 5, 8);
    EXPECT_EQ(some.cell_ids[0], all.cell_ids[4]);
    EXPECT_EQ(some.cells[0].mu, all.cells[4].mu);
    EXPECT_EQ(some.cells[1].sigma_mc, all.cells[1].sigma_mc);
}

TEST(PredictDataset, IndependentOfThreadCount) {
    const Fixture f;
    const auto a = predict_dataset(f.params, f.normalizer, f.views.tune, 0.3, 5, 8, 1);
    const auto b = predict_dataset(f.params, f.normalizer, f.views.tune, 0.3, 5, 8, 3);
    EXPECT_EQ(predictions_csv(a, f.views.tune), predictions_csv(b, f.views.tune));
}

TEST(PredictDataset, WarmStateFromTheStartOfTheRecord) {
    // The tune-period output must equal the matching slice of a full-record prediction.
    const Fixture f;
    const auto pred = predict_dataset(f.params, f.normalizer, f.views.tune, 0.3, 4, 2);
    const auto& cell = f.data.cell(2);
    const MatrixXd x = f.normalizer.model_input(cell.forcings, cell.static_attrs);
    const auto full = mc_predict(f.params, f.normalizer, x, 0.3, 4, derive_seed(2, "cell:" + cell.cell_id));
    const auto r = f.views.tune.range();
    EXPECT_EQ(pred.cells[2].mu, full.mu.segment(r.begin, r.size()));
}

TEST(PredictDataset, EpistemicSpreadStableUnderMoreMembers) {
    const Fixture f;
    auto mean_mc = [&](Index K) {
        const auto pred = predict_dataset(f.params, f.normalizer, f.views.test, 0.3, K, 6);
        double s = 0.0, n = 0.0;
        for (const auto& c : pred.cells) {
            s += c.sigma_mc.sum();
            n += double(c.size());
        }
        return s / n;
    };
    const double a = mean_mc(50), b = mean_mc(100);
    EXPECT_GT(a, 0.0);
    EXPECT_LT(std::abs(a - b) / b, 0.1);
}

TEST(PredictionsCsv, RoundTripsExactly) {
    const Fixture f;
    const auto pred = predict_dataset(f.params, f.normalizer, f.views.test, 0.3, 4, 1);
    const auto text = predictions_csv(pred, f.views.test);
    const auto back = parse_predictions_csv(text, f.views.test);
    EXPECT_EQ(predictions_csv(back, f.views.test), text);
    EXPECT_LE(oracle::combination_residual(back), 1e-12);
    EXPECT_THROW(parse_predictions_csv("a,b\n", f.views.test), Error);
    EXPECT_THROW(parse_predictions_csv(text, f.views.tune), Error);
}
