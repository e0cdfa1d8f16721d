#include <gtest/gtest.h>

#include <filesystem>

#include "smuq/checkpoint.hpp"
#include "smuq/experiments.hpp"
#include "smuq/seed.hpp"

using namespace smuq;
namespace fs = std::filesystem;

namespace {

KeyValueConfig kv(std::string_view text) { return KeyValueConfig::parse(text); }

void expect_config_error(std::string_view text, const std::string& key) {
    try {
        resolve_config(kv(text));
        FAIL() << "expected a config error naming " << key;
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
}

}  // namespace

TEST(KeyValue, ParseCommentsAndRepeats) {
    const auto c = kv("# comment\n\n a = 1 \nb=two words\na = 3\n");
    EXPECT_EQ(*c.find("a"), "3");
    EXPECT_EQ(*c.find("b"), "two words");
    EXPECT_EQ(c.find("c"), nullptr);
    EXPECT_EQ(c.to_text(), "a = 3\nb = two words\n");
    EXPECT_THROW(kv("just words\n"), Error);
}

TEST(KeyValue, AssignmentAndMerge) {
    KeyValueConfig c = kv("a = 1\n");
    c.set_assignment("b=2");
    c.merge(kv("a = 5\n"));
    EXPECT_EQ(c.to_text(), "a = 5\nb = 2\n");
    EXPECT_THROW(c.set_assignment("novalue"), Error);
}

TEST(Resolve, DefaultsMatchTheDeskScale) {
    const auto c = resolve_config({});
    EXPECT_EQ(c.synth.regimes.size(), 4u);
    EXPECT_EQ(c.synth.regimes[0].cells, 50u);
    EXPECT_EQ(c.synth.n_steps, 1095);
    EXPECT_EQ(c.train.hidden, 32);
    EXPECT_EQ(c.members, 50);
    EXPECT_EQ(c.grid, default_grid());
}

TEST(Resolve, UnknownKeyIsNamed) { expect_config_error("model.hiden = 4\n", "model.hiden"); }

TEST(Resolve, BadValuesAreNamed) {
    expect_config_error("synth.regimes = 0\n", "synth.regimes");
    expect_config_error("model.hidden = four\n", "model.hidden");
    expect_config_error("train.dropout = 1\n", "train.dropout");
    expect_config_error("regime.0.sigma0 = -1\n", "regime.0.sigma0");
    expect_config_error("synth.regimes = 2\nregime.3.a = 0.1\n", "regime.3");
    expect_config_error("split.train = 0:10\n", "split");
    expect_config_error("tune.objective = vibes\n", "tune.objective");
    expect_config_error("uq.members = 1\n", "uq.members");
}

TEST(Resolve, RegimeOverridesAndExtraRegimes) {
    const auto c = resolve_config(kv("synth.regimes = 5\nregime.4.cells = 7\nregime.1.b = 0.3\n"));
    ASSERT_EQ(c.synth.regimes.size(), 5u);
    EXPECT_EQ(c.synth.regimes[4].cells, 7u);
    EXPECT_DOUBLE_EQ(c.synth.regimes[1].loss_rate, 0.3);
    EXPECT_DOUBLE_EQ(c.synth.regimes[0].loss_rate, default_synth_config().regimes[0].loss_rate);
}

TEST(Resolve, SplitAndLists) {
    const auto c = resolve_config(
        kv("split.train = 0:100\nsplit.tune = 100:150\nsplit.test = 150:200\ntune.grid = 0.2, 0.4\nregion.train = 0,2\n"));
    ASSERT_TRUE(c.split.has_value());
    EXPECT_EQ(c.split->tune, (StepRange{100, 150}));
    EXPECT_EQ(c.grid, (std::vector<double>{0.2, 0.4}));
    EXPECT_EQ(c.region_train, (std::vector<int>{0, 2}));
}

TEST(Resolve, EchoRoundTrips) {
    const auto c = resolve_config(kv("seed = 9\ntrain.epochs = 3\nsynth.regimes = 2\nregime.1.sigma1 = 0.125\n"));
    const auto again = resolve_config(to_key_values(c));
    EXPECT_EQ(to_key_values(again).to_text(), to_key_values(c).to_text());
    EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(Hashes, ExecutionSettingsDoNotCount) {
    const auto a = resolve_config(kv("threads = 1\nout = x\n"));
    const auto b = resolve_config(kv("threads = 4\nout = y\n"));
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_FALSE(to_key_values(a).has("threads"));
    EXPECT_FALSE(to_key_values(a).has("out"));
}

TEST(Hashes, DataHashTracksOnlyDataSettings) {
    const auto base = resolve_config({});
    EXPECT_EQ(data_hash(resolve_config(kv("train.epochs = 2\nuq.members = 5\n"))), data_hash(base));
    EXPECT_NE(data_hash(resolve_config(kv("seed = 43\n"))), data_hash(base));
    EXPECT_NE(data_hash(resolve_config(kv("regime.2.cells = 3\n"))), data_hash(base));
    EXPECT_NE(config_hash(resolve_config(kv("train.epochs = 2\n"))), config_hash(base));
}

TEST(Seeds, StagesAreDistinctAndDerived) {
    const auto s = stage_seeds(42);
    EXPECT_EQ(s.root, 42u);
    EXPECT_NE(s.data, s.tune);
    EXPECT_NE(s.train(0), s.train(1));
    EXPECT_NE(s.region_train(0), s.region_predict(0));
    EXPECT_EQ(stage_seeds(42).train(3), s.train(3));
}

TEST(SeedMixing, KnownValues) {
    // FNV-1a offset basis and the published vector for "a".
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_NE(derive_seed(1, "x"), derive_seed(1, "y"));
    EXPECT_NE(derive_seed(1, "x", 0), derive_seed(1, "x", 1));
}

TEST(Checkpoint, RoundTripsExactly) {
    Checkpoint c;
    c.params = init_params<double>(3, 4, 8);
    c.params.b_mean = 0.1;
    c.normalizer.forcing_mean = VectorXd{{1.0 / 3.0, 2.0}};
    c.normalizer.forcing_std = VectorXd{{0.5, 1e-6}};
    c.normalizer.static_mean = VectorXd{{-7.25, 1e300}};
    c.normalizer.static_std = VectorXd{{3.0, 4.0}};
    c.normalizer.target_mean = 0.3;
    c.normalizer.target_std = 0.125;
    c.dropout = 0.3;
    c.seed = 0xffffffffffffffffULL;
    c.data_hash = 0x0123456789abcdefULL;
    const auto back = parse_checkpoint(checkpoint_text(c));
    EXPECT_TRUE(back.params == c.params);
    EXPECT_EQ(back.normalizer.static_mean, c.normalizer.static_mean);
    EXPECT_EQ(back.normalizer.target_std, c.normalizer.target_std);
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(back.data_hash, c.data_hash);
    EXPECT_EQ(checkpoint_text(back), checkpoint_text(c));
}

TEST(Checkpoint, MissingAndMalformed) {
    try {
        load_checkpoint(fs::temp_directory_path() / "smuq-no-such-checkpoint.ckpt");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::missing_artifact);
    }
    EXPECT_THROW(parse_checkpoint("not a checkpoint\n"), Error);
    Checkpoint c;
    c.params = init_params<double>(2, 2, 1);
    c.normalizer.forcing_mean = c.normalizer.forcing_std = VectorXd::Ones(1);
    c.normalizer.static_mean = c.normalizer.static_std = VectorXd::Ones(1);
    auto text = checkpoint_text(c);
    text.resize(text.size() / 2);
    EXPECT_THROW(parse_checkpoint(text), Error);
}
