#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "smuq/error.hpp"
#include "smuq/experiments.hpp"
#include "smuq/seed.hpp"
#include "smuq/text.hpp"

namespace smuq {
namespace {

using RegimeField = double RegimeConfig::*;

const std::map<std::string, RegimeField, std::less<>>& regime_fields() {
    static const std::map<std::string, RegimeField, std::less<>> fields = {
        {"a", &RegimeConfig::infiltration},
        {"b", &RegimeConfig::loss_rate},
        {"wet_prob", &RegimeConfig::wet_prob},
        {"wet_depth", &RegimeConfig::wet_depth},
        {"evap_mean", &RegimeConfig::evap_mean},
        {"evap_amp", &RegimeConfig::evap_amplitude},
        {"evap_noise", &RegimeConfig::evap_noise},
        {"sigma0", &RegimeConfig::noise_base},
        {"sigma1", &RegimeConfig::noise_slope},
        {"jitter", &RegimeConfig::jitter},
        {"missing", &RegimeConfig::missing_rate},
        {"s0", &RegimeConfig::initial_moisture},
    };
    return fields;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        return parse_double(v, key);
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        return parse_int(v, key);
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorKind::config, key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (auto f : split_fields(v, ',')) out.push_back(to_double(key, std::string(trim(f))));
    return out;
}

StepRange to_range(const std::string& key, const std::string& v) {
    const auto parts = split_fields(v, ':');
    if (parts.size() != 2) throw Error(ErrorKind::config, key + ": expected 'begin:end', got '" + v + "'");
    return {to_int(key, std::string(parts[0])), to_int(key, std::string(parts[1]))};
}

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t k = 0; k < values.size(); ++k) out += (k ? "," : "") + format_double(values[k]);
    return out;
}

std::string range_text(StepRange r) { return std::to_string(r.begin) + ":" + std::to_string(r.end); }

}  // namespace

ExperimentConfig resolve_config(const KeyValueConfig& kv) {
    ExperimentConfig c;
    std::set<std::string> used;
    auto get = [&](const std::string& key) -> const std::string* {
        const auto* v = kv.find(key);
        if (v) used.insert(key);
        return v;
    };

    if (auto v = get("seed")) c.seed = static_cast<std::uint64_t>(to_int("seed", *v));
    if (auto v = get("threads")) {
        const auto n = to_int("threads", *v);
        if (n < 1) throw Error(ErrorKind::config, "threads must be at least 1");
        c.threads = static_cast<std::size_t>(n);
    }
    if (auto v = get("out")) c.out = *v;
    if (auto v = get("data.csv")) c.data_csv = *v;

    if (auto v = get("synth.steps")) c.synth.n_steps = to_int("synth.steps", *v);
    if (auto v = get("synth.season")) c.synth.season_length = to_double("synth.season", *v);
    // Regime count: explicit key, else the highest regime.<i> index present, else the defaults.
    std::size_t n_regimes = c.synth.regimes.size();
    int max_index = -1;
    for (const auto& [key, value] : kv.entries())
        if (key.starts_with("regime.")) {
            const auto dot = key.find('.', 7);
            if (dot == std::string::npos) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
            max_index = std::max<int>(max_index, static_cast<int>(to_int(key, key.substr(7, dot - 7))));
        }
    if (max_index >= 0) n_regimes = static_cast<std::size_t>(max_index + 1);
    if (auto v = get("synth.regimes")) {
        const auto n = to_int("synth.regimes", *v);
        if (n < 1) throw Error(ErrorKind::config, "synth.regimes must be at least 1, got " + *v);
        if (max_index >= n)
            throw Error(ErrorKind::config, "regime." + std::to_string(max_index) + " exceeds synth.regimes = " + *v);
        n_regimes = static_cast<std::size_t>(n);
    }
    const auto defaults = default_synth_config().regimes;
    c.synth.regimes.resize(n_regimes);
    for (std::size_t i = 0; i < n_regimes; ++i) {
        c.synth.regimes[i] = i < defaults.size() ? defaults[i] : RegimeConfig{};
        const std::string prefix = "regime." + std::to_string(i) + ".";
        if (auto v = get(prefix + "cells")) {
            const auto n = to_int(prefix + "cells", *v);
            if (n < 1) throw Error(ErrorKind::config, prefix + "cells must be positive");
            c.synth.regimes[i].cells = static_cast<std::size_t>(n);
        }
        for (const auto& [name, field] : regime_fields())
            if (auto v = get(prefix + name)) c.synth.regimes[i].*field = to_double(prefix + name, *v);
    }

    const auto* tr = get("split.train");
    const auto* tu = get("split.tune");
    const auto* te = get("split.test");
    if (tr || tu || te) {
        if (!(tr && tu && te)) throw Error(ErrorKind::config, "split.train, split.tune and split.test must be given together");
        c.split = SplitSpec{to_range("split.train", *tr), to_range("split.tune", *tu), to_range("split.test", *te)};
    }

    if (auto v = get("model.hidden")) c.train.hidden = to_int("model.hidden", *v);
    if (auto v = get("train.window")) c.train.window = to_int("train.window", *v);
    if (auto v = get("train.batch")) c.train.batch_size = to_int("train.batch", *v);
    if (auto v = get("train.epochs")) c.train.epochs = to_int("train.epochs", *v);
    if (auto v = get("train.batches_per_epoch")) c.train.batches_per_epoch = to_int("train.batches_per_epoch", *v);
    if (auto v = get("train.lr")) c.train.adam.learning_rate = to_double("train.lr", *v);
    if (auto v = get("train.beta1")) c.train.adam.beta1 = to_double("train.beta1", *v);
    if (auto v = get("train.beta2")) c.train.adam.beta2 = to_double("train.beta2", *v);
    if (auto v = get("train.eps")) c.train.adam.epsilon = to_double("train.eps", *v);
    if (auto v = get("train.clip")) c.train.clip_norm = to_double("train.clip", *v);
    if (auto v = get("train.dropout")) c.train.dropout = to_double("train.dropout", *v);

    if (auto v = get("uq.members")) c.members = to_int("uq.members", *v);
    if (auto v = get("tune.grid")) c.grid = to_doubles("tune.grid", *v);
    if (auto v = get("tune.objective")) c.objective = parse_tune_objective(*v);
    if (auto v = get("tune.retrain")) c.retrain = to_bool("tune.retrain", *v);
    if (auto v = get("eval.grid")) c.calibration_grid = to_doubles("eval.grid", *v);
    if (auto v = get("eval.per_cell")) c.per_cell_calibration = to_bool("eval.per_cell", *v);
    if (auto v = get("plot.svg")) c.svg = to_bool("plot.svg", *v);
    if (auto v = get("region.dropout")) c.region_dropout = to_double("region.dropout", *v);
    if (auto v = get("region.train")) {
        c.region_train.clear();
        if (*v != "all")
            for (auto f : split_fields(*v, ',')) c.region_train.push_back(static_cast<int>(to_int("region.train", std::string(trim(f)))));
    }

    for (const auto& [key, value] : kv.entries())
        if (!used.count(key)) throw Error(ErrorKind::config, "unknown config key '" + key + "'");

    c.synth.validate();
    c.train.validate();
    if (c.members < 2) throw Error(ErrorKind::config, "uq.members must be at least 2");
    if (c.grid.empty()) throw Error(ErrorKind::config, "tune.grid must not be empty");
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
        if (!(c.grid[k] >= 0.0 && c.grid[k] < 1.0)) throw Error(ErrorKind::config, "tune.grid rates must lie in [0, 1)");
        if (k && !(c.grid[k] > c.grid[k - 1])) throw Error(ErrorKind::config, "tune.grid must be strictly increasing");
    }
    if (c.calibration_grid.empty()) throw Error(ErrorKind::config, "eval.grid must not be empty");
    for (std::size_t k = 0; k < c.calibration_grid.size(); ++k) {
        if (!(c.calibration_grid[k] > 0.0 && c.calibration_grid[k] < 1.0))
            throw Error(ErrorKind::config, "eval.grid values must lie in (0, 1)");
        if (k && !(c.calibration_grid[k] > c.calibration_grid[k - 1]))
            throw Error(ErrorKind::config, "eval.grid must be strictly increasing");
    }
    if (!(c.region_dropout >= 0.0 && c.region_dropout < 1.0))
        throw Error(ErrorKind::config, "region.dropout must lie in [0, 1)");
    return c;
}

KeyValueConfig to_key_values(const ExperimentConfig& c) {
    KeyValueConfig kv;
    kv.set("seed", std::to_string(c.seed));
    if (!c.data_csv.empty()) kv.set("data.csv", c.data_csv);
    kv.set("synth.steps", std::to_string(c.synth.n_steps));
    kv.set("synth.season", format_double(c.synth.season_length));
    kv.set("synth.regimes", std::to_string(c.synth.regimes.size()));
    for (std::size_t i = 0; i < c.synth.regimes.size(); ++i) {
        const std::string prefix = "regime." + std::to_string(i) + ".";
        kv.set(prefix + "cells", std::to_string(c.synth.regimes[i].cells));
        for (const auto& [name, field] : regime_fields()) kv.set(prefix + name, format_double(c.synth.regimes[i].*field));
    }
    if (c.split) {
        kv.set("split.train", range_text(c.split->train));
        kv.set("split.tune", range_text(c.split->tune));
        kv.set("split.test", range_text(c.split->test));
    }
    kv.set("model.hidden", std::to_string(c.train.hidden));
    kv.set("train.window", std::to_string(c.train.window));
    kv.set("train.batch", std::to_string(c.train.batch_size));
    kv.set("train.epochs", std::to_string(c.train.epochs));
    kv.set("train.batches_per_epoch", std::to_string(c.train.batches_per_epoch));
    kv.set("train.lr", format_double(c.train.adam.learning_rate));
    kv.set("train.beta1", format_double(c.train.adam.beta1));
    kv.set("train.beta2", format_double(c.train.adam.beta2));
    kv.set("train.eps", format_double(c.train.adam.epsilon));
    kv.set("train.clip", format_double(c.train.clip_norm));
    kv.set("train.dropout", format_double(c.train.dropout));
    kv.set("uq.members", std::to_string(c.members));
    kv.set("tune.grid", join(c.grid));
    kv.set("tune.objective", std::string(to_string(c.objective)));
    kv.set("tune.retrain", c.retrain ? "true" : "false");
    kv.set("eval.grid", join(c.calibration_grid));
    kv.set("eval.per_cell", c.per_cell_calibration ? "true" : "false");
    kv.set("plot.svg", c.svg ? "true" : "false");
    kv.set("region.dropout", format_double(c.region_dropout));
    std::string regions;
    for (std::size_t k = 0; k < c.region_train.size(); ++k) regions += (k ? "," : "") + std::to_string(c.region_train[k]);
    kv.set("region.train", regions.empty() ? "all" : regions);
    return kv;
}

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a(to_key_values(config).to_text()); }

std::uint64_t data_hash(const ExperimentConfig& config) {
    std::string text;
    const auto kv = to_key_values(config);
    for (const auto& [k, v] : kv.entries())
        if (k == "seed" || k.starts_with("data.") || k.starts_with("synth.") || k.starts_with("regime.") ||
            k.starts_with("split."))
            text += k + "=" + v + "\n";
    return fnv1a(text);
}

StageSeeds stage_seeds(std::uint64_t root) {
    return {derive_seed(root, "data"), derive_seed(root, "tune"), derive_seed(root, "predict"), root};
}
std::uint64_t StageSeeds::train(std::size_t rate_index) const { return derive_seed(root, "train", rate_index); }
std::uint64_t StageSeeds::region_train(int regime) const {
    return derive_seed(root, "region-train", static_cast<std::uint64_t>(regime));
}
std::uint64_t StageSeeds::region_predict(int regime) const {
    return derive_seed(root, "region-predict", static_cast<std::uint64_t>(regime));
}

}  // namespace smuq
