// Command-line front end: synth, train, tune, predict, evaluate, experiment temporal|regions.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smuq/checkpoint.hpp"
#include "smuq/error.hpp"
#include "smuq/experiments.hpp"
#include "smuq/text.hpp"

namespace fs = std::filesystem;
using namespace smuq;

namespace {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_input = 3,  // parse or schema error
    exit_io = 4,
    exit_missing_artifact = 5,
    exit_stale_config = 6,
    exit_precondition = 7,
};

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return exit_config;
        case ErrorKind::parse:
        case ErrorKind::schema: return exit_input;
        case ErrorKind::io: return exit_io;
        case ErrorKind::missing_artifact: return exit_missing_artifact;
        case ErrorKind::stale_config: return exit_stale_config;
        case ErrorKind::spec:
        case ErrorKind::precondition: return exit_precondition;
    }
    return exit_usage;
}

struct SharedFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
    cmd->add_option("--config", f.config_path, "flat key = value config file");
    cmd->add_option("--set", f.overrides, "config override key=value (repeatable)");
    cmd->add_option("--seed", f.seed, "root seed");
    cmd->add_option("--out", f.out, "output path");
    cmd->add_option("--threads", f.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
}

// File values, then --set overrides, then the dedicated flags.
ExperimentConfig resolve(const SharedFlags& f) {
    KeyValueConfig kv;
    if (!f.config_path.empty()) kv = KeyValueConfig::load(f.config_path);
    for (const auto& o : f.overrides) kv.set_assignment(o);
    if (f.seed) kv.set("seed", std::to_string(*f.seed));
    if (f.out) kv.set("out", *f.out);
    if (f.threads) kv.set("threads", std::to_string(*f.threads));
    return resolve_config(kv);
}

template <class Period>
PeriodView<Period> pick(const SplitViews& v);
template <> TuneView pick<TunePeriod>(const SplitViews& v) { return v.tune; }
template <> TestView pick<TestPeriod>(const SplitViews& v) { return v.test; }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// data_hash recorded in a run directory's manifest, if present.
std::optional<std::uint64_t> manifest_data_hash(const fs::path& dir) {
    std::ifstream in(dir / "manifest.txt");
    if (!in) return std::nullopt;
    std::stringstream buf;
    buf << in.rdbuf();
    const auto kv = KeyValueConfig::parse(buf.str());
    if (const auto* v = kv.find("data_hash")) return std::stoull(*v, nullptr, 16);
    return std::nullopt;
}

std::string read_file(const fs::path& path, const char* what) {
    if (!fs::exists(path)) throw Error(ErrorKind::missing_artifact, std::string(what) + " '" + path.string() + "' does not exist");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_synth(const ExperimentConfig& config) {
    const auto data = generate_synthetic(config.synth, stage_seeds(config.seed).data);
    const fs::path out = config.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_csv(data, out);
    std::cout << "wrote " << data.n_cells() << " cells x " << data.n_steps() << " steps to " << out.string() << "\n";
    return exit_ok;
}

int cmd_train(const ExperimentConfig& config) {
    const auto data = load_dataset(config);
    const auto views = split(data, resolved_split(config, data.n_steps()));
    const auto normalizer = fit_normalizer(views.train);
    const auto seed = stage_seeds(config.seed).train(0);
    const auto result = fit(views.train, normalizer, train_config_for(config, config.train.dropout, seed));
    const fs::path dir = config.out;
    write_run_header(dir, config, "train");
    save_checkpoint({result.params, normalizer, config.train.dropout, seed, data_hash(config)}, dir / "model.ckpt");
    std::string log = "epoch,mean_loss,wall_time\n";
    for (const auto& e : result.log)
        log += std::to_string(e.epoch) + ',' + format_double(e.mean_loss) + ',' + format_double(e.wall_time) + '\n';
    write_text(dir / "train_log.csv", log);
    std::cout << "trained " << result.log.size() << " epochs; checkpoint " << (dir / "model.ckpt").string() << "\n";
    return exit_ok;
}

int cmd_tune(const ExperimentConfig& config) {
    const auto data = load_dataset(config);
    const auto views = split(data, resolved_split(config, data.n_steps()));
    const auto normalizer = fit_normalizer(views.train);
    const auto models = train_grid(views.train, normalizer, config);
    const auto seeds = stage_seeds(config.seed);
    const auto result = tune_dropout(models, views.tune, normalizer, config.members, seeds.tune, config.grid,
                                     config.objective, config.threads);
    const fs::path dir = config.out;
    write_run_header(dir, config, "tune");
    write_text(dir / "tune.csv", tune_csv(result));
    const auto train_seed = config.retrain ? seeds.train(result.selected) : seeds.train(0);
    save_checkpoint({models[result.selected], normalizer, result.selected_rate(), train_seed, data_hash(config)},
                    dir / "model.ckpt");
    std::cout << "selected dropout rate " << format_double(result.selected_rate()) << "\n";
    return exit_ok;
}

template <class Period>
int predict_period(const ExperimentConfig& config, const Checkpoint& ckpt, const Dataset& data) {
    const auto views = split(data, resolved_split(config, data.n_steps()));
    const auto view = pick<Period>(views);
    const auto pred = predict_dataset(ckpt.params, ckpt.normalizer, view, ckpt.dropout, config.members,
                                      stage_seeds(config.seed).predict, config.threads);
    const fs::path dir = config.out;
    write_run_header(dir, config, "predict");
    write_text(dir / "predictions.csv", predictions_csv(pred, view));
    std::cout << "wrote " << (dir / "predictions.csv").string() << "\n";
    return exit_ok;
}

int cmd_predict(const ExperimentConfig& config, const std::string& checkpoint, const std::string& period) {
    const auto ckpt = load_checkpoint(checkpoint);
    if (ckpt.data_hash != data_hash(config))
        throw Error(ErrorKind::stale_config, "checkpoint was fitted under data hash " + hex64(ckpt.data_hash) +
                                                 ", current configuration has " + hex64(data_hash(config)));
    const auto data = load_dataset(config);
    if (data.n_inputs() != ckpt.params.input) throw Error(ErrorKind::schema, "dataset width does not match the checkpoint");
    return period == "tune" ? predict_period<TunePeriod>(config, ckpt, data) : predict_period<TestPeriod>(config, ckpt, data);
}

template <class Period>
int evaluate_period(const ExperimentConfig& config, const std::string& text, const Dataset& data) {
    const auto views = split(data, resolved_split(config, data.n_steps()));
    const auto view = pick<Period>(views);
    const auto pred = parse_predictions_csv(text, view);
    const auto ev = evaluate(pred, view, config);
    const fs::path dir = config.out;
    write_run_header(dir, config, "evaluate");
    write_evaluation(dir, config, ev);
    std::cout << "calibration max |empirical - nominal| = " << format_double(ev.calibration.max_abs_deviation()) << "\n";
    return exit_ok;
}

int cmd_evaluate(const ExperimentConfig& config, const std::string& predictions, const std::string& period) {
    const fs::path pred_path = predictions;
    const auto text = read_file(pred_path, "predictions");
    if (auto h = manifest_data_hash(pred_path.parent_path().empty() ? fs::path(".") : pred_path.parent_path());
        h && *h != data_hash(config))
        throw Error(ErrorKind::stale_config, "predictions were produced under data hash " + hex64(*h) +
                                                 ", current configuration has " + hex64(data_hash(config)));
    const auto data = load_dataset(config);
    return period == "tune" ? evaluate_period<TunePeriod>(config, text, data) : evaluate_period<TestPeriod>(config, text, data);
}

int cmd_experiment(const ExperimentConfig& config, const std::string& which) {
    const auto data = load_dataset(config);
    const fs::path dir = config.out;
    if (which == "temporal") {
        const auto result = run_temporal_study(config, data);
        write_temporal_artifacts(dir, config, data, result);
        const auto& ev = result.evaluation;
        std::cout << "selected rate " << format_double(result.tune.selected_rate()) << "; calibration max dev "
                  << format_double(ev.calibration.max_abs_deviation()) << "; error-uncertainty r "
                  << (ev.correlation ? format_double(*ev.correlation) : std::string("undefined")) << "\n";
    } else {
        const auto results = run_region_study(config, data);
        write_region_artifacts(dir, config, results);
        for (const auto& r : results) {
            std::cout << "train regime " << r.train_regime << ":";
            for (const auto& row : r.rows) std::cout << " [" << row.eval_regime << "] " << format_double(row.mean_sigma_mc);
            std::cout << (r.full_order ? "  ordered" : r.in_below_far ? "  in<far" : "  unordered") << "\n";
        }
    }
    std::cout << "artifacts in " << dir.string() << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo dropout uncertainty for recurrent soil-moisture models"};
    app.require_subcommand(1);
    SharedFlags flags;

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset as CSV");
    auto* train = app.add_subcommand("train", "fit one model on the training period");
    auto* tune = app.add_subcommand("tune", "fit one model per dropout rate and select the rate on the tune period");
    auto* predict = app.add_subcommand("predict", "MC dropout predictions from a checkpoint");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics and calibration of a predictions file");
    auto* experiment = app.add_subcommand("experiment", "run a full study");
    for (auto* cmd : {synth, train, tune, predict, evaluate_cmd, experiment}) add_shared(cmd, flags);

    std::string checkpoint, predictions, period = "test", study;
    predict->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    predict->add_option("--period", period, "tune or test")->check(CLI::IsMember({"tune", "test"}));
    evaluate_cmd->add_option("--predictions", predictions, "predictions CSV")->required();
    evaluate_cmd->add_option("--period", period, "tune or test")->check(CLI::IsMember({"tune", "test"}));
    experiment->add_option("study", study, "temporal or regions")->required()->check(CLI::IsMember({"temporal", "regions"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        const auto config = resolve(flags);
        if (*synth) return cmd_synth(config);
        if (*train) return cmd_train(config);
        if (*tune) return cmd_tune(config);
        if (*predict) return cmd_predict(config, checkpoint, period);
        if (*evaluate_cmd) return cmd_evaluate(config, predictions, period);
        if (*experiment) return cmd_experiment(config, study);
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error[io]: " << e.what() << "\n";
        return exit_io;
    }
    return exit_usage;
}
