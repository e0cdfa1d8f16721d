#pragma once
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smuq/data.hpp"
#include "smuq/eval.hpp"
#include "smuq/kvconfig.hpp"
#include "smuq/synthetic.hpp"
#include "smuq/training.hpp"
#include "smuq/tuning.hpp"
#include "smuq/uq.hpp"

namespace smuq {

/// Fully resolved settings of a run. `threads` and `out` only affect execution, never results.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::size_t threads = 1;
    std::string out = "out";

    std::string data_csv;  // empty: generate synthetic data
    SynthConfig synth = default_synth_config();
    std::optional<SplitSpec> split;  // empty: three equal periods

    TrainConfig train;
    Index members = 50;
    std::vector<double> grid = default_grid();
    TuneObjective objective = TuneObjective::magnitude;
    bool retrain = true;  // false: one model at train.dropout, only the inference rate varies

    std::vector<double> calibration_grid = default_calibration_grid();
    bool per_cell_calibration = false;
    bool svg = false;

    double region_dropout = 0.3;
    std::vector<int> region_train;  // regimes to train on; empty: all
};

/// Defaults overridden by the given keys. Unknown keys are a config error naming the key.
ExperimentConfig resolve_config(const KeyValueConfig& kv);
/// Every setting except threads and out, in the same key space resolve_config reads.
KeyValueConfig to_key_values(const ExperimentConfig& config);
/// FNV-1a of to_key_values(config).to_text().
std::uint64_t config_hash(const ExperimentConfig& config);
/// Hash of the settings that determine the data and its split (seed, data.*, synth.*, regime.*, split.*).
std::uint64_t data_hash(const ExperimentConfig& config);

/// Named seeds derived from the root seed; listed in every manifest.
struct StageSeeds {
    std::uint64_t data, tune, predict;
    std::uint64_t train(std::size_t rate_index) const;
    std::uint64_t region_train(int regime) const;
    std::uint64_t region_predict(int regime) const;
    std::uint64_t root;
};
StageSeeds stage_seeds(std::uint64_t root);

Dataset load_dataset(const ExperimentConfig& config);
SplitSpec resolved_split(const ExperimentConfig& config, Index n_steps);

/// TrainConfig with the given dropout rate and seed.
TrainConfig train_config_for(const ExperimentConfig& config, double rate, std::uint64_t seed);

/// One fitted model per grid rate (or a single shared model when retrain is off),
/// trained concurrently up to config.threads.
std::vector<LstmParams<double>> train_grid(const TrainView& train, const Normalizer& normalizer,
                                           const ExperimentConfig& config);

/// Per-regime aggregate of test-period predictions.
struct RegionRow {
    int train_regime = -1;  // -1: model trained on all regimes
    int eval_regime = -1;
    double distance = 0.0;  // regime dissimilarity from the training regime
    std::size_t n_cells = 0;
    double mean_sigma_mc = 0.0;
    double mean_sigma_x = 0.0;
    double mean_sigma_comb = 0.0;
    double mean_ubrmse = 0.0;
};

std::vector<RegionRow> aggregate_by_regime(std::span<const CellMetrics> metrics, const DatasetView& view,
                                           int train_regime, const MatrixXd* distances);

struct Evaluation {
    std::vector<CellMetrics> metrics;
    std::optional<double> correlation;  // per-cell ubRMSE vs mean sigma_comb
    CalibrationCurve calibration;
    std::vector<CalibrationCurve> per_cell;  // filled when per_cell_calibration is set
    std::vector<RegionRow> regions;
};

Evaluation evaluate(const PredictiveDistribution& pred, const DatasetView& view, const ExperimentConfig& config);

struct TemporalStudyResult {
    TuneResult tune;
    LstmParams<double> model;  // the model of the selected rate
    Normalizer normalizer;
    PredictiveDistribution test_predictions;
    Evaluation evaluation;
};

/// Train on the first period for every grid rate, tune the rate on the second,
/// evaluate the selected model on the third.
TemporalStudyResult run_temporal_study(const ExperimentConfig& config, const Dataset& data);

struct RegionStudyResult {
    int train_regime = 0;
    std::vector<RegionRow> rows;  // one per regime, in ascending distance order (training regime first)
    bool in_below_far = false;    // sigma_mc(training regime) < sigma_mc(farthest regime)
    bool full_order = false;      // sigma_mc strictly increasing with distance
};

/// For each training regime: fit on its cells only (first period), predict every cell's
/// test period, and group sigma_mc by regime.
std::vector<RegionStudyResult> run_region_study(const ExperimentConfig& config, const Dataset& data);

/// Artifact writers. Each also writes config.txt and manifest.txt.
void write_temporal_artifacts(const std::filesystem::path& dir, const ExperimentConfig& config,
                              const Dataset& data, const TemporalStudyResult& result);
void write_region_artifacts(const std::filesystem::path& dir, const ExperimentConfig& config,
                            const std::vector<RegionStudyResult>& results);
/// metrics.csv, calibration.csv, regions.csv, summary.csv (+ optional per-cell and SVG).
void write_evaluation(const std::filesystem::path& dir, const ExperimentConfig& config, const Evaluation& evaluation);

std::string regions_csv(std::span<const RegionRow> rows);
std::string manifest_text(const ExperimentConfig& config, std::string_view command);
void write_run_header(const std::filesystem::path& dir, const ExperimentConfig& config, std::string_view command);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace smuq
