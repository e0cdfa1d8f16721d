#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smuq/data.hpp"
#include "smuq/eval.hpp"
#include "smuq/lstm.hpp"

namespace smuq {

/// How a candidate rate is scored on the tune period.
enum class TuneObjective {
    magnitude,    // |mean over cells of mean sigma_comb - mean over cells of ubRMSE|
    calibration,  // mean |empirical - nominal| of the pooled calibration curve
};

TuneObjective parse_tune_objective(std::string_view text);
std::string_view to_string(TuneObjective objective);

struct RateEvaluation {
    double rate = 0.0;
    double mean_sigma_comb = 0.0;
    double mean_ubrmse = 0.0;
    double mismatch = 0.0;
};

struct TuneResult {
    std::vector<RateEvaluation> rows;
    std::size_t selected = 0;

    double selected_rate() const { return rows.at(selected).rate; }
};

/// 0.1, 0.2, ..., 0.7.
std::vector<double> default_grid();

/// Index of the minimal mismatch; ties go to the smaller rate.
TuneResult select_rate(std::vector<RateEvaluation> rows);

/// Mismatch of one rate from tune-period predictions.
RateEvaluation evaluate_rate(double rate, const PredictiveDistribution& pred, const TuneView& tune,
                             TuneObjective objective);

/// Scores model k at grid[k] on the tune period and selects the best rate. Pass the same
/// model for every rate to tune only the inference-time rate.
TuneResult tune_dropout(std::span<const LstmParams<double>> params_by_rate, const TuneView& tune,
                        const Normalizer& normalizer, Index members, std::uint64_t seed, std::span<const double> grid,
                        TuneObjective objective = TuneObjective::magnitude, std::size_t threads = 1);

/// Header rate,mean_sigma_comb,mean_ubrmse,mismatch,selected.
std::string tune_csv(const TuneResult& result);

}  // namespace smuq
