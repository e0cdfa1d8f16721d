#include "smuq/tuning.hpp"

#include <cmath>

#include "smuq/error.hpp"
#include "smuq/seed.hpp"
#include "smuq/text.hpp"
#include "smuq/uq.hpp"

namespace smuq {

TuneObjective parse_tune_objective(std::string_view text) {
    if (text == "magnitude") return TuneObjective::magnitude;
    if (text == "calibration") return TuneObjective::calibration;
    throw Error(ErrorKind::config, "tune.objective must be 'magnitude' or 'calibration'");
}

std::string_view to_string(TuneObjective objective) {
    return objective == TuneObjective::magnitude ? "magnitude" : "calibration";
}

std::vector<double> default_grid() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}; }

TuneResult select_rate(std::vector<RateEvaluation> rows) {
    if (rows.empty()) throw Error(ErrorKind::precondition, "dropout grid is empty");
    TuneResult result{std::move(rows), 0};
    for (std::size_t k = 1; k < result.rows.size(); ++k) {
        const auto& cand = result.rows[k];
        const auto& best = result.rows[result.selected];
        if (cand.mismatch < best.mismatch || (cand.mismatch == best.mismatch && cand.rate < best.rate))
            result.selected = k;
    }
    return result;
}

RateEvaluation evaluate_rate(double rate, const PredictiveDistribution& pred, const TuneView& tune,
                             TuneObjective objective) {
    const auto metrics = cell_metrics(pred, tune);
    double sigma = 0.0, err = 0.0;
    std::size_t n = 0;
    for (const auto& m : metrics)
        if (m.n_observed >= 2) {
            sigma += m.mean_sigma_comb;
            err += m.ubrmse;
            ++n;
        }
    if (n == 0) throw Error(ErrorKind::precondition, "tune period has no cell with two observations");
    RateEvaluation row{rate, sigma / static_cast<double>(n), err / static_cast<double>(n), 0.0};
    if (objective == TuneObjective::magnitude) {
        row.mismatch = std::abs(row.mean_sigma_comb - row.mean_ubrmse);
    } else {
        const auto grid = default_calibration_grid();
        row.mismatch = calibration_curve(pred, tune, grid).mean_abs_deviation();
    }
    return row;
}

TuneResult tune_dropout(std::span<const LstmParams<double>> params_by_rate, const TuneView& tune,
                        const Normalizer& normalizer, Index members, std::uint64_t seed, std::span<const double> grid,
                        TuneObjective objective, std::size_t threads) {
    if (grid.empty()) throw Error(ErrorKind::precondition, "dropout grid is empty");
    if (params_by_rate.size() != grid.size())
        throw Error(ErrorKind::precondition, "one trained model per grid rate is required");
    if (tune.n_cells() == 0 || tune.n_steps() == 0) throw Error(ErrorKind::precondition, "tune view is empty");
    std::vector<RateEvaluation> rows;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto pred = predict_dataset(params_by_rate[k], normalizer, tune, grid[k], members,
                                          derive_seed(seed, "tune-rate", k), threads);
        rows.push_back(evaluate_rate(grid[k], pred, tune, objective));
    }
    return select_rate(std::move(rows));
}

std::string tune_csv(const TuneResult& result) {
    std::string out = "rate,mean_sigma_comb,mean_ubrmse,mismatch,selected\n";
    for (std::size_t k = 0; k < result.rows.size(); ++k) {
        const auto& r = result.rows[k];
        out += format_double(r.rate) + ',' + format_double(r.mean_sigma_comb) + ',' + format_double(r.mean_ubrmse) +
               ',' + format_double(r.mismatch) + ',' + (k == result.selected ? "1" : "0") + '\n';
    }
    return out;
}

}  // namespace smuq
