#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "smuq/data.hpp"
#include "smuq/lstm.hpp"

namespace smuq {

/// Per-step predictive summary of one cell.
struct PredictiveSeries {
    VectorXd mu;          // ensemble mean
    VectorXd sigma_mc;    // epistemic: sample std of member means
    VectorXd sigma_x;     // aleatoric: sqrt of mean member variance
    VectorXd sigma_comb;  // sqrt(sigma_mc^2 + sigma_x^2)

    Index size() const { return mu.size(); }
};

/// Predictions for every cell of a view, in the view's cell order.
struct PredictiveDistribution {
    std::vector<std::string> cell_ids;
    std::vector<PredictiveSeries> cells;
    StepRange range;
    Index members = 0;
    double rate = 0.0;
};

/// sqrt(sigma_mc^2 + sigma_x^2); throws on negative input.
double combine_uncertainty(double sigma_mc, double sigma_x);

/// Reduces member outputs (T x K) to a normalized-unit summary. Deviations are taken
/// relative to member 0, so identical members give sigma_mc exactly 0.
PredictiveSeries summarize_ensemble(const Eigen::Ref<const MatrixXd>& mu, const Eigen::Ref<const MatrixXd>& log_var);

/// Converts a normalized-unit summary to target units (shift the mean, scale the sigmas)
/// and recombines sigma_comb from the scaled terms.
PredictiveSeries denormalize(const PredictiveSeries& z, const Normalizer& normalizer);

/// Masks of ensemble member k are drawn from derive_seed(seed, "member", k).
MaskBatch<double> ensemble_masks(double p, Index D, Index H, Index K, std::uint64_t seed);

/// K stochastic forward passes over normalized input rows x; result in target units.
PredictiveSeries mc_predict(const LstmParams<double>& params, const Normalizer& normalizer,
                            const Eigen::Ref<const MatrixXd>& x, double p, Index K, std::uint64_t seed);

/// mc_predict for every cell of the view. Each cell runs from step 0 of the dataset
/// (forcings only) so the recurrent state is warm at the view's first step; outputs cover
/// the view's range. Cell seeds are derive_seed(seed, "cell:" + cell_id), so results do not
/// depend on cell order or thread count.
PredictiveDistribution predict_dataset(const LstmParams<double>& params, const Normalizer& normalizer,
                                       const DatasetView& view, double p, Index K, std::uint64_t seed,
                                       std::size_t threads = 1);

/// CSV with header cell_id,time,mu,sigma_mc,sigma_x,sigma_comb,observed,target.
std::string predictions_csv(const PredictiveDistribution& pred, const DatasetView& view);
/// Parses predictions_csv output back, aligned to the view (cells and times must match).
PredictiveDistribution parse_predictions_csv(std::string_view text, const DatasetView& view);

}  // namespace smuq
