#pragma once
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smuq/data.hpp"
#include "smuq/uq.hpp"

namespace smuq {

/// Error statistics of e = pred - obs over the observed steps.
struct ErrorSummary {
    Index n = 0;
    double bias = 0.0;    // mean(e)
    double rmse = 0.0;    // sqrt(mean(e^2))
    double ubrmse = 0.0;  // sqrt(mean((e - mean(e))^2))
};

ErrorSummary error_summary(const Eigen::Ref<const VectorXd>& pred, const Eigen::Ref<const VectorXd>& obs,
                           const Eigen::Ref<const MaskVector>& mask);

/// Unbiased RMSE; requires at least two observed steps.
double ubrmse(const Eigen::Ref<const VectorXd>& pred, const Eigen::Ref<const VectorXd>& obs,
              const Eigen::Ref<const MaskVector>& mask);

/// Pearson correlation; empty when either series is constant or shorter than 2.
std::optional<double> pearson(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y);

struct CellMetrics {
    std::string cell_id;
    double ubrmse = 0.0;
    double rmse = 0.0;
    double bias = 0.0;
    std::optional<double> pearson_r;  // prediction vs observation; empty if undefined
    double mean_sigma_mc = 0.0;
    double mean_sigma_x = 0.0;
    double mean_sigma_comb = 0.0;
    Index n_observed = 0;
};

/// Metrics per cell over the observed steps of the view (target units). Cells with
/// fewer than two observations get NaN error statistics.
std::vector<CellMetrics> cell_metrics(const PredictiveDistribution& pred, const DatasetView& view);

/// Pearson correlation between per-cell ubRMSE and mean sigma_comb over cells with
/// defined metrics. Requires three such cells; empty if either series is constant.
std::optional<double> error_uncertainty_correlation(std::span<const CellMetrics> metrics);

/// Standard normal quantile: Acklam's rational approximation refined by one Halley step
/// against erfc; absolute error well below 1e-12 on (1e-300, 1 - 1e-16).
double normal_quantile(double p);

struct CalibrationPoint {
    double nominal = 0.0;
    double empirical = 0.0;
};

struct CalibrationCurve {
    std::vector<CalibrationPoint> points;

    std::size_t n_points() const { return points.size(); }
    double max_abs_deviation() const;
    double mean_abs_deviation() const;
};

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_calibration_grid();

/// Fraction of (residual, sigma) pairs with |residual| <= z_{(1+p)/2} sigma, per nominal p.
CalibrationCurve calibration_curve(const Eigen::Ref<const VectorXd>& residual, const Eigen::Ref<const VectorXd>& sigma,
                                   std::span<const double> grid);

/// Pooled over all observed steps of all cells, using mu and sigma_comb.
CalibrationCurve calibration_curve(const PredictiveDistribution& pred, const DatasetView& view,
                                   std::span<const double> grid);

/// One curve per cell, in view order.
std::vector<CalibrationCurve> calibration_curves_per_cell(const PredictiveDistribution& pred, const DatasetView& view,
                                                          std::span<const double> grid);

std::string metrics_csv(std::span<const CellMetrics> metrics);
std::string calibration_csv(const CalibrationCurve& curve);

}  // namespace smuq
