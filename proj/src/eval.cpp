#include "smuq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smuq/error.hpp"
#include "smuq/text.hpp"

namespace smuq {

ErrorSummary error_summary(const Eigen::Ref<const VectorXd>& pred, const Eigen::Ref<const VectorXd>& obs,
                           const Eigen::Ref<const MaskVector>& mask) {
    if (pred.size() != obs.size() || mask.size() != obs.size())
        throw Error(ErrorKind::precondition, "prediction, observation and mask lengths differ");
    ErrorSummary s;
    double sum = 0.0, sum_sq = 0.0;
    for (Index t = 0; t < obs.size(); ++t) {
        if (!mask(t)) continue;
        const double e = pred(t) - obs(t);
        sum += e;
        sum_sq += e * e;
        ++s.n;
    }
    if (s.n == 0) return s;
    const double n = static_cast<double>(s.n);
    s.bias = sum / n;
    s.rmse = std::sqrt(sum_sq / n);
    double dev = 0.0;
    for (Index t = 0; t < obs.size(); ++t)
        if (mask(t)) {
            const double d = pred(t) - obs(t) - s.bias;
            dev += d * d;
        }
    s.ubrmse = std::sqrt(dev / n);
    return s;
}

double ubrmse(const Eigen::Ref<const VectorXd>& pred, const Eigen::Ref<const VectorXd>& obs,
              const Eigen::Ref<const MaskVector>& mask) {
    const auto s = error_summary(pred, obs, mask);
    if (s.n < 2) throw Error(ErrorKind::precondition, "ubRMSE needs at least two observed steps");
    return s.ubrmse;
}

std::optional<double> pearson(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y) {
    if (x.size() != y.size()) throw Error(ErrorKind::precondition, "correlation inputs differ in length");
    if (x.size() < 2) return std::nullopt;
    const VectorXd dx = x.array() - x.mean();
    const VectorXd dy = y.array() - y.mean();
    const double sxx = dx.squaredNorm(), syy = dy.squaredNorm();
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<CellMetrics> cell_metrics(const PredictiveDistribution& pred, const DatasetView& view) {
    if (pred.cells.size() != view.n_cells() || pred.range != view.range())
        throw Error(ErrorKind::precondition, "predictions are not aligned with the dataset view");
    std::vector<CellMetrics> rows;
    rows.reserve(view.n_cells());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < view.n_cells(); ++i) {
        const auto& s = pred.cells[i];
        if (pred.cell_ids[i] != view.cell(i).cell_id || s.size() != view.n_steps())
            throw Error(ErrorKind::precondition, "predictions are not aligned with the dataset view");
        const VectorXd y = view.target(i);
        const MaskVector obs = view.observed(i);
        const auto err = error_summary(s.mu, y, obs);

        CellMetrics m;
        m.cell_id = view.cell(i).cell_id;
        m.n_observed = err.n;
        if (err.n >= 2) {
            m.ubrmse = err.ubrmse;
            m.rmse = err.rmse;
            m.bias = err.bias;
            VectorXd p(err.n), o(err.n);
            for (Index t = 0, k = 0; t < y.size(); ++t)
                if (obs(t)) {
                    p(k) = s.mu(t);
                    o(k++) = y(t);
                }
            m.pearson_r = pearson(p, o);
        } else {
            m.ubrmse = m.rmse = m.bias = nan;
        }
        double mc = 0.0, x = 0.0, comb = 0.0;
        for (Index t = 0; t < y.size(); ++t)
            if (obs(t)) {
                mc += s.sigma_mc(t);
                x += s.sigma_x(t);
                comb += s.sigma_comb(t);
            }
        const double n = static_cast<double>(err.n);
        m.mean_sigma_mc = err.n ? mc / n : nan;
        m.mean_sigma_x = err.n ? x / n : nan;
        m.mean_sigma_comb = err.n ? comb / n : nan;
        rows.push_back(std::move(m));
    }
    return rows;
}

std::optional<double> error_uncertainty_correlation(std::span<const CellMetrics> metrics) {
    std::vector<double> err, sig;
    for (const auto& m : metrics)
        if (m.n_observed >= 2) {
            err.push_back(m.ubrmse);
            sig.push_back(m.mean_sigma_comb);
        }
    if (err.size() < 3) throw Error(ErrorKind::precondition, "error-uncertainty correlation needs at least 3 cells");
    const Index n = static_cast<Index>(err.size());
    return pearson(Eigen::Map<const VectorXd>(err.data(), n), Eigen::Map<const VectorXd>(sig.data(), n));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::precondition, "quantile probability must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement on Phi(x) - p.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

double CalibrationCurve::max_abs_deviation() const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, std::abs(p.empirical - p.nominal));
    return m;
}

double CalibrationCurve::mean_abs_deviation() const {
    if (points.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : points) s += std::abs(p.empirical - p.nominal);
    return s / static_cast<double>(points.size());
}

std::vector<double> default_calibration_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 19; ++k) grid.push_back(k / 20.0);
    return grid;
}

namespace {
void check_grid(std::span<const double> grid) {
    if (grid.empty()) throw Error(ErrorKind::precondition, "calibration grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] > 0.0 && grid[k] < 1.0))
            throw Error(ErrorKind::precondition, "calibration grid values must lie in (0, 1)");
        if (k > 0 && !(grid[k] > grid[k - 1]))
            throw Error(ErrorKind::precondition, "calibration grid must be strictly increasing");
    }
}
}  // namespace

CalibrationCurve calibration_curve(const Eigen::Ref<const VectorXd>& residual, const Eigen::Ref<const VectorXd>& sigma,
                                   std::span<const double> grid) {
    check_grid(grid);
    if (residual.size() != sigma.size()) throw Error(ErrorKind::precondition, "residual and sigma lengths differ");
    CalibrationCurve curve;
    const Index n = residual.size();
    for (double p : grid) {
        const double z = normal_quantile(0.5 * (1.0 + p));
        Index inside = 0;
        for (Index k = 0; k < n; ++k)
            if (std::abs(residual(k)) <= z * sigma(k)) ++inside;
        curve.points.push_back({p, n ? static_cast<double>(inside) / static_cast<double>(n) : 0.0});
    }
    return curve;
}

namespace {
void pooled_residuals(const PredictiveSeries& s, const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MaskVector>& obs,
                      std::vector<double>& res, std::vector<double>& sig) {
    for (Index t = 0; t < y.size(); ++t)
        if (obs(t)) {
            res.push_back(y(t) - s.mu(t));
            sig.push_back(s.sigma_comb(t));
        }
}
CalibrationCurve from_vectors(const std::vector<double>& res, const std::vector<double>& sig, std::span<const double> grid) {
    const Index n = static_cast<Index>(res.size());
    return calibration_curve(Eigen::Map<const VectorXd>(res.data(), n), Eigen::Map<const VectorXd>(sig.data(), n), grid);
}
}  // namespace

CalibrationCurve calibration_curve(const PredictiveDistribution& pred, const DatasetView& view,
                                   std::span<const double> grid) {
    if (pred.cells.size() != view.n_cells() || pred.range != view.range())
        throw Error(ErrorKind::precondition, "predictions are not aligned with the dataset view");
    std::vector<double> res, sig;
    for (std::size_t i = 0; i < view.n_cells(); ++i) pooled_residuals(pred.cells[i], view.target(i), view.observed(i), res, sig);
    return from_vectors(res, sig, grid);
}

std::vector<CalibrationCurve> calibration_curves_per_cell(const PredictiveDistribution& pred, const DatasetView& view,
                                                          std::span<const double> grid) {
    if (pred.cells.size() != view.n_cells() || pred.range != view.range())
        throw Error(ErrorKind::precondition, "predictions are not aligned with the dataset view");
    std::vector<CalibrationCurve> curves;
    for (std::size_t i = 0; i < view.n_cells(); ++i) {
        std::vector<double> res, sig;
        pooled_residuals(pred.cells[i], view.target(i), view.observed(i), res, sig);
        curves.push_back(from_vectors(res, sig, grid));
    }
    return curves;
}

std::string metrics_csv(std::span<const CellMetrics> metrics) {
    std::string out = "cell_id,ubrmse,rmse,bias,r,mean_sigma_mc,mean_sigma_x,mean_sigma_comb,n\n";
    for (const auto& m : metrics) {
        out += m.cell_id;
        for (double v : {m.ubrmse, m.rmse, m.bias, m.pearson_r.value_or(std::numeric_limits<double>::quiet_NaN()),
                         m.mean_sigma_mc, m.mean_sigma_x, m.mean_sigma_comb}) {
            out += ',';
            out += format_double(v);
        }
        out += ',' + std::to_string(m.n_observed) + '\n';
    }
    return out;
}

std::string calibration_csv(const CalibrationCurve& curve) {
    std::string out = "nominal,empirical\n";
    for (const auto& p : curve.points) out += format_double(p.nominal) + ',' + format_double(p.empirical) + '\n';
    return out;
}

}  // namespace smuq
