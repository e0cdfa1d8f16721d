#pragma once
#include <span>
#include <string>

#include "smuq/eval.hpp"

namespace smuq {

/// Calibration curve against the one-to-one line, unit square axes.
std::string calibration_svg(const CalibrationCurve& curve);
/// Per-cell scatter of ubRMSE (x) against mean sigma_comb (y).
std::string error_sigma_svg(std::span<const CellMetrics> metrics);

}  // namespace smuq
