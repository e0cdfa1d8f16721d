#include "smuq/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace smuq {
namespace {

constexpr double size = 400.0;
constexpr double pad = 40.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// Maps [0, xmax] x [0, ymax] to the plot square, y up.
struct Frame {
    double xmax, ymax;
    double x(double v) const { return pad + v / xmax * (size - 2 * pad); }
    double y(double v) const { return size - pad - v / ymax * (size - 2 * pad); }
};

std::string open(const Frame& f, const char* xlabel, const char* ylabel) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" viewBox=\"0 0 400 400\">\n";
    s += "<rect width=\"400\" height=\"400\" fill=\"white\"/>\n";
    s += "<path d=\"M" + num(f.x(0)) + " " + num(f.y(0)) + " H" + num(f.x(f.xmax)) + " M" + num(f.x(0)) + " " +
         num(f.y(0)) + " V" + num(f.y(f.ymax)) + "\" stroke=\"black\" fill=\"none\"/>\n";
    s += "<text x=\"200\" y=\"390\" text-anchor=\"middle\" font-size=\"12\">" + std::string(xlabel) + "</text>\n";
    s += "<text x=\"12\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 12 200)\">" +
         std::string(ylabel) + "</text>\n";
    s += "<text x=\"" + num(f.x(f.xmax)) + "\" y=\"" + num(f.y(0) + 14) + "\" text-anchor=\"end\" font-size=\"10\">" +
         num(f.xmax) + "</text>\n";
    s += "<text x=\"" + num(f.x(0) - 4) + "\" y=\"" + num(f.y(f.ymax) + 4) + "\" text-anchor=\"end\" font-size=\"10\">" +
         num(f.ymax) + "</text>\n";
    return s;
}

}  // namespace

std::string calibration_svg(const CalibrationCurve& curve) {
    const Frame f{1.0, 1.0};
    std::string s = open(f, "nominal probability", "empirical coverage");
    s += "<line x1=\"" + num(f.x(0)) + "\" y1=\"" + num(f.y(0)) + "\" x2=\"" + num(f.x(1)) + "\" y2=\"" + num(f.y(1)) +
         "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    std::string path;
    for (const auto& p : curve.points)
        path += (path.empty() ? "M" : " L") + num(f.x(p.nominal)) + " " + num(f.y(p.empirical));
    s += "<path d=\"" + path + "\" stroke=\"green\" stroke-width=\"2\" fill=\"none\"/>\n</svg>\n";
    return s;
}

std::string error_sigma_svg(std::span<const CellMetrics> metrics) {
    double hi = 0.0;
    for (const auto& m : metrics)
        if (m.n_observed >= 2) hi = std::max({hi, m.ubrmse, m.mean_sigma_comb});
    const double top = hi > 0.0 ? hi * 1.05 : 1.0;
    const Frame f{top, top};
    std::string s = open(f, "ubRMSE", "mean sigma_comb");
    s += "<line x1=\"" + num(f.x(0)) + "\" y1=\"" + num(f.y(0)) + "\" x2=\"" + num(f.x(top)) + "\" y2=\"" +
         num(f.y(top)) + "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    for (const auto& m : metrics)
        if (m.n_observed >= 2)
            s += "<circle cx=\"" + num(f.x(m.ubrmse)) + "\" cy=\"" + num(f.y(m.mean_sigma_comb)) +
                 "\" r=\"2.5\" fill=\"steelblue\"/>\n";
    return s + "</svg>\n";
}

}  // namespace smuq
