#include "smuq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "smuq/error.hpp"
#include "smuq/seed.hpp"

namespace smuq {

void SynthConfig::validate() const {
    if (n_steps < 1) throw Error(ErrorKind::config, "synth.steps must be positive");
    if (!(season_length > 0.0)) throw Error(ErrorKind::config, "synth.season must be positive");
    if (regimes.empty()) throw Error(ErrorKind::config, "synth.regimes must be at least 1");
    for (std::size_t i = 0; i < regimes.size(); ++i) {
        const auto& r = regimes[i];
        const std::string key = "regime." + std::to_string(i) + ".";
        auto fail = [&](const char* name, const char* why) {
            throw Error(ErrorKind::config, key + name + " " + why);
        };
        if (r.cells == 0) fail("cells", "must be positive");
        if (r.noise_base < 0.0) fail("sigma0", "must be non-negative");
        if (r.noise_slope < 0.0) fail("sigma1", "must be non-negative");
        if (r.infiltration < 0.0) fail("a", "must be non-negative");
        if (r.loss_rate < 0.0) fail("b", "must be non-negative");
        if (r.wet_prob < 0.0 || r.wet_prob > 1.0) fail("wet_prob", "must lie in [0, 1]");
        if (r.wet_depth < 0.0) fail("wet_depth", "must be non-negative");
        if (r.evap_mean < 0.0) fail("evap_mean", "must be non-negative");
        if (r.evap_noise < 0.0) fail("evap_noise", "must be non-negative");
        if (r.jitter < 0.0) fail("jitter", "must be non-negative");
        if (r.missing_rate < 0.0 || r.missing_rate >= 1.0) fail("missing", "must lie in [0, 1)");
        if (r.initial_moisture < 0.0 || r.initial_moisture > 1.0) fail("s0", "must lie in [0, 1]");
    }
}

SynthConfig default_synth_config() {
    SynthConfig config;
    // From humid to arid: wetter regimes hold more water and observe it with more noise.
    // Noise levels sit near typical satellite retrieval errors.
    const double wet_prob[] = {0.45, 0.35, 0.25, 0.15};
    const double loss[] = {0.12, 0.15, 0.18, 0.21};
    const double evap[] = {0.8, 1.0, 1.2, 1.4};
    const double sigma0[] = {0.05, 0.045, 0.04, 0.035};
    const double sigma1[] = {0.10, 0.08, 0.06, 0.04};
    for (int i = 0; i < 4; ++i) {
        RegimeConfig r;
        r.wet_prob = wet_prob[i];
        r.loss_rate = loss[i];
        r.evap_mean = evap[i];
        r.noise_base = sigma0[i];
        r.noise_slope = sigma1[i];
        config.regimes.push_back(r);
    }
    return config;
}

std::vector<std::string> synthetic_static_names() {
    return {"infiltration", "loss_rate", "wet_prob", "wet_depth", "evap_mean", "mean_precip", "aridity"};
}

std::vector<std::string> synthetic_forcing_names() {
    return {"precip", "evap", "temperature", "radiation", "humidity"};
}

SyntheticTruth generate_synthetic_with_truth(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    const Index T = config.n_steps;
    SyntheticTruth out;
    std::vector<CellRecord> cells;
    std::size_t global = 0;
    for (std::size_t g = 0; g < config.regimes.size(); ++g) {
        const auto& r = config.regimes[g];
        for (std::size_t k = 0; k < r.cells; ++k, ++global) {
            std::mt19937_64 rng(derive_seed(seed, "synth-cell", global));
            std::normal_distribution<double> normal(0.0, 1.0);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            auto perturb = [&](double v) { return std::max(0.0, v * (1.0 + r.jitter * normal(rng))); };

            const double a = perturb(r.infiltration);
            const double b = perturb(r.loss_rate);
            const double wet_prob = std::min(1.0, perturb(r.wet_prob));
            const double wet_depth = perturb(r.wet_depth);
            const double evap_mean = perturb(r.evap_mean);

            CellRecord cell;
            cell.cell_id = "r" + std::to_string(g) + "_c" + std::to_string(k);
            cell.regime_id = static_cast<int>(g);
            const double mean_precip = wet_prob * wet_depth;
            const double aridity = evap_mean / std::max(mean_precip, 1e-3);
            cell.static_attrs = VectorXd{{a, b, wet_prob, wet_depth, evap_mean, mean_precip, aridity}};
            cell.forcings.resize(T, 5);
            cell.target.resize(T);
            cell.observed.resize(T);
            VectorXd latent(T), noise_std(T);

            double s = r.initial_moisture;
            for (Index t = 0; t < T; ++t) {
                const bool wet = unit(rng) < wet_prob && wet_depth > 0.0;
                const double precip = wet ? std::exponential_distribution<double>(1.0 / wet_depth)(rng) : 0.0;
                const double season = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / config.season_length);
                const double anomaly = normal(rng);
                const double demand = std::max(0.0, evap_mean * (1.0 + r.evap_amplitude * season) + r.evap_noise * anomaly);
                // Covariates that only partly echo precip and demand, as real forcing sets do.
                const double temperature = 8.0 + 6.0 * evap_mean + 10.0 * season + 2.0 * anomaly + 0.5 * normal(rng);
                const double radiation = (150.0 + 60.0 * season) * (wet ? 0.55 : 1.0) + 10.0 * normal(rng);
                const double humidity =
                    std::clamp(0.35 + 0.3 * wet_prob + (wet ? 0.25 + 0.01 * precip : 0.0) + 0.05 * normal(rng), 0.0, 1.0);
                const double sigma = r.noise_base + r.noise_slope * s;
                const double eps = sigma > 0.0 ? sigma * normal(rng) : 0.0;
                const bool observed = !(r.missing_rate > 0.0 && unit(rng) < r.missing_rate);

                cell.forcings(t, 0) = precip;
                cell.forcings(t, 1) = demand;
                cell.forcings(t, 2) = temperature;
                cell.forcings(t, 3) = radiation;
                cell.forcings(t, 4) = humidity;
                latent(t) = s;
                noise_std(t) = sigma;
                cell.observed(t) = observed;
                cell.target(t) = observed ? s + eps : std::nan("");
                s = bucket_step(s, precip, demand, a, b);
            }
            cells.push_back(std::move(cell));
            out.latent.push_back(std::move(latent));
            out.noise_std.push_back(std::move(noise_std));
        }
    }
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) labels.push_back(std::to_string(t));
    out.data = Dataset(std::move(cells), synthetic_forcing_names(), synthetic_static_names(), std::move(labels), "step");
    return out;
}

Dataset generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
    return std::move(generate_synthetic_with_truth(config, seed).data);
}

MatrixXd regime_distances(const Dataset& data) {
    const auto ids = data.regimes();
    const Index R = static_cast<Index>(ids.size());
    const Index A = data.n_static();
    MatrixXd centroid = MatrixXd::Zero(R, A);
    VectorXd count = VectorXd::Zero(R);
    VectorXd mean = VectorXd::Zero(A);
    for (const auto& c : data.cells()) {
        const Index r = std::lower_bound(ids.begin(), ids.end(), c.regime_id) - ids.begin();
        centroid.row(r) += c.static_attrs.transpose();
        count(r) += 1.0;
        mean += c.static_attrs;
    }
    const double n = static_cast<double>(data.n_cells());
    mean /= n;
    VectorXd var = VectorXd::Zero(A);
    for (const auto& c : data.cells()) var += (c.static_attrs - mean).cwiseAbs2();
    const VectorXd scale = (var / n).cwiseSqrt().cwiseMax(1e-12);
    for (Index r = 0; r < R; ++r) centroid.row(r) = (centroid.row(r) / count(r)).cwiseQuotient(scale.transpose());

    MatrixXd dist(R, R);
    for (Index i = 0; i < R; ++i)
        for (Index j = 0; j < R; ++j) dist(i, j) = (centroid.row(i) - centroid.row(j)).norm();
    return dist;
}

}  // namespace smuq
