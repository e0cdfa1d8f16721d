#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "smuq/data.hpp"

namespace smuq {

/// Parameters of one synthetic climate/soil regime. Each cell perturbs the
/// regime's bucket and climate parameters by a relative Gaussian jitter.
struct RegimeConfig {
    std::size_t cells = 50;
    double infiltration = 0.02;   // a: moisture gain per unit precipitation
    double loss_rate = 0.08;      // b: fractional loss per unit evaporative demand
    double wet_prob = 0.3;        // probability a step is wet
    double wet_depth = 8.0;       // mean precipitation depth on wet steps (exponential)
    double evap_mean = 1.0;       // mean evaporative demand
    double evap_amplitude = 0.5;  // relative seasonal amplitude of demand
    double evap_noise = 0.1;      // std of additive demand noise
    double noise_base = 0.01;     // sigma0 of the observation noise
    double noise_slope = 0.05;    // sigma1: noise std grows as sigma0 + sigma1 * s
    double jitter = 0.05;         // relative per-cell perturbation of parameters
    double missing_rate = 0.0;    // probability a target step is unobserved
    double initial_moisture = 0.2;
};

struct SynthConfig {
    Index n_steps = 1095;
    double season_length = 365.0;
    std::vector<RegimeConfig> regimes;

    /// Throws ErrorKind::config naming the offending field.
    void validate() const;
};

/// Four regimes with graded aridity and regime-dependent observation noise.
SynthConfig default_synth_config();

/// Static attribute names carried by synthetic cells, in column order.
std::vector<std::string> synthetic_static_names();
std::vector<std::string> synthetic_forcing_names();

/// Generated data plus the latent moisture and the true noise std per cell.
struct SyntheticTruth {
    Dataset data;
    std::vector<VectorXd> latent;
    std::vector<VectorXd> noise_std;
};

SyntheticTruth generate_synthetic_with_truth(const SynthConfig& config, std::uint64_t seed);
Dataset generate_synthetic(const SynthConfig& config, std::uint64_t seed);

/// One step of the bucket recursion: clip(s + a P - b E s, 0, 1).
inline double bucket_step(double s, double precip, double demand, double a, double b) {
    const double next = s + a * precip - b * demand * s;
    return next < 0.0 ? 0.0 : (next > 1.0 ? 1.0 : next);
}

/// Pairwise regime dissimilarity: Euclidean distance between regime-mean static
/// attribute vectors, each attribute scaled by its standard deviation over all cells.
/// Rows and columns follow Dataset::regimes().
MatrixXd regime_distances(const Dataset& data);

}  // namespace smuq
