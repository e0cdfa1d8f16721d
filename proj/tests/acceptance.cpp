// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Criteria 6 to 8 train full desk-scale models and take a few minutes on one core.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "smuq/experiments.hpp"
#include "smuq/seed.hpp"
#include "support/checks.hpp"
#include "support/gradcheck.hpp"

using namespace smuq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::size_t worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Sample Pearson correlation of two equally long series.
double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<Index>(a.size());
    const Eigen::Map<const VectorXd> x(a.data(), n), y(b.data(), n);
    const VectorXd dx = x.array() - x.mean(), dy = y.array() - y.mean();
    return dx.dot(dy) / std::sqrt(dx.squaredNorm() * dy.squaredNorm());
}

Outcome gradient_correctness() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Index H = 1 + Index(rng() % 4), D = 1 + Index(rng() % 3), T = 1 + Index(rng() % 6);
        const double p = k % 4 == 0 ? 0.0 : 0.1 * double(1 + rng() % 5);
        worst = std::max(worst, oracle::max_relative_gradient_error(oracle::random_problem(H, D, T, rng(), p)));
    }
    return {worst < 1e-4, fmt("max relative error %.2e over 20 instances (limit 1e-4)", worst)};
}

// Small dataset and untrained model shared by the pure UQ properties.
struct Toy {
    Dataset data;
    SplitViews views;
    Normalizer normalizer;

    static SynthConfig config() {
        SynthConfig c = default_synth_config();
        c.n_steps = 240;
        for (auto& r : c.regimes) r.cells = 3;
        return c;
    }
    Toy() : data(generate_synthetic(config(), 5)), views(split(data, SplitSpec::thirds(240))), normalizer(fit_normalizer(views.train)) {}
    Toy(const Toy&) = delete;
};

Outcome combination_identity(const Toy& toy) {
    double worst = 0.0;
    std::size_t n = 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        auto params = init_params<double>(8, toy.data.n_inputs(), s);
        params.b_logvar = -2.0 + double(s);
        for (double p : default_grid()) {
            worst = std::max(worst, oracle::combination_residual(predict_dataset(params, toy.normalizer, toy.views.test, p, 20, s)));
            ++n;
        }
    }
    return {worst <= 1e-12, fmt("worst |comb^2 - mc^2 - x^2| / max(1, comb^2) = %.1e over %zu distributions", worst, n)};
}

Outcome zero_dropout_collapse(const Toy& toy) {
    std::size_t steps = 0, violations = 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto params = init_params<double>(8, toy.data.n_inputs(), 100 + s);
        for (const auto& c : predict_dataset(params, toy.normalizer, toy.views.test, 0.0, 50, s).cells) {
            steps += std::size_t(c.size());
            violations += std::size_t(((c.sigma_mc.array() != 0.0) || (c.sigma_comb.array() != c.sigma_x.array())).count());
        }
    }
    return {violations == 0 && steps > 0, fmt("%zu of %zu steps with nonzero sigma_mc at p = 0", violations, steps)};
}

Outcome ubrmse_properties() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    double shift_err = 0.0, identity_err = 0.0;
    for (int k = 0; k < 100; ++k) {
        const Index len = 10 + Index(rng() % 200);
        VectorXd pred(len), obs(len);
        for (Index t = 0; t < len; ++t) {
            pred(t) = n(rng);
            obs(t) = n(rng) + 0.3;
        }
        const MaskVector all = MaskVector::Constant(len, true);
        const double shift = 5.0 * n(rng);
        shift_err = std::max(shift_err, std::abs(ubrmse(pred.array() + shift, obs, all) - ubrmse(pred, obs, all)));
        const auto s = error_summary(pred, obs, all);
        identity_err = std::max(identity_err, std::abs(s.rmse * s.rmse - s.ubrmse * s.ubrmse - s.bias * s.bias));
    }
    return {shift_err <= 1e-12 && identity_err <= 1e-12,
            fmt("shift invariance error %.1e, rmse^2 identity error %.1e on 100 vectors", shift_err, identity_err)};
}

Outcome calibration_oracle() {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.01, 0.2);
    const Index N = 100000;
    VectorXd residual(N), sigma(N);
    for (Index i = 0; i < N; ++i) {
        const double mu = u(rng);
        sigma(i) = u(rng);
        residual(i) = (mu + sigma(i) * n(rng)) - mu;
    }
    const auto curve = calibration_curve(residual, sigma, default_calibration_grid());
    const double dev = curve.max_abs_deviation();
    return {dev <= 0.01 && curve.n_points() == 19, fmt("max |empirical - nominal| = %.4f at 19 points (limit 0.01)", dev)};
}

Outcome temporal_study() {
    auto config = resolve_config({});
    config.threads = worker_threads();
    const auto data = load_dataset(config);
    const auto r = run_temporal_study(config, data);
    const double dev = r.evaluation.calibration.max_abs_deviation();
    const double corr = r.evaluation.correlation.value_or(NAN);
    const double resid = oracle::combination_residual(r.test_predictions);
    return {dev <= 0.15 && corr > 0.3 && resid <= 1e-12,
            fmt("selected p = %.2f, calibration max dev %.4f (limit 0.15), error-uncertainty r = %.3f (limit 0.3)",
                r.tune.selected_rate(), dev, corr)};
}

Outcome region_study() {
    int in_below_far = 0, ordered = 0;
    std::string sigmas;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto config = resolve_config(KeyValueConfig::parse("synth.regimes = 3\nregion.train = 0\n"));
        config.seed = seed;
        config.threads = worker_threads();
        const auto r = run_region_study(config, load_dataset(config)).at(0);
        in_below_far += r.in_below_far;
        ordered += r.full_order;
        sigmas += fmt(" [%.4f %.4f %.4f]", r.rows[0].mean_sigma_mc, r.rows[1].mean_sigma_mc, r.rows[2].mean_sigma_mc);
    }
    return {in_below_far == 5 && ordered >= 3,
            fmt("in < far on %d/5 seeds, in < near < far on %d/5; mean sigma_mc by distance:", in_below_far, ordered) + sigmas};
}

Outcome heteroscedastic_recovery() {
    auto config = resolve_config(KeyValueConfig::parse("train.dropout = 0\n"));
    const auto seeds = stage_seeds(config.seed);
    const auto truth = generate_synthetic_with_truth(config.synth, seeds.data);
    const auto views = split(truth.data, resolved_split(config, truth.data.n_steps()));
    const auto normalizer = fit_normalizer(views.train);
    const auto model = fit(views.train, normalizer, train_config_for(config, 0.0, seeds.train(0))).params;
    const auto pred = predict_dataset(model, normalizer, views.test, 0.0, 2, seeds.predict, worker_threads());

    std::vector<double> sx, st;
    const auto range = views.test.range();
    for (std::size_t i = 0; i < pred.cells.size(); ++i) {
        const auto& id = pred.cell_ids[i];
        std::size_t c = 0;
        while (truth.data.cell(c).cell_id != id) ++c;
        for (Index t = 0; t < range.size(); ++t) {
            sx.push_back(pred.cells[i].sigma_x(t));
            st.push_back(truth.noise_std[c](range.begin + t));
        }
    }
    const double r = correlation(sx, st);
    const double mx = std::accumulate(sx.begin(), sx.end(), 0.0) / double(sx.size());
    const double mt = std::accumulate(st.begin(), st.end(), 0.0) / double(st.size());
    const double rel = std::abs(mx - mt) / mt;
    return {r > 0.5 && rel <= 0.3 && oracle::combination_residual(pred) <= 1e-12,
            fmt("r(sigma_x, sigma_true) = %.3f (limit 0.5); mean sigma_x %.4f vs sigma_true %.4f (%.1f%%, limit 30%%)", r,
                mx, mt, 100.0 * rel)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int cli(const std::string& args) {
    const std::string cmd = std::string(SMUQ_CLI_PATH) + " " + args + " > /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Every study through the CLI: twice single-threaded, once with several workers.
Outcome reproducibility() {
    const fs::path root = fs::temp_directory_path() / "smuq-acceptance-repro";
    fs::remove_all(root);
    const std::string scaled =
        " --set synth.steps=400 --set regime.0.cells=6 --set regime.1.cells=6 --set regime.2.cells=6 --set regime.3.cells=6"
        " --set model.hidden=12 --set train.epochs=6 --set uq.members=10 --set eval.per_cell=true";
    std::size_t compared = 0;
    std::string mismatch;
    for (const char* study : {"temporal", "regions"}) {
        const char* runs[] = {"a", "b", "c"};
        const char* threads[] = {"1", "1", "3"};
        for (int k = 0; k < 3; ++k) {
            const auto dir = root / study / runs[k];
            if (cli(std::string("experiment ") + study + scaled + " --threads " + threads[k] + " --out " + dir.string()) != 0)
                return {false, std::string(study) + " run failed"};
        }
        for (const auto& entry : fs::directory_iterator(root / study / "a")) {
            if (entry.path().extension() != ".csv") continue;
            const auto name = entry.path().filename();
            const auto ref = slurp(entry.path());
            for (const char* other : {"b", "c"}) {
                ++compared;
                if (slurp(root / study / other / name) != ref) mismatch += " " + std::string(study) + "/" + other + "/" + name.string();
            }
        }
    }
    const auto synth_a = root / "synth_a.csv", synth_b = root / "synth_b.csv";
    cli("synth --out " + synth_a.string());
    cli("synth --threads 3 --out " + synth_b.string());
    ++compared;
    if (slurp(synth_a) != slurp(synth_b) || slurp(synth_a).empty()) mismatch += " synth";
    fs::remove_all(root);
    return {mismatch.empty() && compared > 10,
            mismatch.empty() ? fmt("%zu CSV comparisons byte-identical across reruns and thread counts", compared)
                             : "differs:" + mismatch};
}

}  // namespace

int main() {
    std::printf("acceptance suite (%zu worker threads)\n", worker_threads());
    std::fflush(stdout);
    const Toy toy;
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"gradient correctness", gradient_correctness},
        {"combination identity", [&] { return combination_identity(toy); }},
        {"zero-dropout collapse", [&] { return zero_dropout_collapse(toy); }},
        {"ubRMSE properties", ubrmse_properties},
        {"calibration oracle", calibration_oracle},
        {"temporal study", temporal_study},
        {"region study", region_study},
        {"heteroscedastic recovery", heteroscedastic_recovery},
        {"reproducibility", reproducibility},
    };
    int failed = 0, index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed ? 1 : 0;
}
