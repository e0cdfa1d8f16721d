#include "smuq/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "smuq/error.hpp"
#include "smuq/parallel.hpp"
#include "smuq/seed.hpp"
#include "smuq/svg.hpp"
#include "smuq/text.hpp"

namespace smuq {

Dataset load_dataset(const ExperimentConfig& config) {
    if (!config.data_csv.empty()) return load_csv(config.data_csv);
    return generate_synthetic(config.synth, stage_seeds(config.seed).data);
}

SplitSpec resolved_split(const ExperimentConfig& config, Index n_steps) {
    auto spec = config.split ? *config.split : SplitSpec::thirds(n_steps);
    spec.validate(n_steps);
    return spec;
}

TrainConfig train_config_for(const ExperimentConfig& config, double rate, std::uint64_t seed) {
    TrainConfig t = config.train;
    t.dropout = rate;
    t.seed = seed;
    return t;
}

std::vector<LstmParams<double>> train_grid(const TrainView& train, const Normalizer& normalizer,
                                           const ExperimentConfig& config) {
    const auto seeds = stage_seeds(config.seed);
    if (!config.retrain) {
        auto shared = fit(train, normalizer, train_config_for(config, config.train.dropout, seeds.train(0))).params;
        return std::vector<LstmParams<double>>(config.grid.size(), shared);
    }
    std::vector<LstmParams<double>> models(config.grid.size());
    parallel_for(config.grid.size(), config.threads, [&](std::size_t k) {
        models[k] = fit(train, normalizer, train_config_for(config, config.grid[k], seeds.train(k))).params;
    });
    return models;
}

std::vector<RegionRow> aggregate_by_regime(std::span<const CellMetrics> metrics, const DatasetView& view,
                                           int train_regime, const MatrixXd* distances) {
    const auto ids = view.dataset().regimes();
    std::map<int, RegionRow> rows;
    for (std::size_t i = 0; i < view.n_cells(); ++i) {
        const auto& m = metrics[i];
        if (m.n_observed < 2) continue;
        auto& row = rows[view.cell(i).regime_id];
        row.n_cells += 1;
        row.mean_sigma_mc += m.mean_sigma_mc;
        row.mean_sigma_x += m.mean_sigma_x;
        row.mean_sigma_comb += m.mean_sigma_comb;
        row.mean_ubrmse += m.ubrmse;
    }
    auto position = [&](int id) { return std::lower_bound(ids.begin(), ids.end(), id) - ids.begin(); };
    std::vector<RegionRow> out;
    for (auto& [id, row] : rows) {
        const double n = static_cast<double>(row.n_cells);
        row.train_regime = train_regime;
        row.eval_regime = id;
        row.mean_sigma_mc /= n;
        row.mean_sigma_x /= n;
        row.mean_sigma_comb /= n;
        row.mean_ubrmse /= n;
        row.distance = distances && train_regime >= 0 ? (*distances)(position(train_regime), position(id)) : 0.0;
        out.push_back(row);
    }
    return out;
}

Evaluation evaluate(const PredictiveDistribution& pred, const DatasetView& view, const ExperimentConfig& config) {
    Evaluation ev;
    ev.metrics = cell_metrics(pred, view);
    std::size_t defined = 0;
    for (const auto& m : ev.metrics) defined += m.n_observed >= 2;
    if (defined >= 3) ev.correlation = error_uncertainty_correlation(ev.metrics);
    ev.calibration = calibration_curve(pred, view, config.calibration_grid);
    if (config.per_cell_calibration) ev.per_cell = calibration_curves_per_cell(pred, view, config.calibration_grid);
    ev.regions = aggregate_by_regime(ev.metrics, view, -1, nullptr);
    return ev;
}

TemporalStudyResult run_temporal_study(const ExperimentConfig& config, const Dataset& data) {
    const auto seeds = stage_seeds(config.seed);
    const auto views = split(data, resolved_split(config, data.n_steps()));
    TemporalStudyResult result;
    result.normalizer = fit_normalizer(views.train);
    const auto models = train_grid(views.train, result.normalizer, config);
    result.tune = tune_dropout(models, views.tune, result.normalizer, config.members, seeds.tune, config.grid,
                               config.objective, config.threads);
    const double rate = result.tune.selected_rate();
    result.model = models[result.tune.selected];
    result.test_predictions = predict_dataset(result.model, result.normalizer, views.test, rate, config.members,
                                              seeds.predict, config.threads);
    result.evaluation = evaluate(result.test_predictions, views.test, config);
    return result;
}

std::vector<RegionStudyResult> run_region_study(const ExperimentConfig& config, const Dataset& data) {
    const auto ids = data.regimes();
    if (ids.size() < 2) throw Error(ErrorKind::precondition, "region study needs at least two regimes");
    std::vector<int> train_regimes = config.region_train.empty() ? ids : config.region_train;
    for (int r : train_regimes)
        if (!std::binary_search(ids.begin(), ids.end(), r))
            throw Error(ErrorKind::config, "region.train names regime " + std::to_string(r) + " which has no cells");
    const auto seeds = stage_seeds(config.seed);
    const auto views = split(data, resolved_split(config, data.n_steps()));
    const MatrixXd distances = regime_distances(data);

    std::vector<RegionStudyResult> results(train_regimes.size());
    std::vector<LstmParams<double>> models(train_regimes.size());
    std::vector<Normalizer> normalizers(train_regimes.size());
    parallel_for(train_regimes.size(), config.threads, [&](std::size_t k) {
        const auto train = views.train.regime(train_regimes[k]);
        normalizers[k] = fit_normalizer(train);
        models[k] = fit(train, normalizers[k],
                        train_config_for(config, config.region_dropout, seeds.region_train(train_regimes[k])))
                        .params;
    });
    for (std::size_t k = 0; k < train_regimes.size(); ++k) {
        const int r = train_regimes[k];
        const auto pred = predict_dataset(models[k], normalizers[k], views.test, config.region_dropout,
                                          config.members, seeds.region_predict(r), config.threads);
        const auto metrics = cell_metrics(pred, views.test);
        auto rows = aggregate_by_regime(metrics, views.test, r, &distances);
        std::stable_sort(rows.begin(), rows.end(), [&](const RegionRow& a, const RegionRow& b) {
            if ((a.eval_regime == r) != (b.eval_regime == r)) return a.eval_regime == r;
            return a.distance < b.distance;
        });
        auto& res = results[k];
        res.train_regime = r;
        res.rows = rows;
        res.in_below_far = rows.size() >= 2 && rows.front().eval_regime == r &&
                           rows.front().mean_sigma_mc < rows.back().mean_sigma_mc;
        res.full_order = rows.front().eval_regime == r;
        for (std::size_t j = 1; j < rows.size(); ++j)
            res.full_order = res.full_order && rows[j - 1].mean_sigma_mc < rows[j].mean_sigma_mc;
    }
    return results;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

namespace {
std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create directory '" + dir.string() + "': " + ec.message());
}
}  // namespace

std::string manifest_text(const ExperimentConfig& config, std::string_view command) {
    const auto s = stage_seeds(config.seed);
    std::string out;
    out += "command = " + std::string(command) + "\n";
    out += "config_hash = " + hex64(config_hash(config)) + "\n";
    out += "data_hash = " + hex64(data_hash(config)) + "\n";
    out += "seed.root = " + std::to_string(s.root) + "\n";
    out += "seed.data = " + std::to_string(s.data) + "\n";
    out += "seed.tune = " + std::to_string(s.tune) + "\n";
    out += "seed.predict = " + std::to_string(s.predict) + "\n";
    for (std::size_t k = 0; k < config.grid.size(); ++k)
        out += "seed.train." + std::to_string(k) + " = " + std::to_string(s.train(k)) + "\n";
    for (std::size_t r = 0; r < config.synth.regimes.size(); ++r) {
        out += "seed.region_train." + std::to_string(r) + " = " + std::to_string(s.region_train(static_cast<int>(r))) + "\n";
        out += "seed.region_predict." + std::to_string(r) + " = " + std::to_string(s.region_predict(static_cast<int>(r))) + "\n";
    }
    return out;
}

void write_run_header(const std::filesystem::path& dir, const ExperimentConfig& config, std::string_view command) {
    ensure_dir(dir);
    write_text(dir / "config.txt", to_key_values(config).to_text());
    write_text(dir / "manifest.txt", manifest_text(config, command));
}

std::string regions_csv(std::span<const RegionRow> rows) {
    std::string out = "train_regime,eval_regime,distance,n_cells,mean_sigma_mc,mean_sigma_x,mean_sigma_comb,mean_ubrmse\n";
    for (const auto& r : rows)
        out += std::to_string(r.train_regime) + ',' + std::to_string(r.eval_regime) + ',' + format_double(r.distance) +
               ',' + std::to_string(r.n_cells) + ',' + format_double(r.mean_sigma_mc) + ',' +
               format_double(r.mean_sigma_x) + ',' + format_double(r.mean_sigma_comb) + ',' +
               format_double(r.mean_ubrmse) + '\n';
    return out;
}

void write_evaluation(const std::filesystem::path& dir, const ExperimentConfig& config, const Evaluation& ev) {
    ensure_dir(dir);
    write_text(dir / "metrics.csv", metrics_csv(ev.metrics));
    write_text(dir / "calibration.csv", calibration_csv(ev.calibration));
    write_text(dir / "regions.csv", regions_csv(ev.regions));
    std::string summary = "key,value\n";
    summary += "error_uncertainty_r," + format_double(ev.correlation.value_or(std::numeric_limits<double>::quiet_NaN())) + '\n';
    summary += "calibration_max_abs_dev," + format_double(ev.calibration.max_abs_deviation()) + '\n';
    summary += "calibration_mean_abs_dev," + format_double(ev.calibration.mean_abs_deviation()) + '\n';
    write_text(dir / "summary.csv", summary);
    if (config.per_cell_calibration) {
        std::string cells = "cell_id,nominal,empirical\n";
        for (std::size_t i = 0; i < ev.per_cell.size(); ++i)
            for (const auto& p : ev.per_cell[i].points)
                cells += ev.metrics[i].cell_id + ',' + format_double(p.nominal) + ',' + format_double(p.empirical) + '\n';
        write_text(dir / "calibration_cells.csv", cells);
    }
    if (config.svg) {
        write_text(dir / "calibration.svg", calibration_svg(ev.calibration));
        write_text(dir / "error_vs_sigma.svg", error_sigma_svg(ev.metrics));
    }
}

void write_temporal_artifacts(const std::filesystem::path& dir, const ExperimentConfig& config, const Dataset& data,
                              const TemporalStudyResult& result) {
    write_run_header(dir, config, "experiment temporal");
    write_text(dir / "tune.csv", tune_csv(result.tune));
    const auto views = split(data, resolved_split(config, data.n_steps()));
    write_text(dir / "predictions.csv", predictions_csv(result.test_predictions, views.test));
    write_evaluation(dir, config, result.evaluation);
}

void write_region_artifacts(const std::filesystem::path& dir, const ExperimentConfig& config,
                            const std::vector<RegionStudyResult>& results) {
    write_run_header(dir, config, "experiment regions");
    std::vector<RegionRow> rows;
    std::string ordering = "train_regime,in_below_far,full_order\n";
    for (const auto& r : results) {
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
        ordering += std::to_string(r.train_regime) + ',' + (r.in_below_far ? "1" : "0") + ',' + (r.full_order ? "1" : "0") + '\n';
    }
    write_text(dir / "regions.csv", regions_csv(rows));
    write_text(dir / "ordering.csv", ordering);
}

}  // namespace smuq
