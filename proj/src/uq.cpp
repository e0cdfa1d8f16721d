#include "smuq/uq.hpp"

#include <cmath>
#include <map>

#include "smuq/error.hpp"
#include "smuq/parallel.hpp"
#include "smuq/seed.hpp"
#include "smuq/text.hpp"

namespace smuq {

double combine_uncertainty(double sigma_mc, double sigma_x) {
    if (!(sigma_mc >= 0.0) || !(sigma_x >= 0.0))
        throw Error(ErrorKind::precondition, "uncertainty terms must be non-negative");
    return std::sqrt(sigma_mc * sigma_mc + sigma_x * sigma_x);
}

PredictiveSeries summarize_ensemble(const Eigen::Ref<const MatrixXd>& mu, const Eigen::Ref<const MatrixXd>& log_var) {
    const Index T = mu.rows();
    const Index K = mu.cols();
    if (K < 2) throw Error(ErrorKind::precondition, "ensemble size must be at least 2");
    if (log_var.rows() != T || log_var.cols() != K) throw Error(ErrorKind::precondition, "member output shapes differ");
    PredictiveSeries z{VectorXd(T), VectorXd(T), VectorXd(T), VectorXd(T)};
    for (Index t = 0; t < T; ++t) {
        const double ref = mu(t, 0);
        const auto dev = (mu.row(t).array() - ref).eval();
        const double mean_dev = dev.mean();
        z.mu(t) = ref + mean_dev;
        z.sigma_mc(t) = std::sqrt((dev - mean_dev).square().sum() / static_cast<double>(K - 1));
        z.sigma_x(t) = std::sqrt(log_var.row(t).array().exp().mean());
        z.sigma_comb(t) = combine_uncertainty(z.sigma_mc(t), z.sigma_x(t));
    }
    return z;
}

PredictiveSeries denormalize(const PredictiveSeries& z, const Normalizer& normalizer) {
    PredictiveSeries out;
    out.mu = z.mu.unaryExpr([&](double v) { return normalizer.denormalize_target(v); });
    out.sigma_mc = z.sigma_mc * normalizer.target_std;
    out.sigma_x = z.sigma_x * normalizer.target_std;
    out.sigma_comb = out.sigma_mc.binaryExpr(out.sigma_x, [](double a, double b) { return combine_uncertainty(a, b); });
    return out;
}

MaskBatch<double> ensemble_masks(double p, Index D, Index H, Index K, std::uint64_t seed) {
    std::vector<DropoutMasks<double>> masks;
    masks.reserve(static_cast<std::size_t>(K));
    for (Index k = 0; k < K; ++k)
        masks.push_back(sample_masks<double>(p, D, H, derive_seed(seed, "member", static_cast<std::uint64_t>(k))));
    return MaskBatch<double>::from(masks);
}

PredictiveSeries mc_predict(const LstmParams<double>& params, const Normalizer& normalizer,
                            const Eigen::Ref<const MatrixXd>& x, double p, Index K, std::uint64_t seed) {
    check_dropout_rate(p);
    if (K < 2) throw Error(ErrorKind::precondition, "ensemble size must be at least 2");
    if (p == 0.0) {
        // Members are identical; one pass replicated keeps sigma_mc exactly 0 (batched GEMM
        // kernels may round trailing columns differently).
        const auto one = forward_ensemble(params, ensemble_masks(p, params.input, params.hidden, 1, seed), x);
        return denormalize(summarize_ensemble(one.mu.replicate(1, K), one.log_var.replicate(1, K)), normalizer);
    }
    const auto masks = ensemble_masks(p, params.input, params.hidden, K, seed);
    const auto out = forward_ensemble(params, masks, x);
    return denormalize(summarize_ensemble(out.mu, out.log_var), normalizer);
}

PredictiveDistribution predict_dataset(const LstmParams<double>& params, const Normalizer& normalizer,
                                       const DatasetView& view, double p, Index K, std::uint64_t seed,
                                       std::size_t threads) {
    check_dropout_rate(p);
    if (K < 2) throw Error(ErrorKind::precondition, "ensemble size must be at least 2");
    PredictiveDistribution pred;
    pred.range = view.range();
    pred.members = K;
    pred.rate = p;
    pred.cells.resize(view.n_cells());
    pred.cell_ids.resize(view.n_cells());
    const Index begin = view.range().begin;
    const Index len = view.n_steps();
    parallel_for(view.n_cells(), threads, [&](std::size_t i) {
        const auto& cell = view.cell(i);
        const MatrixXd x = normalizer.model_input(view.context_forcings(i), cell.static_attrs);
        auto full = mc_predict(params, normalizer, x, p, K, derive_seed(seed, "cell:" + cell.cell_id));
        pred.cells[i] = {full.mu.segment(begin, len), full.sigma_mc.segment(begin, len),
                         full.sigma_x.segment(begin, len), full.sigma_comb.segment(begin, len)};
        pred.cell_ids[i] = cell.cell_id;
    });
    return pred;
}

std::string predictions_csv(const PredictiveDistribution& pred, const DatasetView& view) {
    std::string out = "cell_id,time,mu,sigma_mc,sigma_x,sigma_comb,observed,target\n";
    const auto& labels = view.dataset().time_labels();
    for (std::size_t i = 0; i < pred.cells.size(); ++i) {
        const auto& s = pred.cells[i];
        const auto y = view.target(i);
        const auto obs = view.observed(i);
        for (Index t = 0; t < s.size(); ++t) {
            out += pred.cell_ids[i];
            out += ',';
            out += labels[static_cast<std::size_t>(pred.range.begin + t)];
            for (double v : {s.mu(t), s.sigma_mc(t), s.sigma_x(t), s.sigma_comb(t)}) {
                out += ',';
                out += format_double(v);
            }
            out += obs(t) ? ",1," : ",0,";
            if (obs(t)) out += format_double(y(t));
            out += '\n';
        }
    }
    return out;
}

PredictiveDistribution parse_predictions_csv(std::string_view text, const DatasetView& view) {
    auto lines = split_fields(text, '\n');
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty() || trim(lines[0]) != "cell_id,time,mu,sigma_mc,sigma_x,sigma_comb,observed,target")
        throw Error(ErrorKind::schema, "predictions CSV has an unexpected header");
    const Index len = view.n_steps();
    const auto& labels = view.dataset().time_labels();
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < view.n_cells(); ++i) position[view.cell(i).cell_id] = i;

    PredictiveDistribution pred;
    pred.range = view.range();
    pred.cells.assign(view.n_cells(), {VectorXd(len), VectorXd(len), VectorXd(len), VectorXd(len)});
    pred.cell_ids.resize(view.n_cells());
    std::vector<Index> filled(view.n_cells(), 0);
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const std::string where = "predictions line " + std::to_string(l + 1);
        const auto f = split_fields(lines[l], ',');
        if (f.size() != 8) throw Error(ErrorKind::parse, where + ": expected 8 fields");
        const auto it = position.find(std::string(trim(f[0])));
        if (it == position.end()) throw Error(ErrorKind::schema, where + ": cell not in dataset view");
        const std::size_t i = it->second;
        const Index t = filled[i]++;
        if (t >= len || labels[static_cast<std::size_t>(view.range().begin + t)] != trim(f[1]))
            throw Error(ErrorKind::schema, where + ": time does not align with the dataset view");
        auto& s = pred.cells[i];
        s.mu(t) = parse_double(f[2], where);
        s.sigma_mc(t) = parse_double(f[3], where);
        s.sigma_x(t) = parse_double(f[4], where);
        s.sigma_comb(t) = parse_double(f[5], where);
        pred.cell_ids[i] = it->first;
    }
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (filled[i] != len) throw Error(ErrorKind::schema, "predictions do not cover cell '" + view.cell(i).cell_id + "'");
    return pred;
}

}  // namespace smuq
