#include "smuq/training.hpp"

#include <chrono>
#include <random>
#include <string>

#include "smuq/error.hpp"
#include "smuq/seed.hpp"

namespace smuq {

void TrainConfig::validate() const {
    if (hidden < 1) throw Error(ErrorKind::config, "model.hidden must be at least 1");
    if (window < 2) throw Error(ErrorKind::config, "train.window must be at least 2");
    if (batch_size < 1) throw Error(ErrorKind::config, "train.batch must be at least 1");
    if (epochs < 0) throw Error(ErrorKind::config, "train.epochs must be non-negative");
    if (batches_per_epoch < 0) throw Error(ErrorKind::config, "train.batches_per_epoch must be non-negative");
    if (!(adam.learning_rate > 0.0)) throw Error(ErrorKind::config, "train.lr must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw Error(ErrorKind::config, "train.beta1 must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw Error(ErrorKind::config, "train.beta2 must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) throw Error(ErrorKind::config, "train.eps must be positive");
    if (!(clip_norm > 0.0)) throw Error(ErrorKind::config, "train.clip must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::config, "train.dropout must lie in [0, 1)");
}

Index batches_per_epoch(const DatasetView& view, const TrainConfig& config) {
    if (config.batches_per_epoch > 0) return config.batches_per_epoch;
    const Index cells_steps = static_cast<Index>(view.n_cells()) * view.n_steps();
    const Index per_batch = config.window * config.batch_size;
    return std::max<Index>(1, (cells_steps + per_batch - 1) / per_batch);
}

FitResult fit(const TrainView& train, const Normalizer& normalizer, const TrainConfig& config) {
    config.validate();
    if (train.n_cells() == 0 || train.n_steps() == 0) throw Error(ErrorKind::precondition, "training view is empty");
    if (config.window > train.n_steps())
        throw Error(ErrorKind::config, "train.window (" + std::to_string(config.window) +
                                           ") exceeds the training range (" + std::to_string(train.n_steps()) + ")");
    const auto start_clock = std::chrono::steady_clock::now();
    const Index D = normalizer.n_inputs();
    const Index H = config.hidden;
    const Index T = config.window;

    const std::size_t n_cells = train.n_cells();
    std::vector<MatrixXd> inputs(n_cells);
    std::vector<VectorXd> targets(n_cells);
    for (std::size_t i = 0; i < n_cells; ++i) {
        inputs[i] = normalizer.model_input(train.forcings(i), train.cell(i).static_attrs);
        targets[i] = train.target(i).unaryExpr([&](double y) { return normalizer.normalize_target(y); });
    }

    FitResult result{init_params<double>(H, D, derive_seed(config.seed, "init")), {}};
    if (config.epochs == 0) return result;

    std::mt19937_64 rng(derive_seed(config.seed, "batches"));
    std::uniform_int_distribution<std::size_t> pick_cell(0, n_cells - 1);
    std::uniform_int_distribution<Index> pick_start(0, train.n_steps() - T);
    Adam<double> adam(result.params.size(), config.adam);
    VectorXd theta = result.params.flatten();
    const Index n_batches = batches_per_epoch(train, config);

    WindowBatch<double> batch;
    std::vector<DropoutMasks<double>> masks(static_cast<std::size_t>(config.batch_size));
    LstmParams<double> grad;
    for (Index epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (Index k = 0; k < n_batches; ++k) {
            batch.inputs.assign(static_cast<std::size_t>(config.batch_size), MatrixXd());
            batch.targets.resize(T, config.batch_size);
            batch.observed.resize(T, config.batch_size);
            for (Index b = 0; b < config.batch_size; ++b) {
                std::size_t cell = 0;
                Index start = 0;
                for (int attempt = 0;; ++attempt) {
                    if (attempt == 1000) throw Error(ErrorKind::precondition, "no training observations");
                    cell = pick_cell(rng);
                    start = pick_start(rng);
                    if (train.observed(cell).segment(start, T).any()) break;
                }
                batch.inputs[static_cast<std::size_t>(b)] = inputs[cell].middleRows(start, T);
                batch.targets.col(b) = targets[cell].segment(start, T);
                batch.observed.col(b) = train.observed(cell).segment(start, T);
                masks[static_cast<std::size_t>(b)] = sample_masks<double>(config.dropout, D, H, rng);
            }
            batch.masks = MaskBatch<double>::from(masks);
            loss_sum += batch_loss(result.params, batch, &grad).total;
            VectorXd g = grad.flatten();
            clip_global_norm(g, config.clip_norm);
            adam.step(theta, g);
            result.params.assign(theta);
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_clock).count();
        result.log.push_back({epoch + 1, loss_sum / static_cast<double>(n_batches), elapsed});
    }
    return result;
}

}  // namespace smuq
