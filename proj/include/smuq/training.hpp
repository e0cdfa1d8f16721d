#pragma once
#include <cmath>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "smuq/data.hpp"
#include "smuq/lstm.hpp"

namespace smuq {

/// Heteroscedastic Gaussian negative log-likelihood with s = log variance,
/// without the constant log(2 pi)/2.
template <class Scalar>
Scalar gaussian_nll(Scalar y, Scalar mu, Scalar s) {
    const Scalar r = y - mu;
    return Scalar(0.5) * std::exp(-s) * r * r + Scalar(0.5) * s;
}

struct LossValue {
    double total = 0.0;  // mean over observed steps
    Index n_observed = 0;
};

/// A batch of equal-length windows sharing one forward pass. Targets are normalized.
template <class Scalar = double>
struct WindowBatch {
    std::vector<Matrix<Scalar>> inputs;  // B windows, each T x D
    Matrix<Scalar> targets;              // T x B
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;  // T x B
    MaskBatch<Scalar> masks;
};

/// Mean over windows of each window's mean NLL over its observed steps. If `grad` is
/// given it receives the exact gradient of that value, by backpropagation through time
/// with the masks held fixed.
template <class Scalar = double>
LossValue batch_loss(const LstmParams<Scalar>& params, const WindowBatch<Scalar>& batch,
                     LstmParams<Scalar>* grad = nullptr) {
    const Index B = static_cast<Index>(batch.inputs.size());
    if (B == 0) throw Error(ErrorKind::precondition, "empty window batch");
    const Index T = batch.inputs[0].rows();
    const Index H = params.hidden;
    if (batch.targets.rows() != T || batch.targets.cols() != B || batch.observed.rows() != T ||
        batch.observed.cols() != B)
        throw Error(ErrorKind::precondition, "targets and mask must be T x B");

    ForwardTape<Scalar> tape;
    const auto out = forward_batch(params, batch.masks, std::span<const Matrix<Scalar>>(batch.inputs),
                                   grad ? &tape : nullptr);

    // Per-step weights: each window contributes 1/B, split evenly over its observed steps.
    Matrix<Scalar> weight = Matrix<Scalar>::Zero(T, B);
    Index n_total = 0;
    for (Index b = 0; b < B; ++b) {
        const Index n = batch.observed.col(b).count();
        if (n == 0) throw Error(ErrorKind::precondition, "window without observed steps");
        n_total += n;
        for (Index t = 0; t < T; ++t)
            if (batch.observed(t, b)) weight(t, b) = Scalar(1) / static_cast<Scalar>(n * B);
    }
    Scalar total = 0;
    Matrix<Scalar> d_mu = Matrix<Scalar>::Zero(T, B);
    Matrix<Scalar> d_s = Matrix<Scalar>::Zero(T, B);
    for (Index b = 0; b < B; ++b)
        for (Index t = 0; t < T; ++t) {
            if (!batch.observed(t, b)) continue;
            const Scalar y = batch.targets(t, b), mu = out.mu(t, b), s = out.log_var(t, b);
            const Scalar w = weight(t, b);
            total += w * gaussian_nll(y, mu, s);
            const Scalar prec = std::exp(-s);
            const Scalar r = y - mu;
            d_mu(t, b) = -w * prec * r;
            d_s(t, b) = w * Scalar(0.5) * (Scalar(1) - prec * r * r);
        }

    if (grad) {
        *grad = LstmParams<Scalar>::zeros(H, params.input);
        Matrix<Scalar> dh_next = Matrix<Scalar>::Zero(H, B);
        Matrix<Scalar> dc_next = Matrix<Scalar>::Zero(H, B);
        Matrix<Scalar> dpre(4 * H, B), dh(H, B), dc(H, B);
        for (Index t = T - 1; t >= 0; --t) {
            const auto& gates = tape.gates[static_cast<std::size_t>(t)];
            const auto& h = tape.hidden[static_cast<std::size_t>(t)];
            const auto& tc = tape.cell_tanh[static_cast<std::size_t>(t)];
            const auto i = gates.middleRows(gate_input * H, H).array();
            const auto f = gates.middleRows(gate_forget * H, H).array();
            const auto g = gates.middleRows(gate_cell * H, H).array();
            const auto o = gates.middleRows(gate_output * H, H).array();

            grad->w_mean.noalias() += h * d_mu.row(t).transpose();
            grad->w_logvar.noalias() += h * d_s.row(t).transpose();
            grad->b_mean += d_mu.row(t).sum();
            grad->b_logvar += d_s.row(t).sum();

            dh = dh_next;
            dh.noalias() += params.w_mean * d_mu.row(t);
            dh.noalias() += params.w_logvar * d_s.row(t);

            dc = (dh.array() * o * (Scalar(1) - tc.array().square())).matrix() + dc_next;
            if (t > 0) {
                const auto& c_prev = tape.cell[static_cast<std::size_t>(t - 1)];
                dpre.middleRows(gate_forget * H, H) = (dc.array() * c_prev.array() * f * (Scalar(1) - f)).matrix();
            } else {
                dpre.middleRows(gate_forget * H, H).setZero();
            }
            dpre.middleRows(gate_input * H, H) = (dc.array() * g * i * (Scalar(1) - i)).matrix();
            dpre.middleRows(gate_cell * H, H) = (dc.array() * i * (Scalar(1) - g.square())).matrix();
            dpre.middleRows(gate_output * H, H) = (dh.array() * tc.array() * o * (Scalar(1) - o)).matrix();
            dc_next = (dc.array() * f).matrix();

            grad->w_input.noalias() += dpre * tape.masked_input[static_cast<std::size_t>(t)].transpose();
            grad->w_recurrent.noalias() += dpre * tape.masked_hidden[static_cast<std::size_t>(t)].transpose();
            grad->bias += dpre.rowwise().sum();
            dh_next.noalias() = params.w_recurrent.transpose() * dpre;
            dh_next = dh_next.cwiseProduct(batch.masks.recurrent);
        }
    }
    return {static_cast<double>(total), n_total};
}

namespace detail {
template <class Scalar>
WindowBatch<Scalar> single_window(const DropoutMasks<Scalar>& masks, const Eigen::Ref<const Matrix<std::type_identity_t<Scalar>>>& x,
                                  const Eigen::Ref<const Vector<std::type_identity_t<Scalar>>>& y, const MaskVector& observed) {
    if (y.size() != x.rows() || observed.size() != x.rows())
        throw Error(ErrorKind::precondition, "targets, mask and inputs must have equal length");
    if (observed.count() == 0) throw Error(ErrorKind::precondition, "no observed steps");
    WindowBatch<Scalar> batch;
    batch.inputs.push_back(x);
    batch.targets = y;
    batch.observed = observed;
    batch.masks = MaskBatch<Scalar>{masks.input, masks.recurrent};
    return batch;
}
}  // namespace detail

/// Mean NLL over the observed steps of one sequence.
template <class Scalar = double>
LossValue sequence_loss(const LstmParams<Scalar>& params, const DropoutMasks<Scalar>& masks,
                        const Eigen::Ref<const Matrix<std::type_identity_t<Scalar>>>& x, const Eigen::Ref<const Vector<std::type_identity_t<Scalar>>>& y,
                        const MaskVector& observed) {
    return batch_loss(params, detail::single_window(masks, x, y, observed));
}

/// Exact gradient of sequence_loss with respect to every parameter.
template <class Scalar = double>
LstmParams<Scalar> gradient(const LstmParams<Scalar>& params, const DropoutMasks<Scalar>& masks,
                            const Eigen::Ref<const Matrix<std::type_identity_t<Scalar>>>& x, const Eigen::Ref<const Vector<std::type_identity_t<Scalar>>>& y,
                            const MaskVector& observed) {
    LstmParams<Scalar> grad;
    batch_loss(params, detail::single_window(masks, x, y, observed), &grad);
    return grad;
}

/// Scales `g` in place so its Euclidean norm is at most max_norm; returns the norm before clipping.
template <class Scalar>
Scalar clip_global_norm(Vector<Scalar>& g, Scalar max_norm) {
    const Scalar norm = g.norm();
    if (norm > max_norm) g *= max_norm / norm;
    return norm;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction over a flat parameter vector.
template <class Scalar = double>
class Adam {
public:
    Adam(Index n, AdamConfig config) : config_(config), m_(Vector<Scalar>::Zero(n)), v_(Vector<Scalar>::Zero(n)) {}

    void step(Vector<Scalar>& theta, const Vector<Scalar>& grad) {
        ++t_;
        const Scalar b1 = static_cast<Scalar>(config_.beta1), b2 = static_cast<Scalar>(config_.beta2);
        m_ = b1 * m_ + (Scalar(1) - b1) * grad;
        v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseAbs2();
        const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
        const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
        const Scalar lr = static_cast<Scalar>(config_.learning_rate);
        theta.array() -= lr * (m_.array() / c1) /
                         ((v_.array() / c2).sqrt() + static_cast<Scalar>(config_.epsilon));
    }
    long steps() const { return t_; }

private:
    AdamConfig config_;
    Vector<Scalar> m_, v_;
    long t_ = 0;
};

struct TrainConfig {
    Index hidden = 32;
    Index window = 30;              // rho
    Index batch_size = 32;
    Index epochs = 80;
    Index batches_per_epoch = 0;    // 0: cells * train steps / (window * batch), at least 1
    AdamConfig adam;
    double clip_norm = 5.0;
    double dropout = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochLog {
    Index epoch = 0;
    double mean_loss = 0.0;
    double wall_time = 0.0;  // seconds since fit() started
};

struct FitResult {
    LstmParams<double> params;
    std::vector<EpochLog> log;
};

/// Adam over randomly drawn (cell, start) windows of the training view, with dropout
/// masks resampled per window. Deterministic given config.seed.
FitResult fit(const TrainView& train, const Normalizer& normalizer, const TrainConfig& config);

/// Batches drawn per epoch for a given view.
Index batches_per_epoch(const DatasetView& view, const TrainConfig& config);

}  // namespace smuq
