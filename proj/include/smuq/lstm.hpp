#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "smuq/error.hpp"
#include "smuq/types.hpp"

namespace smuq {

/// Row blocks of the stacked gate matrices, each `hidden` rows tall.
enum Gate : int { gate_input = 0, gate_forget = 1, gate_cell = 2, gate_output = 3 };

/// Single-layer LSTM with a two-unit head: predictive mean and log aleatoric variance.
template <class Scalar = double>
struct LstmParams {
    Index hidden = 0;
    Index input = 0;
    Matrix<Scalar> w_input;      // 4H x D, gate blocks ordered i, f, g, o
    Matrix<Scalar> w_recurrent;  // 4H x H
    Vector<Scalar> bias;         // 4H
    Vector<Scalar> w_mean;       // H
    Scalar b_mean = 0;
    Vector<Scalar> w_logvar;     // H
    Scalar b_logvar = 0;

    static LstmParams zeros(Index H, Index D) {
        LstmParams p;
        p.hidden = H;
        p.input = D;
        p.w_input = Matrix<Scalar>::Zero(4 * H, D);
        p.w_recurrent = Matrix<Scalar>::Zero(4 * H, H);
        p.bias = Vector<Scalar>::Zero(4 * H);
        p.w_mean = Vector<Scalar>::Zero(H);
        p.w_logvar = Vector<Scalar>::Zero(H);
        return p;
    }

    Index size() const { return 4 * hidden * (input + hidden + 1) + 2 * hidden + 2; }

    /// Parameters in a fixed order: w_input, w_recurrent, bias, w_mean, b_mean, w_logvar, b_logvar.
    Vector<Scalar> flatten() const {
        Vector<Scalar> v(size());
        Index k = 0;
        auto put = [&](const auto& m) {
            v.segment(k, m.size()) = m.reshaped();
            k += m.size();
        };
        put(w_input);
        put(w_recurrent);
        put(bias);
        put(w_mean);
        v(k++) = b_mean;
        put(w_logvar);
        v(k++) = b_logvar;
        return v;
    }

    void assign(const Vector<Scalar>& v) {
        if (v.size() != size()) throw Error(ErrorKind::precondition, "parameter vector has the wrong length");
        Index k = 0;
        auto take = [&](auto& m) {
            m.reshaped() = v.segment(k, m.size());
            k += m.size();
        };
        take(w_input);
        take(w_recurrent);
        take(bias);
        take(w_mean);
        b_mean = v(k++);
        take(w_logvar);
        b_logvar = v(k++);
    }

    bool all_finite() const {
        return w_input.allFinite() && w_recurrent.allFinite() && bias.allFinite() && w_mean.allFinite() &&
               w_logvar.allFinite() && std::isfinite(b_mean) && std::isfinite(b_logvar);
    }

    bool shapes_valid() const {
        return hidden >= 1 && input >= 1 && w_input.rows() == 4 * hidden && w_input.cols() == input &&
               w_recurrent.rows() == 4 * hidden && w_recurrent.cols() == hidden && bias.size() == 4 * hidden &&
               w_mean.size() == hidden && w_logvar.size() == hidden;
    }

    template <class Other>
    LstmParams<Other> cast() const {
        LstmParams<Other> p;
        p.hidden = hidden;
        p.input = input;
        p.w_input = w_input.template cast<Other>();
        p.w_recurrent = w_recurrent.template cast<Other>();
        p.bias = bias.template cast<Other>();
        p.w_mean = w_mean.template cast<Other>();
        p.b_mean = static_cast<Other>(b_mean);
        p.w_logvar = w_logvar.template cast<Other>();
        p.b_logvar = static_cast<Other>(b_logvar);
        return p;
    }

    friend bool operator==(const LstmParams& a, const LstmParams& b) {
        return a.hidden == b.hidden && a.input == b.input && a.flatten() == b.flatten();
    }
};

/// Uniform weights in [-1/sqrt(H), 1/sqrt(H)] (recurrent, head) and [-1/sqrt(D), 1/sqrt(D)]
/// (input); forget-gate bias 1, all other biases 0.
template <class Scalar = double>
LstmParams<Scalar> init_params(Index H, Index D, std::uint64_t seed) {
    if (H < 1 || D < 1) throw Error(ErrorKind::precondition, "hidden and input sizes must be at least 1");
    std::mt19937_64 rng(seed);
    auto fill = [&](auto& m, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Index j = 0; j < m.cols(); ++j)
            for (Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(u(rng));
    };
    auto p = LstmParams<Scalar>::zeros(H, D);
    const double bh = 1.0 / std::sqrt(static_cast<double>(H));
    const double bd = 1.0 / std::sqrt(static_cast<double>(D));
    fill(p.w_input, bd);
    fill(p.w_recurrent, bh);
    fill(p.w_mean, bh);
    fill(p.w_logvar, bh);
    p.bias.segment(gate_forget * H, H).setOnes();
    return p;
}

/// Variational dropout masks: held fixed over every step of one sequence.
template <class Scalar = double>
struct DropoutMasks {
    Vector<Scalar> input;      // D, entries in {0, 1/(1-p)}
    Vector<Scalar> recurrent;  // H
    double rate = 0.0;

    static DropoutMasks identity(Index D, Index H) {
        return {Vector<Scalar>::Ones(D), Vector<Scalar>::Ones(H), 0.0};
    }
};

inline void check_dropout_rate(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorKind::precondition, "dropout rate must lie in [0, 1)");
}

/// Inverted dropout masks drawn from a generator; p = 0 consumes no draws.
template <class Scalar = double, class Rng>
DropoutMasks<Scalar> sample_masks(double p, Index D, Index H, Rng& rng) {
    check_dropout_rate(p);
    auto masks = DropoutMasks<Scalar>::identity(D, H);
    masks.rate = p;
    if (p == 0.0) return masks;
    const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - p));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index i = 0; i < D; ++i) masks.input(i) = u(rng) < p ? Scalar(0) : keep;
    for (Index i = 0; i < H; ++i) masks.recurrent(i) = u(rng) < p ? Scalar(0) : keep;
    return masks;
}

template <class Scalar = double>
DropoutMasks<Scalar> sample_masks(double p, Index D, Index H, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_masks<Scalar>(p, D, H, rng);
}

/// Masks for B sequences evaluated side by side, one column per sequence.
template <class Scalar = double>
struct MaskBatch {
    Matrix<Scalar> input;      // D x B
    Matrix<Scalar> recurrent;  // H x B

    static MaskBatch from(std::span<const DropoutMasks<Scalar>> masks) {
        const Index B = static_cast<Index>(masks.size());
        if (B == 0) throw Error(ErrorKind::precondition, "empty mask batch");
        MaskBatch batch{Matrix<Scalar>(masks[0].input.size(), B), Matrix<Scalar>(masks[0].recurrent.size(), B)};
        for (Index b = 0; b < B; ++b) {
            batch.input.col(b) = masks[b].input;
            batch.recurrent.col(b) = masks[b].recurrent;
        }
        return batch;
    }
    Index size() const { return input.cols(); }
};

template <class Scalar = double>
struct StepOutput {
    Scalar mu;       // predicted target, normalized units
    Scalar log_var;  // log of the aleatoric variance, normalized units squared
};

template <class Scalar = double>
struct LstmState {
    Vector<Scalar> h;
    Vector<Scalar> c;
};

template <class Scalar = double>
struct ForwardResult {
    std::vector<StepOutput<Scalar>> outputs;
    LstmState<Scalar> final_state;
};

/// Head outputs of B sequences: row t, column b.
template <class Scalar = double>
struct BatchOutput {
    Matrix<Scalar> mu;
    Matrix<Scalar> log_var;
};

/// Activations recorded by a forward pass, consumed by backpropagation.
template <class Scalar = double>
struct ForwardTape {
    std::vector<Matrix<Scalar>> masked_input;   // per step, D x B
    std::vector<Matrix<Scalar>> masked_hidden;  // per step, H x B (masked h_{t-1})
    std::vector<Matrix<Scalar>> gates;          // per step, 4H x B after nonlinearity
    std::vector<Matrix<Scalar>> cell;           // per step, c_t
    std::vector<Matrix<Scalar>> cell_tanh;      // per step, tanh(c_t)
    std::vector<Matrix<Scalar>> hidden;         // per step, h_t
};

namespace detail {

/// Logistic function in place, vectorized through exp. Accepts blocks and plain matrices.
template <class Xpr>
void sigmoid_inplace(Xpr&& z) {
    using Scalar = typename std::decay_t<Xpr>::Scalar;
    z.array() = Scalar(1) / (Scalar(1) + (-z.array()).exp());
}

/// tanh(z) = 1 - 2 / (exp(2z) + 1), vectorized through exp; exact at 0.
template <class Xpr>
void tanh_inplace(Xpr&& z) {
    using Scalar = typename std::decay_t<Xpr>::Scalar;
    z.array() = Scalar(1) - Scalar(2) / ((Scalar(2) * z.array()).exp() + Scalar(1));
}

/// Runs the recursion over T steps. `input_at(t)` yields the D x B unmasked input at step t.
/// With a tape, every intermediate is recorded.
template <class Scalar, class InputAt>
BatchOutput<Scalar> run(const LstmParams<Scalar>& params, const MaskBatch<Scalar>& masks, Index T,
                        InputAt&& input_at, ForwardTape<Scalar>* tape, LstmState<Scalar>* last = nullptr) {
    const Index H = params.hidden;
    const Index B = masks.size();
    if (!params.shapes_valid()) throw Error(ErrorKind::precondition, "inconsistent parameter shapes");
    if (masks.input.rows() != params.input || masks.recurrent.rows() != H || masks.recurrent.cols() != B)
        throw Error(ErrorKind::precondition, "dropout masks do not match parameter shapes");

    BatchOutput<Scalar> out{Matrix<Scalar>(T, B), Matrix<Scalar>(T, B)};
    Matrix<Scalar> h = Matrix<Scalar>::Zero(H, B);
    Matrix<Scalar> c = Matrix<Scalar>::Zero(H, B);
    Matrix<Scalar> pre(4 * H, B), xin(params.input, B), hin(H, B);
    if (tape) {
        *tape = {};
        for (auto* v : {&tape->masked_input, &tape->masked_hidden, &tape->gates, &tape->cell, &tape->cell_tanh,
                        &tape->hidden})
            v->reserve(static_cast<std::size_t>(T));
    }
    for (Index t = 0; t < T; ++t) {
        xin = masks.input.cwiseProduct(input_at(t));
        hin = masks.recurrent.cwiseProduct(h);
        pre.noalias() = params.w_input * xin;
        pre.noalias() += params.w_recurrent * hin;
        pre.colwise() += params.bias;

        sigmoid_inplace(pre.topRows(2 * H));
        tanh_inplace(pre.middleRows(gate_cell * H, H));
        sigmoid_inplace(pre.bottomRows(H));
        const auto i = pre.middleRows(gate_input * H, H);
        const auto f = pre.middleRows(gate_forget * H, H);
        const auto g = pre.middleRows(gate_cell * H, H);
        const auto o = pre.middleRows(gate_output * H, H);

        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        Matrix<Scalar> tc = c;
        tanh_inplace(tc);
        h = o.cwiseProduct(tc);

        out.mu.row(t).noalias() = params.w_mean.transpose() * h;
        out.log_var.row(t).noalias() = params.w_logvar.transpose() * h;
        out.mu.row(t).array() += params.b_mean;
        out.log_var.row(t).array() += params.b_logvar;

        if (tape) {
            tape->masked_input.push_back(xin);
            tape->masked_hidden.push_back(hin);
            tape->gates.push_back(pre);
            tape->cell.push_back(c);
            tape->cell_tanh.push_back(std::move(tc));
            tape->hidden.push_back(h);
        }
    }
    if (last) {
        last->h = h.col(B - 1);
        last->c = c.col(B - 1);
    }
    return out;
}

}  // namespace detail

/// B independent sequences (each T x D) evaluated together, sequence b under mask column b.
template <class Scalar = double>
BatchOutput<Scalar> forward_batch(const LstmParams<Scalar>& params, const MaskBatch<Scalar>& masks,
                                  std::span<const Matrix<Scalar>> sequences, ForwardTape<Scalar>* tape = nullptr) {
    const Index B = static_cast<Index>(sequences.size());
    if (B != masks.size()) throw Error(ErrorKind::precondition, "one mask column per sequence required");
    const Index T = sequences[0].rows();
    for (const auto& x : sequences)
        if (x.rows() != T || x.cols() != params.input)
            throw Error(ErrorKind::precondition, "sequence shape does not match the model input");
    Matrix<Scalar> step(params.input, B);
    return detail::run(params, masks, T, [&](Index t) -> const Matrix<Scalar>& {
        for (Index b = 0; b < B; ++b) step.col(b) = sequences[b].row(t).transpose();
        return step;
    }, tape);
}

/// One input sequence evaluated under every mask column: an MC dropout ensemble.
template <class Scalar = double>
BatchOutput<Scalar> forward_ensemble(const LstmParams<Scalar>& params, const MaskBatch<Scalar>& masks,
                                     const Eigen::Ref<const Matrix<std::type_identity_t<Scalar>>>& x) {
    if (x.cols() != params.input) throw Error(ErrorKind::precondition, "input width does not match the model");
    return detail::run(params, masks, x.rows(), [&](Index t) {
        return x.row(t).transpose().replicate(1, masks.size());
    }, static_cast<ForwardTape<Scalar>*>(nullptr));
}

/// Standard LSTM recursion from zero state with step-constant dropout masks.
template <class Scalar = double>
ForwardResult<Scalar> forward(const LstmParams<Scalar>& params, const DropoutMasks<Scalar>& masks,
                              const Eigen::Ref<const Matrix<std::type_identity_t<Scalar>>>& x) {
    if (x.cols() != params.input) throw Error(ErrorKind::precondition, "input width does not match the model");
    const MaskBatch<Scalar> batch{masks.input, masks.recurrent};
    ForwardResult<Scalar> result;
    auto out = detail::run(params, batch, x.rows(), [&](Index t) { return x.row(t).transpose(); },
                           static_cast<ForwardTape<Scalar>*>(nullptr), &result.final_state);
    result.outputs.resize(static_cast<std::size_t>(x.rows()));
    for (Index t = 0; t < x.rows(); ++t) result.outputs[static_cast<std::size_t>(t)] = {out.mu(t, 0), out.log_var(t, 0)};
    return result;
}

template <class Scalar = double>
ForwardResult<Scalar> forward(const LstmParams<Scalar>& params, const Eigen::Ref<const Matrix<std::type_identity_t<Scalar>>>& x) {
    return forward(params, DropoutMasks<Scalar>::identity(params.input, params.hidden), x);
}

}  // namespace smuq
