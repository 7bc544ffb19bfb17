#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <type_traits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gatenet/ndcore.hpp"

namespace gatenet {

enum class Mode
{
    Train,
    Eval,
};

struct MlpConfig
{
    Eigen::Index input_size = 1024;
    std::vector<Eigen::Index> hidden_sizes{256, 128};
    Eigen::Index output_size = 10;
    double dropout_rate = 0.5;

    /// input, hidden..., output
    std::vector<Eigen::Index> layer_sizes() const
    {
        std::vector<Eigen::Index> sizes{input_size};
        sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
        sizes.push_back(output_size);
        return sizes;
    }

    void validate() const
    {
        for (auto n : layer_sizes())
            if (n < 1)
                throw ArgumentError("MlpConfig: every layer size must be at least 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw ArgumentError("MlpConfig: dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
    }
};

template <typename Scalar>
struct DenseLayer
{
    Tensor<Scalar> weight;  // fan_in x fan_out
    Tensor<Scalar> bias;    // 1 x fan_out
};

/// Weights and biases of every dense layer; the part of the model shared by
/// all tasks.
template <typename Scalar>
struct BaseParams
{
    std::vector<DenseLayer<Scalar>> layers;

    /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    static BaseParams init(const MlpConfig& config, RngStream& rng)
    {
        config.validate();
        const auto sizes = config.layer_sizes();
        BaseParams params;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(sizes[l]));
            params.layers.push_back({uniform_init<Scalar>(rng, sizes[l], sizes[l + 1], -bound, bound),
                                     Tensor<Scalar>::Zero(1, sizes[l + 1])});
        }
        return params;
    }

    static BaseParams zeros(const MlpConfig& config)
    {
        config.validate();
        const auto sizes = config.layer_sizes();
        BaseParams params;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
            params.layers.push_back(
                {Tensor<Scalar>::Zero(sizes[l], sizes[l + 1]), Tensor<Scalar>::Zero(1, sizes[l + 1])});
        return params;
    }

    std::vector<Eigen::Index> layer_sizes() const
    {
        std::vector<Eigen::Index> sizes;
        if (layers.empty())
            return sizes;
        sizes.push_back(layers.front().weight.rows());
        for (const auto& layer : layers)
            sizes.push_back(layer.weight.cols());
        return sizes;
    }

    std::vector<Eigen::Index> hidden_sizes() const
    {
        auto sizes = layer_sizes();
        if (sizes.size() < 2)
            return {};
        return {sizes.begin() + 1, sizes.end() - 1};
    }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& layer : layers)
            n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
        return n;
    }

    /// Layer-major: weight then bias of layer 1, then layer 2, ...
    std::vector<Tensor<Scalar>*> tensors()
    {
        std::vector<Tensor<Scalar>*> out;
        for (auto& layer : layers) {
            out.push_back(&layer.weight);
            out.push_back(&layer.bias);
        }
        return out;
    }

    std::vector<const Tensor<Scalar>*> tensors() const
    {
        std::vector<const Tensor<Scalar>*> out;
        for (const auto& layer : layers) {
            out.push_back(&layer.weight);
            out.push_back(&layer.bias);
        }
        return out;
    }

    template <typename To>
    BaseParams<To> cast() const
    {
        BaseParams<To> out;
        for (const auto& layer : layers)
            out.layers.push_back({layer.weight.template cast<To>(), layer.bias.template cast<To>()});
        return out;
    }
};

/// One task's gate biases, one 1 x N_h row per hidden layer.
template <typename Scalar>
using GateSlice = std::span<const Tensor<Scalar>>;

/// Per-task, per-hidden-layer gate biases.
template <typename Scalar>
struct GateBank
{
    std::vector<std::string> tasks;
    std::vector<std::vector<Tensor<Scalar>>> biases;  // [task][hidden layer]

    /// All-zero biases, so every gate starts at sigma(0) = 0.5.
    static GateBank zeros(std::vector<std::string> tasks, std::span<const Eigen::Index> hidden_sizes)
    {
        GateBank bank;
        bank.tasks = std::move(tasks);
        for (std::size_t t = 0; t < bank.tasks.size(); ++t) {
            std::vector<Tensor<Scalar>> layers;
            for (auto width : hidden_sizes)
                layers.push_back(Tensor<Scalar>::Zero(1, width));
            bank.biases.push_back(std::move(layers));
        }
        return bank;
    }

    std::size_t task_index(std::string_view task) const
    {
        for (std::size_t t = 0; t < tasks.size(); ++t)
            if (tasks[t] == task)
                return t;
        std::string known;
        for (const auto& t : tasks)
            known += (known.empty() ? "" : ", ") + t;
        throw UnknownTaskError("unknown task '" + std::string(task) + "' (gate bank holds: " + known + ")");
    }

    GateSlice<Scalar> slice(std::size_t task) const { return biases.at(task); }
    GateSlice<Scalar> slice(std::string_view task) const { return biases.at(task_index(task)); }

    std::size_t per_task_count() const
    {
        std::size_t n = 0;
        if (!biases.empty())
            for (const auto& b : biases.front())
                n += static_cast<std::size_t>(b.size());
        return n;
    }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& task : biases)
            for (const auto& b : task)
                n += static_cast<std::size_t>(b.size());
        return n;
    }
};

template <typename Scalar>
Scalar sigmoid(Scalar x)
{
    if (x >= Scalar(0))
        return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

namespace detail {

template <typename DerivedA, typename DerivedB>
void check_gate_widths(const char* op, const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    if (b.rows() != 1 || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": activations " + shape_string(a.rows(), a.cols()) +
                             " do not match gate biases " + shape_string(b.rows(), b.cols()));
}

/// Sum of rows in increasing row order.
template <typename Derived>
Tensor<typename Derived::Scalar> column_sums(const Eigen::MatrixBase<Derived>& x)
{
    Tensor<typename Derived::Scalar> out = Tensor<typename Derived::Scalar>::Zero(1, x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out.row(0) += x.row(i);
    return out;
}

}  // namespace detail

/// Gate output g = a * sigma(b). `a` is batch x width; the 1 x width bias row
/// is shared by every row of the batch.
template <typename DerivedA, typename DerivedB>
Tensor<typename DerivedA::Scalar> gate_forward(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    detail::check_gate_widths("gate_forward", a, b);
    const Tensor<Scalar> factor = b.unaryExpr([](Scalar v) { return sigmoid(v); });
    return a.array().rowwise() * factor.row(0).array();
}

template <typename Scalar>
struct GateGrads
{
    Tensor<Scalar> grad_a;  // batch x width
    Tensor<Scalar> grad_b;  // 1 x width, summed over the batch
};

/// dg/da = sigma(b), dg/db = a * sigma(b) * (1 - sigma(b)).
template <typename DerivedU, typename DerivedA, typename DerivedB>
GateGrads<typename DerivedU::Scalar> gate_backward(const Eigen::MatrixBase<DerivedU>& upstream,
                                                   const Eigen::MatrixBase<DerivedA>& a,
                                                   const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedU::Scalar;
    detail::check_gate_widths("gate_backward", a, b);
    if (upstream.rows() != a.rows() || upstream.cols() != a.cols())
        throw DimensionError("gate_backward: upstream " + shape_string(upstream.rows(), upstream.cols()) +
                             " does not match activations " + shape_string(a.rows(), a.cols()));
    const Tensor<Scalar> factor = b.unaryExpr([](Scalar v) { return sigmoid(v); });
    const Tensor<Scalar> slope = factor.array() * (Scalar(1) - factor.array());
    GateGrads<Scalar> grads;
    grads.grad_a = upstream.array().rowwise() * factor.row(0).array();
    const Tensor<Scalar> per_row = (upstream.array() * a.array()).rowwise() * slope.row(0).array();
    grads.grad_b = detail::column_sums(per_row);
    return grads;
}

template <typename Derived>
Tensor<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& x)
{
    return x.cwiseMax(typename Derived::Scalar(0));
}

/// upstream * 1[pre > 0]
template <typename DerivedU, typename DerivedX>
Tensor<typename DerivedU::Scalar> relu_backward(const Eigen::MatrixBase<DerivedU>& upstream,
                                                const Eigen::MatrixBase<DerivedX>& pre)
{
    using Scalar = typename DerivedU::Scalar;
    if (upstream.rows() != pre.rows() || upstream.cols() != pre.cols())
        throw DimensionError("relu_backward: upstream " + shape_string(upstream.rows(), upstream.cols()) +
                             " does not match input " + shape_string(pre.rows(), pre.cols()));
    return (pre.array() > Scalar(0)).select(upstream, Scalar(0));
}

template <typename Scalar>
struct DropoutResult
{
    Tensor<Scalar> out;
    /// 0 for dropped units, 1/(1 - rate) for kept ones; all ones in eval mode.
    Tensor<Scalar> mask;
};

/// Inverted dropout: in train mode each unit is kept with probability
/// 1 - rate and rescaled by 1/(1 - rate); eval mode is the identity.
/// Draws one float per element in row-major order.
template <typename Derived>
DropoutResult<typename Derived::Scalar> dropout(const Eigen::MatrixBase<Derived>& x, double rate, Mode mode,
                                                RngStream* rng)
{
    using Scalar = typename Derived::Scalar;
    if (!(rate >= 0.0 && rate < 1.0))
        throw ArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    DropoutResult<Scalar> result;
    if (mode == Mode::Eval || rate == 0.0) {
        result.out = x;
        result.mask = Tensor<Scalar>::Ones(x.rows(), x.cols());
        return result;
    }
    if (rng == nullptr)
        throw ArgumentError("dropout in train mode needs a random stream");
    const auto keep = static_cast<float>(1.0 - rate);
    const Scalar scale = Scalar(1) / static_cast<Scalar>(1.0 - rate);
    result.mask.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < result.mask.size(); ++i)
        result.mask.data()[i] = rng->next_float() < keep ? scale : Scalar(0);
    result.out = x.cwiseProduct(result.mask);
    return result;
}

/// Row-wise x - logsumexp(x), with the row maximum subtracted first.
template <typename Derived>
Tensor<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    Tensor<Scalar> out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Scalar peak = x.row(i).maxCoeff();
        Scalar total = 0;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            total += std::exp(x(i, j) - peak);
        const Scalar lse = peak + std::log(total);
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            out(i, j) = x(i, j) - lse;
    }
    return out;
}

/// Gradient through log_softmax given its output: g - softmax * rowsum(g).
template <typename DerivedG, typename DerivedL>
Tensor<typename DerivedG::Scalar> log_softmax_backward(const Eigen::MatrixBase<DerivedG>& grad_logp,
                                                       const Eigen::MatrixBase<DerivedL>& logp)
{
    using Scalar = typename DerivedG::Scalar;
    Tensor<Scalar> out(logp.rows(), logp.cols());
    for (Eigen::Index i = 0; i < logp.rows(); ++i) {
        Scalar total = 0;
        for (Eigen::Index j = 0; j < logp.cols(); ++j)
            total += grad_logp(i, j);
        for (Eigen::Index j = 0; j < logp.cols(); ++j)
            out(i, j) = grad_logp(i, j) - std::exp(logp(i, j)) * total;
    }
    return out;
}

template <typename Scalar>
struct HiddenTrace
{
    Tensor<Scalar> input;        // layer input
    Tensor<Scalar> pre;          // dense output
    Tensor<Scalar> activation;   // relu(pre)
    Tensor<Scalar> gate_factor;  // 1 x width sigma(b); empty when ungated
    Tensor<Scalar> mask;         // dropout mask
};

/// Everything backward() needs; populated only by train-mode forward passes.
template <typename Scalar>
struct ForwardTrace
{
    bool training = false;
    bool gated = false;
    std::vector<HiddenTrace<Scalar>> hidden;
    Tensor<Scalar> output_input;  // input of the output layer
    Tensor<Scalar> logp;
};

template <typename Scalar>
struct ForwardResult
{
    Tensor<Scalar> logp;
    ForwardTrace<Scalar> trace;
};

/// Per hidden layer: dense -> ReLU -> gate (when a slice is given) -> dropout
/// (train mode); then dense -> log_softmax. Rows are processed independently.
template <typename Scalar>
ForwardResult<Scalar> forward(const BaseParams<Scalar>& params, std::type_identity_t<std::optional<GateSlice<Scalar>>> gates,
                              const std::type_identity_t<Tensor<Scalar>>& x, Mode mode, double dropout_rate, RngStream* rng)
{
    if (params.layers.empty())
        throw ArgumentError("forward: network has no layers");
    const std::size_t hidden_count = params.layers.size() - 1;
    if (x.cols() != params.layers.front().weight.rows())
        throw DimensionError("forward: input " + shape_string(x.rows(), x.cols()) + " does not match first layer " +
                             shape_string(params.layers.front().weight.rows(), params.layers.front().weight.cols()));
    if (gates && gates->size() != hidden_count)
        throw DimensionError("forward: gate slice has " + std::to_string(gates->size()) + " layers, network has " +
                             std::to_string(hidden_count) + " hidden layers");

    ForwardResult<Scalar> result;
    auto& trace = result.trace;
    trace.training = (mode == Mode::Train);
    trace.gated = gates.has_value();

    Tensor<Scalar> h = x;
    for (std::size_t l = 0; l < hidden_count; ++l) {
        const auto& layer = params.layers[l];
        Tensor<Scalar> pre = matmul(h, layer.weight);
        pre.array().rowwise() += layer.bias.row(0).array();
        Tensor<Scalar> act = relu(pre);

        Tensor<Scalar> factor;
        Tensor<Scalar> gated;
        if (gates) {
            const auto& b = (*gates)[l];
            detail::check_gate_widths("forward", act, b);
            factor = b.unaryExpr([](Scalar v) { return sigmoid(v); });
            gated = act.array().rowwise() * factor.row(0).array();
        }
        auto dropped = dropout(gates ? gated : act, dropout_rate, mode, rng);

        if (trace.training)
            trace.hidden.push_back({std::move(h), std::move(pre), std::move(act), std::move(factor),
                                    std::move(dropped.mask)});
        h = std::move(dropped.out);
    }

    const auto& out_layer = params.layers.back();
    Tensor<Scalar> logits = matmul(h, out_layer.weight);
    logits.array().rowwise() += out_layer.bias.row(0).array();
    result.logp = log_softmax(logits);
    if (trace.training) {
        trace.output_input = std::move(h);
        trace.logp = result.logp;
    }
    return result;
}

/// Gated forward pass with the slice of `task` from `bank`.
template <typename Scalar>
ForwardResult<Scalar> forward(const BaseParams<Scalar>& params, const GateBank<Scalar>& bank, std::string_view task,
                              const std::type_identity_t<Tensor<Scalar>>& x, Mode mode, double dropout_rate, RngStream* rng)
{
    return forward(params, std::optional<GateSlice<Scalar>>(bank.slice(task)), x, mode, dropout_rate, rng);
}

/// Which parameters a backward pass produces gradients for.
enum class Trainable
{
    Base,   // dense weights and biases
    Gates,  // the active task's gate biases only
    All,
};

template <typename Scalar>
struct Gradients
{
    std::vector<DenseLayer<Scalar>> dense;  // empty unless Base/All
    std::vector<Tensor<Scalar>> gates;      // empty unless Gates/All on a gated trace
};

/// Reverse pass over a train-mode trace. Dropout masks recorded in the trace
/// are reused as-is.
template <typename Scalar>
Gradients<Scalar> backward(const ForwardTrace<Scalar>& trace, const BaseParams<Scalar>& params,
                           std::type_identity_t<std::optional<GateSlice<Scalar>>> gates, const std::type_identity_t<Tensor<Scalar>>& grad_logp,
                           Trainable which)
{
    if (!trace.training)
        throw MissingTraceError("backward: trace comes from an eval-mode forward pass and holds no activations");
    if (trace.gated != gates.has_value())
        throw ArgumentError("backward: gate slice presence differs from the forward pass");
    if (which == Trainable::Gates && !gates)
        throw ArgumentError("backward: gate gradients requested for an ungated pass");

    const bool want_dense = which != Trainable::Gates;
    const bool want_gates = which != Trainable::Base && gates.has_value();
    const std::size_t hidden_count = trace.hidden.size();

    Gradients<Scalar> grads;
    if (want_dense)
        grads.dense.resize(params.layers.size());
    if (want_gates)
        grads.gates.resize(hidden_count);

    if (grad_logp.rows() != trace.logp.rows() || grad_logp.cols() != trace.logp.cols())
        throw DimensionError("backward: upstream gradient " + shape_string(grad_logp.rows(), grad_logp.cols()) +
                             " does not match output " + shape_string(trace.logp.rows(), trace.logp.cols()));
    Tensor<Scalar> grad = log_softmax_backward(grad_logp, trace.logp);
    const auto& out_layer = params.layers.back();
    if (want_dense) {
        grads.dense.back().weight = matmul(trace.output_input.transpose(), grad);
        grads.dense.back().bias = detail::column_sums(grad);
    }
    grad = matmul(grad, out_layer.weight.transpose());

    for (std::size_t l = hidden_count; l-- > 0;) {
        const auto& step = trace.hidden[l];
        Tensor<Scalar> grad_gated = grad.cwiseProduct(step.mask);
        Tensor<Scalar> grad_act;
        if (gates) {
            auto gate_grads = gate_backward(grad_gated, step.activation, (*gates)[l]);
            grad_act = std::move(gate_grads.grad_a);
            if (want_gates)
                grads.gates[l] = std::move(gate_grads.grad_b);
        } else {
            grad_act = std::move(grad_gated);
        }
        const Tensor<Scalar> grad_pre = relu_backward(grad_act, step.pre);
        if (want_dense) {
            grads.dense[l].weight = matmul(step.input.transpose(), grad_pre);
            grads.dense[l].bias = detail::column_sums(grad_pre);
        }
        if (l > 0)
            grad = matmul(grad_pre, params.layers[l].weight.transpose());
    }
    return grads;
}

/// Row-wise argmax; ties go to the lowest index.
template <typename Derived>
std::vector<int> predict(const Eigen::MatrixBase<Derived>& logp)
{
    std::vector<int> out(static_cast<std::size_t>(logp.rows()));
    for (Eigen::Index i = 0; i < logp.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < logp.cols(); ++j)
            if (logp(i, j) > logp(i, best))
                best = j;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace gatenet
