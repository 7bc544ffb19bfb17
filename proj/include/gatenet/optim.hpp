#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gatenet/nn.hpp"

namespace gatenet {

template <typename Scalar>
struct NllResult
{
    double loss = 0.0;
    Tensor<Scalar> grad_logp;
};

/// Mean negative log-likelihood of the labelled entries of `logp`.
/// The gradient is -1/batch at each (row, label) and zero elsewhere.
template <typename Derived>
NllResult<typename Derived::Scalar> nll_loss(const Eigen::MatrixBase<Derived>& logp, std::span<const int> labels)
{
    using Scalar = typename Derived::Scalar;
    if (static_cast<Eigen::Index>(labels.size()) != logp.rows())
        throw DimensionError("nll_loss: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(logp.rows()) + " rows");
    if (labels.empty())
        throw EmptyDatasetError("nll_loss: empty batch");
    NllResult<Scalar> result;
    result.grad_logp = Tensor<Scalar>::Zero(logp.rows(), logp.cols());
    const Scalar weight = Scalar(-1) / static_cast<Scalar>(labels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= logp.cols())
            throw LabelError(i, y);
        const auto row = static_cast<Eigen::Index>(i);
        total -= static_cast<double>(logp(row, y));
        result.grad_logp(row, y) = weight;
    }
    result.loss = total / static_cast<double>(labels.size());
    return result;
}

struct RmspropOptions
{
    double lr = 1e-2;
    double rho = 0.99;
    double eps = 1e-8;
};

/// Squared-gradient moving averages, one per trainable tensor. Shapes are
/// fixed by the first step.
template <typename Scalar>
struct RmspropState
{
    RmspropOptions options;
    std::vector<Tensor<Scalar>> v;
};

/// Plain (non-centered, no momentum) RMSprop:
///   v <- rho * v + (1 - rho) * g^2
///   theta <- theta - lr * g / (sqrt(v) + eps)
template <typename Scalar>
void rmsprop_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
                  RmspropState<Scalar>& state)
{
    if (params.size() != grads.size())
        throw DimensionError("rmsprop_step: " + std::to_string(params.size()) + " parameters but " +
                             std::to_string(grads.size()) + " gradients");
    if (state.v.empty())
        for (const auto* p : params)
            state.v.push_back(Tensor<Scalar>::Zero(p->rows(), p->cols()));
    if (state.v.size() != params.size())
        throw DimensionError("rmsprop_step: optimizer state tracks " + std::to_string(state.v.size()) +
                             " tensors, got " + std::to_string(params.size()));

    const auto lr = static_cast<Scalar>(state.options.lr);
    const auto rho = static_cast<Scalar>(state.options.rho);
    const auto eps = static_cast<Scalar>(state.options.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        const auto& g = *grads[i];
        auto& v = state.v[i];
        if (p.rows() != g.rows() || p.cols() != g.cols() || v.rows() != p.rows() || v.cols() != p.cols())
            throw DimensionError("rmsprop_step: tensor " + std::to_string(i) + " has parameter " +
                                 shape_string(p.rows(), p.cols()) + ", gradient " + shape_string(g.rows(), g.cols()) +
                                 ", state " + shape_string(v.rows(), v.cols()));
        v.array() = rho * v.array() + (Scalar(1) - rho) * g.array().square();
        p.array() -= lr * g.array() / (v.array().sqrt() + eps);
    }
}

struct GradCheckOptions
{
    std::vector<Eigen::Index> layer_sizes{8, 4, 3};
    Eigen::Index batch = 5;
    double dropout_rate = 0.5;
    double step = 1e-4;
    double tolerance = 1e-3;
    std::uint64_t seed = 7;
    /// When set, this offset is added to one analytic gradient entry of the
    /// named path ("dense" or "gate") to prove the harness notices.
    std::optional<std::string> corrupt_path;
    double corrupt_offset = 1e-2;
};

struct GradCheckEntry
{
    std::string path;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // perturbation crossed a ReLU kink
    bool passed = false;
};

struct GradCheckReport
{
    std::vector<GradCheckEntry> entries;

    bool passed() const
    {
        for (const auto& e : entries)
            if (!e.passed)
                return false;
        return !entries.empty();
    }

    const GradCheckEntry& entry(const std::string& path) const;
};

/// |a - n| / max(|a|, |n|, 1e-7)
double relative_error(double analytic, double numeric);

/// Compares analytic gradients of a small gated network against 64-bit
/// central differences. Whole-network checks cover the dense and gate
/// parameters (with dropout active, masks replayed from a copied stream);
/// isolated checks cover relu, dropout, log_softmax and nll.
GradCheckReport finite_diff_check(const GradCheckOptions& options);

}  // namespace gatenet
