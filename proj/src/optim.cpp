#include "gatenet/optim.hpp"

#include <algorithm>
#include <functional>

namespace gatenet {

const GradCheckEntry& GradCheckReport::entry(const std::string& path) const
{
    for (const auto& e : entries)
        if (e.path == path)
            return e;
    throw ArgumentError("gradient check report has no entry '" + path + "'");
}

double relative_error(double analytic, double numeric)
{
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    return std::abs(analytic - numeric) / scale;
}

namespace {

using ReluPattern = std::vector<bool>;

struct ToyNet
{
    BaseParams<double> params;
    GateBank<double> bank;
    TensorD x;
    std::vector<int> labels;
    double dropout_rate;
    RngStream dropout_rng{0};
};

struct Evaluation
{
    double loss;
    ReluPattern pattern;
};

Evaluation evaluate(const ToyNet& net, const BaseParams<double>& params, GateSlice<double> gates)
{
    RngStream rng = net.dropout_rng;
    auto result = forward(params, std::optional<GateSlice<double>>(gates), net.x, Mode::Train, net.dropout_rate, &rng);
    Evaluation e{nll_loss(result.logp, net.labels).loss, {}};
    for (const auto& h : result.trace.hidden)
        for (Eigen::Index i = 0; i < h.pre.size(); ++i)
            e.pattern.push_back(h.pre.data()[i] > 0.0);
    return e;
}

ToyNet make_toy(const GradCheckOptions& options)
{
    if (options.layer_sizes.size() < 3)
        throw ArgumentError("gradient check needs at least one hidden layer");
    RngStream root(options.seed);
    auto init_rng = root.child("init");

    ToyNet net;
    net.dropout_rate = options.dropout_rate;
    net.dropout_rng = root.child("dropout");
    const auto& sizes = options.layer_sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        net.params.layers.push_back({uniform_init<double>(init_rng, sizes[l], sizes[l + 1], -1.0, 1.0),
                                     uniform_init<double>(init_rng, 1, sizes[l + 1], -0.5, 0.5)});
    const std::vector<Eigen::Index> hidden(sizes.begin() + 1, sizes.end() - 1);
    net.bank = GateBank<double>::zeros({"first", "second"}, hidden);
    for (auto& task : net.bank.biases)
        for (auto& b : task)
            b = uniform_init<double>(init_rng, 1, b.cols(), -2.0, 2.0);
    net.x = uniform_init<double>(init_rng, options.batch, sizes.front(), -1.0, 1.0);
    for (Eigen::Index i = 0; i < options.batch; ++i)
        net.labels.push_back(static_cast<int>(init_rng.next_below(static_cast<std::uint64_t>(sizes.back()))));
    return net;
}

/// Central differences over every scalar of `target`, re-evaluating `loss`
/// after each perturbation. Perturbations that flip any ReLU are skipped.
void compare_tensor(TensorD& target, const TensorD& analytic, double step,
                    const std::function<Evaluation()>& loss, const ReluPattern& base_pattern, GradCheckEntry& entry)
{
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        const double original = target.data()[i];
        target.data()[i] = original + step;
        const auto plus = loss();
        target.data()[i] = original - step;
        const auto minus = loss();
        target.data()[i] = original;
        if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
            ++entry.skipped;
            continue;
        }
        const double numeric = (plus.loss - minus.loss) / (2.0 * step);
        entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic.data()[i], numeric));
        ++entry.checked;
    }
}

/// Gradient of a scalar function of one tensor, compared elementwise.
GradCheckEntry check_isolated(const std::string& path, TensorD x, const TensorD& analytic, double step,
                              const std::function<double(const TensorD&)>& f)
{
    GradCheckEntry entry{path};
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double original = x.data()[i];
        x.data()[i] = original + step;
        const double plus = f(x);
        x.data()[i] = original - step;
        const double minus = f(x);
        x.data()[i] = original;
        entry.max_rel_error =
            std::max(entry.max_rel_error, relative_error(analytic.data()[i], (plus - minus) / (2.0 * step)));
        ++entry.checked;
    }
    return entry;
}

void merge_into(GradCheckEntry& into, const GradCheckEntry& from)
{
    into.max_rel_error = std::max(into.max_rel_error, from.max_rel_error);
    into.checked += from.checked;
    into.skipped += from.skipped;
}

}  // namespace

GradCheckReport finite_diff_check(const GradCheckOptions& options)
{
    ToyNet net = make_toy(options);
    const std::size_t task = 0;
    const double h = options.step;

    // Analytic gradients from one train-mode pass.
    RngStream pass_rng = net.dropout_rng;
    auto result = forward(net.params, std::optional<GateSlice<double>>(net.bank.slice(task)), net.x, Mode::Train,
                          net.dropout_rate, &pass_rng);
    const auto loss = nll_loss(result.logp, net.labels);
    auto grads = backward(result.trace, net.params, std::optional<GateSlice<double>>(net.bank.slice(task)),
                          loss.grad_logp, Trainable::All);
    if (options.corrupt_path == "dense")
        grads.dense.front().weight(0, 0) += options.corrupt_offset;
    else if (options.corrupt_path == "gate")
        grads.gates.front()(0, 0) += options.corrupt_offset;

    const auto base_pattern = evaluate(net, net.params, net.bank.slice(task)).pattern;
    const auto reevaluate = [&] { return evaluate(net, net.params, net.bank.slice(task)); };

    GradCheckReport report;
    GradCheckEntry dense{"dense"};
    for (std::size_t l = 0; l < net.params.layers.size(); ++l) {
        compare_tensor(net.params.layers[l].weight, grads.dense[l].weight, h, reevaluate, base_pattern, dense);
        compare_tensor(net.params.layers[l].bias, grads.dense[l].bias, h, reevaluate, base_pattern, dense);
    }
    report.entries.push_back(dense);

    GradCheckEntry gate{"gate"};
    for (std::size_t l = 0; l < grads.gates.size(); ++l)
        compare_tensor(net.bank.biases[task][l], grads.gates[l], h, reevaluate, base_pattern, gate);

    // Gate unit on its own, both inputs.
    RngStream iso_rng = RngStream(options.seed).child("isolated");
    const Eigen::Index width = options.layer_sizes[1];
    const TensorD weights = uniform_init<double>(iso_rng, options.batch, width, -1.0, 1.0);
    const TensorD a = uniform_init<double>(iso_rng, options.batch, width, -1.0, 1.0);
    const TensorD b = uniform_init<double>(iso_rng, 1, width, -3.0, 3.0);
    const auto gate_grads = gate_backward(weights, a, b);
    merge_into(gate, check_isolated("gate", a, gate_grads.grad_a, h,
                                    [&](const TensorD& v) { return weights.cwiseProduct(gate_forward(v, b)).sum(); }));
    merge_into(gate, check_isolated("gate", b, gate_grads.grad_b, h,
                                    [&](const TensorD& v) { return weights.cwiseProduct(gate_forward(a, v)).sum(); }));
    gate.passed = gate.checked > 0 && gate.max_rel_error < options.tolerance;
    report.entries.push_back(gate);

    // relu away from its kink.
    TensorD relu_in = uniform_init<double>(iso_rng, options.batch, width, -1.0, 1.0);
    relu_in = relu_in.unaryExpr([](double v) { return std::abs(v) < 0.05 ? v + (v < 0 ? -0.1 : 0.1) : v; });
    report.entries.push_back(check_isolated("relu", relu_in, relu_backward(weights, relu_in), h,
                                            [&](const TensorD& v) { return weights.cwiseProduct(relu(v)).sum(); }));

    const RngStream drop_rng = iso_rng.child("dropout");
    RngStream drop_copy = drop_rng;
    const auto dropped = dropout(a, options.dropout_rate, Mode::Train, &drop_copy);
    report.entries.push_back(check_isolated("dropout", a, weights.cwiseProduct(dropped.mask), h, [&](const TensorD& v) {
        RngStream replay = drop_rng;
        return weights.cwiseProduct(dropout(v, options.dropout_rate, Mode::Train, &replay).out).sum();
    }));

    const Eigen::Index classes = options.layer_sizes.back();
    const TensorD logits = uniform_init<double>(iso_rng, options.batch, classes, -3.0, 3.0);
    const TensorD upstream = uniform_init<double>(iso_rng, options.batch, classes, -1.0, 1.0);
    report.entries.push_back(check_isolated(
        "log_softmax", logits, log_softmax_backward(upstream, log_softmax(logits)), h,
        [&](const TensorD& v) { return upstream.cwiseProduct(log_softmax(v)).sum(); }));

    const TensorD logp = log_softmax(logits);
    report.entries.push_back(check_isolated("nll", logp, nll_loss(logp, net.labels).grad_logp, h,
                                            [&](const TensorD& v) { return nll_loss(v, net.labels).loss; }));

    for (auto& e : report.entries)
        e.passed = e.checked > 0 && e.max_rel_error < options.tolerance;
    return report;
}

}  // namespace gatenet
