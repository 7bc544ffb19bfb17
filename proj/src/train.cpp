#include "gatenet/train.hpp"

#include <algorithm>
#include <map>

namespace gatenet {

namespace {

constexpr std::size_t kEvalChunk = 500;

struct IntervalMean
{
    double sum = 0.0;
    std::size_t count = 0;

    void add(double v)
    {
        sum += v;
        ++count;
    }

    double take()
    {
        const double mean = count ? sum / static_cast<double>(count) : 0.0;
        sum = 0.0;
        count = 0;
        return mean;
    }
};

ImageSet normalized_copy(const ImageSet& gray, const NormStats& stats)
{
    ImageSet out = gray;
    normalize_in_place(out, stats);
    return out;
}

}  // namespace

void TrainSchedule::validate() const
{
    if (epochs_base < 1 || epochs_gates < 1 || batch_size < 1 || val_interval_updates < 1)
        throw ArgumentError("train schedule: epochs, batch size and validation interval must all be positive");
    if (!(rmsprop.lr > 0.0) || !(rmsprop.rho >= 0.0 && rmsprop.rho < 1.0) || !(rmsprop.eps > 0.0))
        throw ArgumentError("train schedule: RMSprop needs lr > 0, rho in [0, 1) and eps > 0");
}

std::vector<LossPoint> LossCurve::series(std::string_view phase, std::string_view split) const
{
    std::vector<LossPoint> out;
    for (const auto& p : points)
        if (p.phase == phase && p.split == split)
            out.push_back(p);
    return out;
}

Batch gather_batch(const ImageSet& images, std::span<const std::size_t> rows)
{
    Batch batch;
    batch.x.resize(static_cast<Eigen::Index>(rows.size()), images.pixels.cols());
    batch.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        batch.x.row(static_cast<Eigen::Index>(i)) = images.pixels.row(static_cast<Eigen::Index>(rows[i]));
        batch.labels.push_back(images.labels[rows[i]]);
    }
    return batch;
}

TensorF cued_log_probs(const BaseParams<float>& params, const GateBank<float>* gates, const Taxonomy& taxonomy,
                       const ImageSet& images, std::span<const std::size_t> order)
{
    const auto classes = params.layers.empty() ? 0 : params.layers.back().weight.cols();
    TensorF logp(static_cast<Eigen::Index>(images.size()), classes);

    std::vector<std::size_t> visit;
    if (order.empty()) {
        visit.resize(images.size());
        for (std::size_t i = 0; i < visit.size(); ++i)
            visit[i] = i;
    } else {
        if (order.size() != images.size())
            throw ArgumentError("evaluation order must list every row exactly once");
        visit.assign(order.begin(), order.end());
    }

    // Cue groups in order of first appearance; -1 means ungated.
    std::map<long, std::vector<std::size_t>> groups;
    std::vector<long> group_order;
    for (const auto row : visit) {
        long key = -1;
        if (gates) {
            const auto& category = taxonomy.category_of_class(images.labels.at(row));
            const auto it = std::find(gates->tasks.begin(), gates->tasks.end(), category);
            if (it == gates->tasks.end())
                throw MissingGatesError("no trained gates for category '" + category + "'");
            key = static_cast<long>(it - gates->tasks.begin());
        }
        auto [pos, inserted] = groups.try_emplace(key);
        if (inserted)
            group_order.push_back(key);
        pos->second.push_back(row);
    }

    for (const auto key : group_order) {
        const auto& rows = groups[key];
        std::optional<GateSlice<float>> slice;
        if (key >= 0)
            slice = gates->slice(static_cast<std::size_t>(key));
        for (std::size_t start = 0; start < rows.size(); start += kEvalChunk) {
            const auto stop = std::min(rows.size(), start + kEvalChunk);
            const std::span<const std::size_t> chunk(rows.data() + start, stop - start);
            const auto batch = gather_batch(images, chunk);
            const auto result = forward(params, slice, batch.x, Mode::Eval, 0.0, nullptr);
            for (std::size_t i = 0; i < chunk.size(); ++i)
                logp.row(static_cast<Eigen::Index>(chunk[i])) = result.logp.row(static_cast<Eigen::Index>(i));
        }
    }
    return logp;
}

std::vector<double> per_sample_nll(const TensorF& logp, std::span<const std::uint8_t> labels)
{
    if (static_cast<Eigen::Index>(labels.size()) != logp.rows())
        throw DimensionError("per_sample_nll: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(logp.rows()) + " rows");
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= logp.cols())
            throw LabelError(i, labels[i]);
        out[i] = -static_cast<double>(logp(static_cast<Eigen::Index>(i), labels[i]));
    }
    return out;
}

double validate(const BaseParams<float>& params, const GateBank<float>* gates, const Taxonomy& taxonomy,
                const ImageSet& images, std::span<const std::size_t> order)
{
    if (images.empty())
        throw EmptyDatasetError("validate: empty validation set");
    const auto losses = per_sample_nll(cued_log_probs(params, gates, taxonomy, images, order), images.labels);
    double total = 0.0;
    for (const double l : losses)
        total += l;
    return total / static_cast<double>(losses.size());
}

BaseTrainResult train_base(const DataSplit& split, const Taxonomy& taxonomy, const MlpConfig& config,
                           const TrainSchedule& schedule, const TrainHooks& hooks)
{
    config.validate();
    schedule.validate();
    taxonomy.validate();
    if (split.train.empty() || split.val.empty())
        throw EmptyDatasetError("train_base: training and validation sets must be non-empty");
    if (config.output_size != static_cast<Eigen::Index>(taxonomy.num_classes()))
        throw CompatibilityError("train_base: network has " + std::to_string(config.output_size) +
                                 " outputs but the taxonomy has " + std::to_string(taxonomy.num_classes()) +
                                 " classes");

    BaseTrainResult result;
    result.model.taxonomy = taxonomy;
    result.model.stats = compute_norm_stats(split.train);
    const ImageSet train = normalized_copy(split.train, result.model.stats);
    const ImageSet val = normalized_copy(split.val, result.model.stats);

    const RngStream root = RngStream(schedule.seed).child("base");
    RngStream init_rng = root.child("init");
    RngStream shuffle_rng = root.child("shuffle");
    RngStream dropout_rng = root.child("dropout");

    BaseParams<float> params = BaseParams<float>::init(config, init_rng);
    result.model.params = params;
    RmspropState<float> state{schedule.rmsprop, {}};

    IntervalMean interval;
    std::size_t step = 0;
    const auto record = [&] {
        const LossPoint train_point{step, "base", "train", interval.take()};
        result.curve.points.push_back(train_point);
        const double val_loss = validate(params, nullptr, taxonomy, val);
        const LossPoint val_point{step, "base", "val", val_loss};
        result.curve.points.push_back(val_point);
        if (hooks.on_record) {
            hooks.on_record(train_point);
            hooks.on_record(val_point);
        }
        if (val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_step = step;
            result.model.params = params;
        }
    };

    for (int epoch = 0; epoch < schedule.epochs_base; ++epoch) {
        for (const auto& rows : epoch_batches(train.size(), schedule.batch_size, shuffle_rng)) {
            const auto batch = gather_batch(train, rows);
            if (hooks.on_batch)
                hooks.on_batch(batch.labels);
            const auto pass = forward(params, std::nullopt, batch.x, Mode::Train, config.dropout_rate, &dropout_rng);
            const auto loss = nll_loss(pass.logp, batch.labels);
            const auto grads = backward(pass.trace, params, std::nullopt, loss.grad_logp, Trainable::Base);

            std::vector<const TensorF*> grad_refs;
            for (const auto& g : grads.dense) {
                grad_refs.push_back(&g.weight);
                grad_refs.push_back(&g.bias);
            }
            const auto param_refs = params.tensors();
            rmsprop_step<float>(param_refs, grad_refs, state);

            interval.add(loss.loss);
            ++step;
            if (step % schedule.val_interval_updates == 0)
                record();
        }
    }
    if (interval.count > 0)
        record();
    result.updates = step;
    return result;
}

GateTrainResult train_gates(const BaseModel& base, std::string_view category, const DataSplit& split,
                            const MlpConfig& config, const TrainSchedule& schedule, const TrainHooks& hooks)
{
    schedule.validate();
    const auto& taxonomy = base.taxonomy;
    const std::string task(taxonomy.categories.at(taxonomy.category_index(category)));
    const auto sizes = base.params.layer_sizes();
    if (sizes.size() < 3 || sizes.front() != split.train.pixels.cols() ||
        sizes.back() != static_cast<Eigen::Index>(taxonomy.num_classes()))
        throw CompatibilityError("train_gates: base network shape does not fit the data and taxonomy");
    if (config.layer_sizes() != sizes)
        throw CompatibilityError("train_gates: configured layer sizes differ from the base checkpoint's");
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
        throw ArgumentError("train_gates: dropout rate must lie in [0, 1)");

    const ImageSet train = normalized_copy(filter_by_category(split.train, task, taxonomy), base.stats);
    const ImageSet val = normalized_copy(filter_by_category(split.val, task, taxonomy), base.stats);
    if (train.empty() || val.empty())
        throw EmptyDatasetError("train_gates: no training or validation images in category '" + task + "'");

    const auto hidden = base.params.hidden_sizes();
    GateBank<float> bank = GateBank<float>::zeros({task}, hidden);

    GateTrainResult result;
    result.gates.task = task;
    result.gates.biases = bank.biases.front();
    result.gates.base_digest = base_digest(base.params);
    result.base_val_loss = validate(base.params, nullptr, taxonomy, val);

    const RngStream root = RngStream(schedule.seed).child("gates/" + task);
    RngStream shuffle_rng = root.child("shuffle");
    RngStream dropout_rng = root.child("dropout");
    RmspropState<float> state{schedule.rmsprop, {}};

    IntervalMean interval;
    std::size_t step = 0;
    const auto record = [&] {
        const LossPoint train_point{step, task, "train", interval.take()};
        result.curve.points.push_back(train_point);
        const double val_loss = validate(base.params, &bank, taxonomy, val);
        const LossPoint val_point{step, task, "val", val_loss};
        result.curve.points.push_back(val_point);
        if (hooks.on_record) {
            hooks.on_record(train_point);
            hooks.on_record(val_point);
        }
        if (val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_step = step;
            result.gates.biases = bank.biases.front();
        }
    };

    const auto category_index = taxonomy.category_index(task);
    for (int epoch = 0; epoch < schedule.epochs_gates; ++epoch) {
        for (const auto& rows : epoch_batches(train.size(), schedule.batch_size, shuffle_rng)) {
            const auto batch = gather_batch(train, rows);
            for (const int label : batch.labels)
                if (taxonomy.category_of.at(static_cast<std::size_t>(label)) != category_index)
                    throw Error("train_gates: label " + std::to_string(label) + " is outside category '" + task + "'");
            if (hooks.on_batch)
                hooks.on_batch(batch.labels);

            const GateSlice<float> slice = bank.slice(std::size_t{0});
            const auto pass = forward(base.params, std::optional(slice), batch.x, Mode::Train, config.dropout_rate,
                                      &dropout_rng);
            const auto loss = nll_loss(pass.logp, batch.labels);
            const auto grads = backward(pass.trace, base.params, std::optional(slice), loss.grad_logp,
                                        Trainable::Gates);

            std::vector<TensorF*> param_refs;
            std::vector<const TensorF*> grad_refs;
            for (std::size_t l = 0; l < grads.gates.size(); ++l) {
                param_refs.push_back(&bank.biases.front()[l]);
                grad_refs.push_back(&grads.gates[l]);
            }
            rmsprop_step<float>(param_refs, grad_refs, state);

            interval.add(loss.loss);
            ++step;
            if (step % schedule.val_interval_updates == 0)
                record();
        }
    }
    if (interval.count > 0)
        record();
    result.updates = step;
    return result;
}

}  // namespace gatenet
