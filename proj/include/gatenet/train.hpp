#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gatenet/data.hpp"
#include "gatenet/model.hpp"
#include "gatenet/nn.hpp"
#include "gatenet/optim.hpp"

namespace gatenet {

struct TrainSchedule
{
    int epochs_base = 30;
    int epochs_gates = 15;
    std::size_t batch_size = 32;
    std::size_t val_interval_updates = 200;
    RmspropOptions rmsprop;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LossPoint
{
    std::size_t step;
    std::string phase;  // "base" or a category name
    std::string split;  // "train" or "val"
    double loss;
};

struct LossCurve
{
    std::vector<LossPoint> points;

    void add(std::size_t step, std::string phase, std::string split, double loss)
    {
        points.push_back({step, std::move(phase), std::move(split), loss});
    }

    std::vector<LossPoint> series(std::string_view phase, std::string_view split) const;
    void append(const LossCurve& other) { points.insert(points.end(), other.points.begin(), other.points.end()); }
};

/// Observers for tests and progress reporting.
struct TrainHooks
{
    std::function<void(std::span<const int> labels)> on_batch;
    std::function<void(const LossPoint&)> on_record;
};

/// Log-probabilities for every row of `images` (already normalized), in row
/// order. Without a bank the network is ungated; with one, each sample is
/// cued by its label's category. Samples are grouped by cue and processed in
/// chunks, visiting rows in `order` (all rows ascending when empty); since a
/// row's result depends on that row alone, order and grouping do not change
/// the output.
TensorF cued_log_probs(const BaseParams<float>& params, const GateBank<float>* gates, const Taxonomy& taxonomy,
                       const ImageSet& images, std::span<const std::size_t> order = {});

/// Per-sample NLL from row-ordered log-probabilities.
std::vector<double> per_sample_nll(const TensorF& logp, std::span<const std::uint8_t> labels);

/// Eval-mode mean NLL over the whole set, reduced in row order.
double validate(const BaseParams<float>& params, const GateBank<float>* gates, const Taxonomy& taxonomy,
                const ImageSet& images, std::span<const std::size_t> order = {});

struct BaseTrainResult
{
    BaseModel model;  // the lowest-validation-loss snapshot
    LossCurve curve;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t best_step = 0;
    std::size_t updates = 0;
};

/// Trains every dense parameter on all classes with dropout active. `split`
/// holds grayscale images in [0, 255]; normalization statistics are computed
/// on split.train and returned with the model.
BaseTrainResult train_base(const DataSplit& split, const Taxonomy& taxonomy, const MlpConfig& config,
                           const TrainSchedule& schedule, const TrainHooks& hooks = {});

struct GateTrainResult
{
    GateSet gates;  // the lowest-validation-loss biases
    LossCurve curve;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t best_step = 0;
    std::size_t updates = 0;
    double base_val_loss = 0.0;  // ungated base on the same category-filtered validation set
};

/// Trains only the gate biases of `category`, starting from zero, on the
/// category's share of split.train with the base network frozen.
GateTrainResult train_gates(const BaseModel& base, std::string_view category, const DataSplit& split,
                            const MlpConfig& config, const TrainSchedule& schedule, const TrainHooks& hooks = {});

/// Pixels and labels of the listed rows as a training batch.
struct Batch
{
    TensorF x;
    std::vector<int> labels;
};

Batch gather_batch(const ImageSet& images, std::span<const std::size_t> rows);

}  // namespace gatenet
