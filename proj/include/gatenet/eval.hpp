#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gatenet/model.hpp"
#include "gatenet/train.hpp"

namespace gatenet {

using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MetricsReport
{
    std::string model;  // "base" or "gated"
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    double categorical_isolation = 0.0;
    std::size_t n_test = 0;
    std::size_t correct = 0;
    std::size_t isolated = 0;  // predictions in the true label's category
    MatrixD confusion;         // row-normalized
    std::vector<int> predictions;
};

/// Number of samples whose predicted class shares a category with the label.
std::size_t isolation_count(std::span<const int> predictions, std::span<const int> labels, const Taxonomy& taxonomy);

/// Fraction of predictions that fall in the true label's category.
double categorical_isolation(std::span<const int> predictions, std::span<const int> labels,
                             const Taxonomy& taxonomy);

/// Entry (i, j) = share of class-i samples predicted as j. Rows of classes
/// without samples are all zero.
MatrixD confusion_matrix(std::span<const int> predictions, std::span<const int> labels, int num_classes);

/// Cued evaluation on grayscale test images in [0, 255]. Each sample is
/// normalized with the base's statistics and, when `gates` is given, run
/// through the gate slice of its label's category.
MetricsReport evaluate(const BaseModel& base, const GateBank<float>* gates, const ImageSet& test_gray);

/// Metrics from row-ordered log-probabilities.
MetricsReport metrics_from_log_probs(const std::string& model, const TensorF& logp, std::span<const int> labels,
                                     const Taxonomy& taxonomy);

/// Near-square 2-D layout for a gate vector: cols is the largest divisor of
/// width not above sqrt(width); neuron m sits at (m / cols, m % cols).
struct GridLayout
{
    Eigen::Index rows;
    Eigen::Index cols;
};

GridLayout grid_layout(Eigen::Index width);

/// Gate biases of every task, per hidden layer, with their layouts.
struct GateSnapshot
{
    std::vector<std::string> tasks;
    std::vector<std::vector<TensorF>> biases;  // [task][layer]
    std::vector<GridLayout> layouts;           // [layer]

    static GateSnapshot from_bank(const GateBank<float>& bank);
    std::size_t num_layers() const { return layouts.size(); }
};

struct GateImageLayer
{
    std::size_t layer;                // 1-based
    std::vector<MatrixD> grids;       // one per task, raw biases
    MatrixD abs_diff;                 // |first task - second task|; empty unless two tasks
    std::vector<MatrixD> normalized;  // grids then abs_diff, min-max scaled over the whole layer
};

std::vector<GateImageLayer> gate_images(const GateSnapshot& snapshot);

/// Writes gate_biases_layer<l>.csv for every layer. Requires two tasks.
void export_gate_images(const GateSnapshot& snapshot, const std::filesystem::path& dir);

struct GateHistogramSeries
{
    std::string task;
    std::size_t layer;  // 1-based
    std::vector<double> biases;
    std::vector<double> sigmas;
};

std::vector<GateHistogramSeries> gate_histograms(const GateSnapshot& snapshot);

/// Writes gate_raw.csv (task,layer,neuron_index,bias).
void export_gate_histograms(const GateSnapshot& snapshot, const std::filesystem::path& dir);

/// metrics.json: {model, test_loss, test_accuracy, categorical_isolation, n_test}
std::string metrics_json(const MetricsReport& report);
void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path);

/// Header row of class names, then one row per true class.
void write_confusion_csv(const MetricsReport& report, const Taxonomy& taxonomy, const std::filesystem::path& path);

/// step,phase,split,loss
void write_loss_curve_csv(const LossCurve& curve, const std::filesystem::path& path);
LossCurve read_loss_curve_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gatenet
