#include "gatenet/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gatenet {

namespace {

void check_lengths(const char* op, std::span<const int> predictions, std::span<const int> labels)
{
    if (predictions.size() != labels.size())
        throw ArgumentError(std::string(op) + ": " + std::to_string(predictions.size()) + " predictions but " +
                            std::to_string(labels.size()) + " labels");
}

std::string format_float(float value)
{
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

MatrixD grid_of(const TensorF& bias, const GridLayout& layout)
{
    MatrixD grid(layout.rows, layout.cols);
    for (Eigen::Index m = 0; m < bias.size(); ++m)
        grid(m / layout.cols, m % layout.cols) = static_cast<double>(bias(0, m));
    return grid;
}

}  // namespace

std::string format_number(double value)
{
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

std::size_t isolation_count(std::span<const int> predictions, std::span<const int> labels, const Taxonomy& taxonomy)
{
    check_lengths("categorical_isolation", predictions, labels);
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (taxonomy.same_category(predictions[i], labels[i]))
            ++count;
    return count;
}

double categorical_isolation(std::span<const int> predictions, std::span<const int> labels,
                             const Taxonomy& taxonomy)
{
    const auto count = isolation_count(predictions, labels, taxonomy);
    if (labels.empty())
        throw EmptyDatasetError("categorical_isolation: no samples");
    return static_cast<double>(count) / static_cast<double>(labels.size());
}

MatrixD confusion_matrix(std::span<const int> predictions, std::span<const int> labels, int num_classes)
{
    check_lengths("confusion_matrix", predictions, labels);
    MatrixD counts = MatrixD::Zero(num_classes, num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes)
            throw LabelError(i, labels[i] < 0 || labels[i] >= num_classes ? labels[i] : predictions[i]);
        counts(labels[i], predictions[i]) += 1.0;
    }
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
        const double support = counts.row(r).sum();
        if (support > 0.0)
            counts.row(r) /= support;
    }
    return counts;
}

MetricsReport metrics_from_log_probs(const std::string& model, const TensorF& logp, std::span<const int> labels,
                                     const Taxonomy& taxonomy)
{
    if (labels.empty())
        throw EmptyDatasetError("evaluate: empty test set");
    MetricsReport report;
    report.model = model;
    report.n_test = labels.size();
    report.predictions = predict(logp);

    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total -= static_cast<double>(logp(static_cast<Eigen::Index>(i), labels[i]));
        if (report.predictions[i] == labels[i])
            ++report.correct;
    }
    report.isolated = isolation_count(report.predictions, labels, taxonomy);
    const auto n = static_cast<double>(labels.size());
    report.test_loss = total / n;
    report.test_accuracy = static_cast<double>(report.correct) / n;
    report.categorical_isolation = static_cast<double>(report.isolated) / n;
    report.confusion = confusion_matrix(report.predictions, labels, static_cast<int>(taxonomy.num_classes()));
    return report;
}

MetricsReport evaluate(const BaseModel& base, const GateBank<float>* gates, const ImageSet& test_gray)
{
    if (test_gray.empty())
        throw EmptyDatasetError("evaluate: empty test set");
    ImageSet test = test_gray;
    normalize_in_place(test, base.stats);
    const TensorF logp = cued_log_probs(base.params, gates, base.taxonomy, test);
    const std::vector<int> labels(test.labels.begin(), test.labels.end());
    return metrics_from_log_probs(gates ? "gated" : "base", logp, labels, base.taxonomy);
}

GridLayout grid_layout(Eigen::Index width)
{
    if (width < 1)
        throw ArgumentError("grid_layout: width must be positive");
    Eigen::Index cols = 1;
    for (Eigen::Index d = 1; d * d <= width; ++d)
        if (width % d == 0)
            cols = d;
    return {width / cols, cols};
}

GateSnapshot GateSnapshot::from_bank(const GateBank<float>& bank)
{
    GateSnapshot snapshot;
    snapshot.tasks = bank.tasks;
    snapshot.biases = bank.biases;
    if (!bank.biases.empty())
        for (const auto& b : bank.biases.front())
            snapshot.layouts.push_back(grid_layout(b.cols()));
    for (const auto& task : bank.biases) {
        if (task.size() != snapshot.layouts.size())
            throw DimensionError("gate snapshot: tasks disagree on the number of layers");
        for (std::size_t l = 0; l < task.size(); ++l)
            if (task[l].cols() != snapshot.layouts[l].rows * snapshot.layouts[l].cols)
                throw DimensionError("gate snapshot: tasks disagree on the width of layer " + std::to_string(l + 1));
    }
    return snapshot;
}

std::vector<GateImageLayer> gate_images(const GateSnapshot& snapshot)
{
    std::vector<GateImageLayer> layers;
    for (std::size_t l = 0; l < snapshot.num_layers(); ++l) {
        GateImageLayer layer{l + 1, {}, {}, {}};
        for (std::size_t t = 0; t < snapshot.tasks.size(); ++t)
            layer.grids.push_back(grid_of(snapshot.biases[t][l], snapshot.layouts[l]));
        if (layer.grids.size() == 2)
            layer.abs_diff = (layer.grids[0] - layer.grids[1]).cwiseAbs();

        std::vector<const MatrixD*> all;
        for (const auto& g : layer.grids)
            all.push_back(&g);
        if (layer.abs_diff.size() > 0)
            all.push_back(&layer.abs_diff);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto* g : all) {
            lo = std::min(lo, g->minCoeff());
            hi = std::max(hi, g->maxCoeff());
        }
        const double range = hi - lo;
        for (const auto* g : all)
            layer.normalized.push_back(range > 0.0 ? MatrixD((g->array() - lo) / range)
                                                   : MatrixD(MatrixD::Zero(g->rows(), g->cols())));
        layers.push_back(std::move(layer));
    }
    return layers;
}

void export_gate_images(const GateSnapshot& snapshot, const std::filesystem::path& dir)
{
    if (snapshot.tasks.size() != 2)
        throw ArgumentError("gate image export needs exactly two tasks, got " + std::to_string(snapshot.tasks.size()));
    const auto& first = snapshot.tasks[0];
    const auto& second = snapshot.tasks[1];
    for (std::size_t l = 0; l < snapshot.num_layers(); ++l) {
        const auto& layout = snapshot.layouts[l];
        const auto& a = snapshot.biases[0][l];
        const auto& b = snapshot.biases[1][l];
        std::ostringstream csv;
        csv << "neuron_index,row,col,bias_" << first << ",bias_" << second << ",abs_diff,sigma_" << first
            << ",sigma_" << second << "\n";
        for (Eigen::Index m = 0; m < a.cols(); ++m) {
            const float ba = a(0, m);
            const float bb = b(0, m);
            csv << m << "," << m / layout.cols << "," << m % layout.cols << "," << format_float(ba) << ","
                << format_float(bb) << "," << format_float(std::abs(ba - bb)) << "," << format_float(sigmoid(ba))
                << "," << format_float(sigmoid(bb)) << "\n";
        }
        write_text_file(dir / ("gate_biases_layer" + std::to_string(l + 1) + ".csv"), csv.str());
    }
}

std::vector<GateHistogramSeries> gate_histograms(const GateSnapshot& snapshot)
{
    std::vector<GateHistogramSeries> out;
    for (std::size_t t = 0; t < snapshot.tasks.size(); ++t) {
        for (std::size_t l = 0; l < snapshot.num_layers(); ++l) {
            GateHistogramSeries series{snapshot.tasks[t], l + 1, {}, {}};
            for (Eigen::Index m = 0; m < snapshot.biases[t][l].cols(); ++m) {
                const float b = snapshot.biases[t][l](0, m);
                series.biases.push_back(b);
                series.sigmas.push_back(sigmoid(b));
            }
            out.push_back(std::move(series));
        }
    }
    return out;
}

void export_gate_histograms(const GateSnapshot& snapshot, const std::filesystem::path& dir)
{
    std::ostringstream csv;
    csv << "task,layer,neuron_index,bias\n";
    for (std::size_t t = 0; t < snapshot.tasks.size(); ++t)
        for (std::size_t l = 0; l < snapshot.num_layers(); ++l)
            for (Eigen::Index m = 0; m < snapshot.biases[t][l].cols(); ++m)
                csv << snapshot.tasks[t] << "," << l + 1 << "," << m << ","
                    << format_float(snapshot.biases[t][l](0, m)) << "\n";
    write_text_file(dir / "gate_raw.csv", csv.str());
}

std::string metrics_json(const MetricsReport& report)
{
    nlohmann::ordered_json j;
    j["model"] = report.model;
    j["test_loss"] = report.test_loss;
    j["test_accuracy"] = report.test_accuracy;
    j["categorical_isolation"] = report.categorical_isolation;
    j["n_test"] = report.n_test;
    return j.dump(2) + "\n";
}

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path)
{
    write_text_file(path, metrics_json(report));
}

void write_confusion_csv(const MetricsReport& report, const Taxonomy& taxonomy, const std::filesystem::path& path)
{
    std::ostringstream csv;
    csv << "true_class";
    for (const auto& name : taxonomy.class_names)
        csv << "," << name;
    csv << "\n";
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        csv << taxonomy.class_names.at(static_cast<std::size_t>(r));
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c)
            csv << "," << format_number(report.confusion(r, c));
        csv << "\n";
    }
    write_text_file(path, csv.str());
}

void write_loss_curve_csv(const LossCurve& curve, const std::filesystem::path& path)
{
    std::ostringstream csv;
    csv << "step,phase,split,loss\n";
    for (const auto& p : curve.points)
        csv << p.step << "," << p.phase << "," << p.split << "," << format_number(p.loss) << "\n";
    write_text_file(path, csv.str());
}

LossCurve read_loss_curve_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "step,phase,split,loss")
        throw MalformedFileError(path.string() + ": expected header 'step,phase,split,loss'");
    LossCurve curve;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');)
            fields.push_back(f);
        if (fields.size() != 4)
            throw MalformedFileError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
        try {
            curve.add(std::stoull(fields[0]), fields[1], fields[2], std::stod(fields[3]));
        } catch (const std::logic_error&) {
            throw MalformedFileError(path.string() + ":" + std::to_string(line_no) + ": unparsable number");
        }
    }
    return curve;
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out)
        throw Error("failed writing " + path.string());
}

}  // namespace gatenet
