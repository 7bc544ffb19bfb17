#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gatenet/eval.hpp"
#include "support.hpp"

using namespace gatenet;
using namespace gatenet::testing;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path)
{
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
        lines.push_back(line);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');)
        out.push_back(f);
    return out;
}

GateBank<float> random_bank(std::uint64_t seed)
{
    GateBank<float> bank = GateBank<float>::zeros({"vehicles", "animals"}, std::vector<Eigen::Index>{256, 128});
    RngStream rng(seed);
    for (auto& task : bank.biases)
        for (auto& b : task)
            b = uniform_init<float>(rng, 1, b.cols(), -3.0f, 3.0f);
    return bank;
}

}  // namespace

TEST(Isolation, HandExample)
{
    const auto taxonomy = Taxonomy::cifar10();
    const std::vector<int> labels{9, 3, 5, 8};       // truck, cat, dog, ship
    const std::vector<int> predictions{1, 4, 8, 0};  // automobile, deer, ship, airplane
    EXPECT_EQ(isolation_count(predictions, labels, taxonomy), 3u);
    EXPECT_DOUBLE_EQ(categorical_isolation(predictions, labels, taxonomy), 0.75);
}

TEST(Isolation, AllInCategoryIsOne)
{
    const std::vector<int> labels{0, 2, 9};
    const std::vector<int> predictions{8, 7, 1};
    EXPECT_DOUBLE_EQ(categorical_isolation(predictions, labels, Taxonomy::cifar10()), 1.0);
}

TEST(Isolation, LengthMismatch)
{
    const std::vector<int> labels{0, 2};
    const std::vector<int> predictions{0};
    EXPECT_THROW(categorical_isolation(predictions, labels, Taxonomy::cifar10()), ArgumentError);
}

TEST(Confusion, SixSampleHandCase)
{
    const std::vector<int> labels{0, 0, 1, 1, 2, 2};
    const std::vector<int> predictions{0, 1, 1, 1, 2, 0};
    const MatrixD m = confusion_matrix(predictions, labels, 4);
    MatrixD expected = MatrixD::Zero(4, 4);
    expected(0, 0) = 0.5;
    expected(0, 1) = 0.5;
    expected(1, 1) = 1.0;
    expected(2, 0) = 0.5;
    expected(2, 2) = 0.5;
    EXPECT_EQ(m, expected);
}

TEST(Confusion, PerfectIsIdentity)
{
    const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 3};
    EXPECT_EQ(confusion_matrix(labels, labels, 10), MatrixD::Identity(10, 10));
    const std::vector<int> short_preds{1};
    EXPECT_THROW(confusion_matrix(short_preds, labels, 10), ArgumentError);
}

TEST(Metrics, OracleModel)
{
    const std::vector<int> labels{3, 0, 9, 5};
    TensorF logp = TensorF::Constant(4, 10, -100.0f);
    for (std::size_t i = 0; i < labels.size(); ++i)
        logp(static_cast<Eigen::Index>(i), labels[i]) = 0.0f;
    const auto r = metrics_from_log_probs("base", logp, labels, Taxonomy::cifar10());
    expect_metric_ordering(r);
    EXPECT_EQ(r.test_loss, 0.0);
    EXPECT_EQ(r.test_accuracy, 1.0);
    EXPECT_EQ(r.categorical_isolation, 1.0);
    EXPECT_EQ(r.n_test, 4u);
}

TEST(Grid, Layouts)
{
    EXPECT_EQ(grid_layout(256).rows, 16);
    EXPECT_EQ(grid_layout(256).cols, 16);
    EXPECT_EQ(grid_layout(128).rows, 16);
    EXPECT_EQ(grid_layout(128).cols, 8);
    EXPECT_EQ(grid_layout(7).cols, 1);
    EXPECT_THROW(grid_layout(0), ArgumentError);
}

TEST(GateImages, GridsRoundTripAndDifference)
{
    const auto bank = random_bank(1);
    const auto layers = gate_images(GateSnapshot::from_bank(bank));
    ASSERT_EQ(layers.size(), 2u);
    EXPECT_EQ(layers[0].grids[0].rows(), 16);
    EXPECT_EQ(layers[0].grids[0].cols(), 16);
    EXPECT_EQ(layers[0].grids[0].size(), 256);
    EXPECT_EQ(layers[1].grids[1].cols(), 8);
    for (std::size_t l = 0; l < 2; ++l) {
        const Eigen::RowVectorXd flat = layers[l].grids[0].reshaped<Eigen::RowMajor>().transpose();
        EXPECT_EQ(flat, bank.biases[0][l].cast<double>());
        EXPECT_GE(layers[l].normalized.front().minCoeff(), 0.0);
        EXPECT_LE(layers[l].normalized.back().maxCoeff(), 1.0);
    }

    auto same = bank;
    same.biases[1] = same.biases[0];
    for (const auto& layer : gate_images(GateSnapshot::from_bank(same)))
        EXPECT_TRUE((layer.abs_diff.array() == 0.0).all());
}

TEST(GateImages, CsvSchema)
{
    const auto dir = scratch_dir("gate_csv");
    const auto bank = random_bank(2);
    export_gate_images(GateSnapshot::from_bank(bank), dir);
    const auto lines = read_lines(dir / "gate_biases_layer1.csv");
    ASSERT_EQ(lines.size(), 257u);
    EXPECT_EQ(lines[0], "neuron_index,row,col,bias_vehicles,bias_animals,abs_diff,sigma_vehicles,sigma_animals");
    const auto fields = split_csv(lines[18]);  // neuron 17
    ASSERT_EQ(fields.size(), 8u);
    EXPECT_EQ(fields[0], "17");
    EXPECT_EQ(fields[1], "1");
    EXPECT_EQ(fields[2], "1");
    const float bv = std::stof(fields[3]);
    const float ba = std::stof(fields[4]);
    EXPECT_EQ(bv, bank.biases[0][0](0, 17));
    EXPECT_EQ(ba, bank.biases[1][0](0, 17));
    EXPECT_FLOAT_EQ(std::stof(fields[5]), std::abs(bv - ba));
    EXPECT_FLOAT_EQ(std::stof(fields[6]), 1.0f / (1.0f + std::exp(-bv)));
    EXPECT_EQ(read_lines(dir / "gate_biases_layer2.csv").size(), 129u);
}

TEST(GateHistograms, LengthsAndSigmas)
{
    const auto series = gate_histograms(GateSnapshot::from_bank(random_bank(3)));
    ASSERT_EQ(series.size(), 4u);
    EXPECT_EQ(series[0].biases.size(), 256u);
    EXPECT_EQ(series[1].biases.size(), 128u);
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.biases.size(); ++i)
            EXPECT_NEAR(s.sigmas[i], 1.0 / (1.0 + std::exp(-s.biases[i])), 1e-7);

    const auto fresh = GateBank<float>::zeros({"vehicles", "animals"}, std::vector<Eigen::Index>{256, 128});
    for (const auto& s : gate_histograms(GateSnapshot::from_bank(fresh)))
        for (double b : s.biases)
            EXPECT_EQ(b, 0.0);

    const auto dir = scratch_dir("gate_raw");
    export_gate_histograms(GateSnapshot::from_bank(fresh), dir);
    const auto lines = read_lines(dir / "gate_raw.csv");
    EXPECT_EQ(lines.size(), 1u + 2 * 384);
    EXPECT_EQ(lines[0], "task,layer,neuron_index,bias");
    EXPECT_EQ(lines[1], "vehicles,1,0,0");
}

TEST(Reports, MetricsJsonAndConfusionCsv)
{
    const auto taxonomy = Taxonomy::cifar10();
    const std::vector<int> labels{0, 1, 2, 3};
    TensorF logp = TensorF::Constant(4, 10, std::log(0.1f));
    const auto r = metrics_from_log_probs("gated", logp, labels, taxonomy);
    expect_metric_ordering(r);
    const std::string json = metrics_json(r);
    for (const char* key : {"\"model\": \"gated\"", "\"test_loss\"", "\"test_accuracy\"", "\"categorical_isolation\"",
                            "\"n_test\": 4"})
        EXPECT_NE(json.find(key), std::string::npos) << key;
    EXPECT_LT(json.find("model"), json.find("test_loss"));

    const auto dir = scratch_dir("reports");
    write_confusion_csv(r, taxonomy, dir / "confusion_gated.csv");
    const auto lines = read_lines(dir / "confusion_gated.csv");
    ASSERT_EQ(lines.size(), 11u);
    EXPECT_EQ(lines[0], "true_class,airplane,automobile,bird,cat,deer,dog,frog,horse,ship,truck");
    EXPECT_EQ(split_csv(lines[1])[0], "airplane");
    EXPECT_EQ(split_csv(lines[1])[1], "1");
}

TEST(Reports, LossCurveRoundTrip)
{
    LossCurve curve;
    curve.add(200, "base", "train", 2.25);
    curve.add(200, "base", "val", 0.1 + 0.2);
    curve.add(400, "vehicles", "val", 1.0 / 3.0);
    const auto path = scratch_dir("curve") / "loss_curve.csv";
    write_loss_curve_csv(curve, path);
    EXPECT_EQ(read_lines(path)[0], "step,phase,split,loss");
    const auto back = read_loss_curve_csv(path);
    ASSERT_EQ(back.points.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.points[i].step, curve.points[i].step);
        EXPECT_EQ(back.points[i].phase, curve.points[i].phase);
        EXPECT_EQ(back.points[i].loss, curve.points[i].loss);
    }
}

TEST(FormatNumber, ShortestRoundTrip)
{
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(format_number(2.0), "2");
    EXPECT_EQ(std::stod(format_number(0.1 + 0.2)), 0.1 + 0.2);
}
