#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "gatenet/persist.hpp"
#include "gatenet/train.hpp"
#include "support.hpp"

using namespace gatenet;
using namespace gatenet::testing;

namespace {

constexpr Eigen::Index kWidth = 40;

MlpConfig toy_config()
{
    MlpConfig c;
    c.input_size = kWidth;
    c.hidden_sizes = {16, 12};
    return c;
}

TrainSchedule toy_schedule(std::uint64_t seed = 1)
{
    TrainSchedule s;
    s.epochs_base = 4;
    s.epochs_gates = 3;
    s.batch_size = 16;
    s.val_interval_updates = 10;
    s.rmsprop.lr = 1e-3;
    s.seed = seed;
    return s;
}

DataSplit toy_split(std::uint64_t seed = 1)
{
    RngStream rng(seed);
    auto split = split_train_val(synthetic_images(30, seed, kWidth), 0.2, rng);
    split.test = synthetic_images(10, seed + 100, kWidth);
    return split;
}

struct Fixture
{
    DataSplit split = toy_split();
    BaseTrainResult base = train_base(split, Taxonomy::cifar10(), toy_config(), toy_schedule());
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

ImageSet normalized(const ImageSet& images, const NormStats& stats)
{
    ImageSet out = images;
    normalize_in_place(out, stats);
    return out;
}

}  // namespace

TEST(TrainBase, KeepsLowestValidationSnapshot)
{
    const auto& f = fixture();
    const auto val_points = f.base.curve.series("base", "val");
    ASSERT_FALSE(val_points.empty());
    double lowest = val_points.front().loss;
    for (const auto& p : val_points)
        lowest = std::min(lowest, p.loss);
    EXPECT_EQ(f.base.best_val_loss, lowest);
    const auto val = normalized(f.split.val, f.base.model.stats);
    EXPECT_EQ(validate(f.base.model.params, nullptr, f.base.model.taxonomy, val), lowest);
}

TEST(TrainBase, LearnsAndRecordsIncreasingSteps)
{
    const auto& f = fixture();
    EXPECT_LT(f.base.best_val_loss, std::log(10.0) - 0.3);
    for (const char* split : {"train", "val"}) {
        const auto series = f.base.curve.series("base", split);
        for (std::size_t i = 1; i < series.size(); ++i)
            EXPECT_LT(series[i - 1].step, series[i].step);
        EXPECT_EQ(series.back().step, f.base.updates);
    }
}

TEST(TrainBase, DeterministicForSeed)
{
    const auto& f = fixture();
    const auto again = train_base(f.split, Taxonomy::cifar10(), toy_config(), toy_schedule());
    EXPECT_EQ(save_base(again.model), save_base(f.base.model));
    ASSERT_EQ(again.curve.points.size(), f.base.curve.points.size());
    for (std::size_t i = 0; i < again.curve.points.size(); ++i)
        EXPECT_EQ(again.curve.points[i].loss, f.base.curve.points[i].loss);

    const auto other = train_base(f.split, Taxonomy::cifar10(), toy_config(), toy_schedule(2));
    EXPECT_NE(save_base(other.model), save_base(f.base.model));
}

TEST(TrainBase, EmptySplitRejected)
{
    DataSplit split = toy_split();
    split.val = ImageSet{};
    EXPECT_THROW(train_base(split, Taxonomy::cifar10(), toy_config(), toy_schedule()), EmptyDatasetError);
}

TEST(TrainGates, FreezesBaseAndSeesOnlyCategoryLabels)
{
    const auto& f = fixture();
    const auto taxonomy = Taxonomy::cifar10();
    const auto before = save_base(f.base.model);
    for (const char* category : {"vehicles", "animals"}) {
        const auto allowed = taxonomy.classes_in(taxonomy.category_index(category));
        TrainHooks hooks;
        std::size_t batches = 0;
        hooks.on_batch = [&](std::span<const int> labels) {
            ++batches;
            for (int l : labels)
                ASSERT_NE(std::find(allowed.begin(), allowed.end(), l), allowed.end()) << category << " saw " << l;
        };
        const auto result = train_gates(f.base.model, category, f.split, toy_config(), toy_schedule(), hooks);
        EXPECT_GT(batches, 0u);
        EXPECT_EQ(result.gates.task, category);
        EXPECT_EQ(result.gates.base_digest, base_digest(f.base.model.params));
        EXPECT_EQ(save_base(f.base.model), before);
    }
}

TEST(TrainGates, OtherTaskUntouched)
{
    const auto& f = fixture();
    const auto animals = train_gates(f.base.model, "animals", f.split, toy_config(), toy_schedule());
    const auto animals_bytes = save_gates(animals.gates, f.base.model);
    const auto vehicles = train_gates(f.base.model, "vehicles", f.split, toy_config(), toy_schedule());
    EXPECT_EQ(save_gates(animals.gates, f.base.model), animals_bytes);
    const GateCheckpoint checkpoints[] = {load_gates(save_gates(vehicles.gates, f.base.model)),
                                          load_gates(animals_bytes)};
    const auto bank = pair_gates(f.base.model, checkpoints);
    EXPECT_EQ(bank.biases[bank.task_index("animals")], animals.gates.biases);
}

TEST(TrainGates, BestSnapshotMatchesRecordedMinimum)
{
    const auto& f = fixture();
    const auto result = train_gates(f.base.model, "vehicles", f.split, toy_config(), toy_schedule());
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& p : result.curve.series("vehicles", "val"))
        lowest = std::min(lowest, p.loss);
    EXPECT_EQ(result.best_val_loss, lowest);

    GateBank<float> bank;
    bank.tasks = {"vehicles"};
    bank.biases = {result.gates.biases};
    const auto val = filter_by_category(normalized(f.split.val, f.base.model.stats), "vehicles",
                                        f.base.model.taxonomy);
    EXPECT_EQ(validate(f.base.model.params, &bank, f.base.model.taxonomy, val), lowest);
}

TEST(TrainGates, Errors)
{
    const auto& f = fixture();
    EXPECT_THROW(train_gates(f.base.model, "plants", f.split, toy_config(), toy_schedule()), UnknownCategoryError);
    MlpConfig wider = toy_config();
    wider.hidden_sizes = {16, 13};
    EXPECT_THROW(train_gates(f.base.model, "animals", f.split, wider, toy_schedule()), CompatibilityError);
}

TEST(Validate, ZeroModelIsLn10AndOrderIndependent)
{
    const auto& f = fixture();
    const auto taxonomy = Taxonomy::cifar10();
    const auto zeros = BaseParams<float>::zeros(toy_config());
    const auto val = normalized(f.split.val, f.base.model.stats);
    EXPECT_NEAR(validate(zeros, nullptr, taxonomy, val), std::log(10.0), 1e-6);

    std::vector<std::size_t> order(val.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    RngStream rng(3);
    rng.shuffle(order);
    EXPECT_EQ(validate(f.base.model.params, nullptr, taxonomy, val, order),
              validate(f.base.model.params, nullptr, taxonomy, val));
    EXPECT_THROW(validate(zeros, nullptr, taxonomy, ImageSet{}), EmptyDatasetError);
}

TEST(CuedLogProbs, MissingCategoryNamed)
{
    const auto& f = fixture();
    GateBank<float> bank = GateBank<float>::zeros({"vehicles"}, f.base.model.params.hidden_sizes());
    try {
        cued_log_probs(f.base.model.params, &bank, f.base.model.taxonomy, f.split.val);
        FAIL() << "expected MissingGatesError";
    } catch (const MissingGatesError& e) {
        EXPECT_NE(std::string(e.what()).find("animals"), std::string::npos);
    }
}

TEST(CuedLogProbs, GroupedEqualsPerSample)
{
    const auto& f = fixture();
    const auto& params = f.base.model.params;
    GateBank<float> bank = GateBank<float>::zeros({"vehicles", "animals"}, params.hidden_sizes());
    RngStream rng(4);
    for (auto& task : bank.biases)
        for (auto& b : task)
            b = uniform_init<float>(rng, 1, b.cols(), -2.0f, 2.0f);
    const auto val = normalized(f.split.val, f.base.model.stats);
    const TensorF grouped = cued_log_probs(params, &bank, f.base.model.taxonomy, val);
    for (std::size_t i = 0; i < val.size(); ++i) {
        const auto& category = f.base.model.taxonomy.category_of_class(val.labels[i]);
        const TensorF x = val.pixels.row(static_cast<Eigen::Index>(i));
        const auto single = forward(params, bank, category, x, Mode::Eval, 0.0, nullptr);
        ASSERT_EQ(TensorF(grouped.row(static_cast<Eigen::Index>(i))), single.logp) << "row " << i;
    }
}
