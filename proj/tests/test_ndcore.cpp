#include <gtest/gtest.h>

#include "gatenet/ndcore.hpp"

using namespace gatenet;

namespace {

TensorF mat(std::initializer_list<std::initializer_list<float>> rows)
{
    TensorF m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (float v : row)
            m(r, c++) = v;
        ++r;
    }
    return m;
}

}  // namespace

TEST(Matmul, HandExample)
{
    EXPECT_EQ(matmul(mat({{1, 2}, {3, 4}}), mat({{5, 6}, {7, 8}})), mat({{19, 22}, {43, 50}}));
}

TEST(Matmul, IdentityAndZero)
{
    const TensorF b = mat({{3, 4}, {5, 6}});
    EXPECT_EQ(matmul(TensorF::Identity(2, 2), b), b);
    EXPECT_EQ(matmul(b, TensorF::Identity(2, 2)), b);
    EXPECT_EQ(matmul(TensorF::Zero(2, 2), b), TensorF::Zero(2, 2));
}

TEST(Matmul, ShapeMismatchNamesBothShapes)
{
    try {
        matmul(TensorF::Zero(2, 3), TensorF::Zero(2, 3));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("2x3"), std::string::npos) << what;
    }
}

TEST(Matmul, RowsAreIndependentAndDeterministic)
{
    RngStream rng(3);
    const TensorF a = uniform_init<float>(rng, 7, 33, -1.0f, 1.0f);
    const TensorF b = uniform_init<float>(rng, 33, 5, -1.0f, 1.0f);
    const TensorF full = matmul(a, b);
    EXPECT_EQ(full, matmul(a, b));
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const TensorF row = a.row(r);
        EXPECT_EQ(TensorF(matmul(row, b)), TensorF(full.row(r)));
    }
}

TEST(Elementwise, Examples)
{
    EXPECT_EQ(elementwise([](float v) { return -v; }, mat({{1, -2}})), mat({{-1, 2}}));
    EXPECT_EQ(elementwise([](float v) { return v * v; }, mat({{3, 4}})), mat({{9, 16}}));
    const TensorF x = mat({{1.5f, -0.25f}});
    EXPECT_EQ(elementwise([](float v) { return v; }, x), x);
}

TEST(UniformInit, MeanAndRange)
{
    RngStream rng(11);
    const TensorF t = uniform_init<float>(rng, 1, 10000, 0.0f, 1.0f);
    const double mean = t.cast<double>().mean();
    EXPECT_GE(mean, 0.47);
    EXPECT_LE(mean, 0.53);
    EXPECT_GE(t.minCoeff(), 0.0f);
    EXPECT_LT(t.maxCoeff(), 1.0f);
}

TEST(UniformInit, RejectsEmptyInterval)
{
    RngStream rng(1);
    EXPECT_THROW(uniform_init<float>(rng, 1, 1, 1.0f, 1.0f), ArgumentError);
    EXPECT_THROW(uniform_init<float>(rng, 1, 1, 2.0f, 1.0f), ArgumentError);
}

TEST(UniformInit, SameSeedSameTensor)
{
    RngStream a(99), b(99);
    EXPECT_EQ(uniform_init<float>(a, 4, 6, -1.0f, 1.0f), uniform_init<float>(b, 4, 6, -1.0f, 1.0f));
}

TEST(Rng, ReproducibleOverManyDraws)
{
    RngStream a = RngStream(2024).child("shuffle");
    RngStream b = RngStream(2024).child("shuffle");
    for (int i = 0; i < 100000; ++i)
        ASSERT_EQ(a.next_u64(), b.next_u64()) << "draw " << i;
}

TEST(Rng, ChildrenDifferByLabelAndSeed)
{
    const RngStream root(5);
    EXPECT_NE(root.child("init").seed(), root.child("dropout").seed());
    EXPECT_NE(root.child("init").seed(), RngStream(6).child("init").seed());
    EXPECT_NE(root.child("init").seed(), root.seed());
    RngStream x = root.child("init");
    RngStream y = root.child("dropout");
    int equal = 0;
    for (int i = 0; i < 1000; ++i)
        equal += x.next_u64() == y.next_u64();
    EXPECT_EQ(equal, 0);
}

TEST(Rng, NextBelowStaysInRangeAndCoversIt)
{
    RngStream rng(8);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.next_below(7);
        ASSERT_LT(v, 7u);
        ++hits[v];
    }
    for (int h : hits)
        EXPECT_GT(h, 800);
}

TEST(Rng, ShuffleIsAPermutation)
{
    RngStream rng(4);
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i)
        v[i] = i;
    rng.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(sorted[i], i);
    EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Fnv1a, KnownVectors)
{
    EXPECT_EQ(fnv1a64(std::string_view("")), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64(std::string_view("a")), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64(std::string_view("foobar")), 0x85944171f73967e8ULL);
}
