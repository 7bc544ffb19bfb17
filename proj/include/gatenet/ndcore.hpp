#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gatenet/error.hpp"

namespace gatenet {

/// Dense rank-1/rank-2 carrier for activations, weights and gradients.
/// Row-major so that a batch is a stack of contiguous sample rows; a rank-1
/// tensor is stored as a single row.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols)
{
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> matmul_rowmajor(const Eigen::Ref<const Tensor<Scalar>>& a,
                               const Eigen::Ref<const Tensor<Scalar>>& b)
{
    Tensor<Scalar> out = Tensor<Scalar>::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            const Scalar aik = a(i, k);
            // x + 0*y == x for finite y, so skipping keeps the result exact.
            if (aik == Scalar(0))
                continue;
            out_row.noalias() += aik * b.row(k);
        }
    }
    return out;
}

}  // namespace detail

/// Matrix product with a fixed accumulation order: out(i, j) is summed over
/// k = 0..K-1 in increasing order, independently for every row i. A row of
/// the result therefore depends only on the matching row of `a`, so batched
/// and per-sample evaluation agree bit for bit. Expression arguments (e.g.
/// transposes) are materialized into row-major temporaries first.
template <typename DerivedA, typename DerivedB>
Tensor<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    static_assert(std::is_same_v<Scalar, typename DerivedB::Scalar>, "matmul operands must share a scalar type");
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree between " + shape_string(a.rows(), a.cols()) + " and " +
                             shape_string(b.rows(), b.cols()));
    return detail::matmul_rowmajor<Scalar>(a, b);
}

template <typename Derived, typename Map>
Tensor<typename Derived::Scalar> elementwise(Map&& map, const Eigen::MatrixBase<Derived>& x)
{
    return x.unaryExpr(std::forward<Map>(map));
}

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64(std::string_view text);

/// Seeded random stream.
///
/// Algorithm: the engine is std::mt19937_64 (output sequence fixed by the C++
/// standard) seeded with the stream's 64-bit seed. Child streams are seeded
/// with splitmix64(seed ^ splitmix64(fnv1a64(label))), so a (seed, label path)
/// pair always names the same stream. All derived draws (floats, bounded
/// integers, shuffles) are computed here from raw 64-bit outputs rather than
/// through <random> distributions, whose algorithms vary between standard
/// libraries.
class RngStream
{
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Independent stream named by `label`. Does not advance this stream.
    RngStream child(std::string_view label) const;

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 24 random bits.
    float next_float() { return static_cast<float>(engine_() >> 40) * 0x1.0p-24f; }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), unbiased (rejection sampling).
    std::uint64_t next_below(std::uint64_t bound);

    /// Fisher-Yates shuffle driven by next_below.
    template <typename T>
    void shuffle(std::vector<T>& items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// I.i.d. uniform values in [lo, hi).
template <typename Scalar>
Tensor<Scalar> uniform_init(RngStream& rng, Eigen::Index rows, Eigen::Index cols, Scalar lo, Scalar hi)
{
    if (!(lo < hi))
        throw ArgumentError("uniform_init: lower bound " + std::to_string(lo) + " must be below upper bound " +
                            std::to_string(hi));
    Tensor<Scalar> out(rows, cols);
    const Scalar span = hi - lo;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        Scalar v = lo + span * static_cast<Scalar>(rng.next_double());
        if (v >= hi)
            v = std::nextafter(hi, lo);
        out.data()[i] = v;
    }
    return out;
}

}  // namespace gatenet
