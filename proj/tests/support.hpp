#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gatenet/data.hpp"
#include "gatenet/eval.hpp"
#include "gatenet/ndcore.hpp"

namespace gatenet::testing {

inline std::filesystem::path cifar_dir()
{
    if (const char* env = std::getenv("GATENET_CIFAR_DIR"))
        return env;
    return "/root/data/cifar-10-batches-bin";
}

inline bool have_cifar() { return verify_cifar_dir(cifar_dir()).empty(); }

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("gatenet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Grayscale-range images whose class is readable from the pixels: class k
/// brightens its own band of 1024 / 10 pixels.
inline ImageSet synthetic_images(std::size_t per_class, std::uint64_t seed, Eigen::Index width = 1024)
{
    RngStream rng(seed);
    const std::size_t n = per_class * 10;
    ImageSet set;
    set.pixels = TensorF(static_cast<Eigen::Index>(n), width);
    const Eigen::Index band = width / 10;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 10);
        set.labels.push_back(static_cast<std::uint8_t>(label));
        set.source_index.push_back(i);
        for (Eigen::Index c = 0; c < width; ++c) {
            const float noise = rng.next_float() * 120.0f;
            const bool on = c / band == label;
            set.pixels(static_cast<Eigen::Index>(i), c) = (on ? 120.0f : 0.0f) + noise;
        }
    }
    return set;
}

/// CIFAR-10 binary records with the given labels and pseudo-random pixels.
inline std::vector<std::uint8_t> synthetic_batch_bytes(const std::vector<std::uint8_t>& labels, std::uint64_t seed)
{
    RngStream rng(seed);
    std::vector<std::uint8_t> bytes;
    for (auto label : labels) {
        bytes.push_back(label);
        for (std::size_t i = 0; i < 3072; ++i) {
            const auto band = static_cast<std::uint8_t>((i % 1024) * 10 / 1024);
            const auto base = band == label ? 150 : 20;
            bytes.push_back(static_cast<std::uint8_t>(base + rng.next_below(100)));
        }
    }
    return bytes;
}

/// Every metrics report produced by the suite goes through this check.
inline void expect_metric_ordering(const MetricsReport& report)
{
    EXPECT_LE(report.correct, report.isolated);
    EXPECT_LE(report.test_accuracy, report.categorical_isolation);
}

}  // namespace gatenet::testing
