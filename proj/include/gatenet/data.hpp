#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gatenet/ndcore.hpp"

namespace gatenet {

inline constexpr std::size_t kImagePixels = 32 * 32;
inline constexpr std::size_t kRecordBytes = 1 + 3 * kImagePixels;
inline constexpr std::size_t kRecordsPerFile = 10000;
inline constexpr std::size_t kBatchFileBytes = kRecordsPerFile * kRecordBytes;
inline constexpr int kNumClasses = 10;

/// Class names plus the oracle grouping of classes into categories.
struct Taxonomy
{
    std::vector<std::string> class_names;
    std::vector<std::string> categories;
    /// category_of[class] is an index into `categories`.
    std::vector<std::size_t> category_of;

    /// airplane..truck, split into vehicles {airplane, automobile, ship, truck}
    /// and animals {bird, cat, deer, dog, frog, horse}.
    static Taxonomy cifar10();

    std::size_t num_classes() const { return class_names.size(); }
    std::size_t num_categories() const { return categories.size(); }

    /// Throws UnknownCategoryError listing the valid names.
    std::size_t category_index(std::string_view name) const;
    const std::string& category_of_class(int label) const;
    std::vector<int> classes_in(std::size_t category) const;
    bool same_category(int a, int b) const { return category_of.at(a) == category_of.at(b); }

    /// Checks that every class maps to exactly one known category.
    void validate() const;
};

struct RawRecord
{
    std::uint8_t label;
    std::array<std::uint8_t, 3 * kImagePixels> rgb;  // 1024 R, then 1024 G, then 1024 B
};

/// Splits a CIFAR-10 binary batch into its 3073-byte records, in file order.
std::vector<RawRecord> parse_cifar_batch(std::span<const std::uint8_t> bytes);

/// BT.601 luma, range [0, 255].
float to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct NormStats
{
    float mean = 0.0f;
    float std = 1.0f;
};

/// (gray / 255 - mean) / std.
float normalize(float gray, const NormStats& stats);

struct LabeledImage
{
    TensorF pixels;  // 1 x 1024
    int label;
};

/// A list of labeled images stored as one row-major pixel matrix.
/// `source_index` records where each row came from in the list it was cut
/// from, so disjointness of derived sets can be checked by provenance.
struct ImageSet
{
    TensorF pixels;
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> source_index;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }
    LabeledImage at(std::size_t i) const;
};

/// Rows `rows` of `images`, in the given order. Provenance is carried over.
ImageSet subset(const ImageSet& images, std::span<const std::size_t> rows);

/// Concatenates sets; provenance indices are renumbered 0..n-1.
ImageSet concat(std::span<const ImageSet> parts);

/// Grayscale images in [0, 255] from decoded records.
ImageSet to_grayscale_images(std::span<const RawRecord> records);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

ImageSet load_cifar_file(const std::filesystem::path& path);

struct CifarData
{
    ImageSet train;  // 50,000 rows from data_batch_1..5, in file order
    ImageSet test;   // 10,000 rows from test_batch
};

std::vector<std::string> cifar_train_files();
inline constexpr std::string_view kCifarTestFile = "test_batch.bin";

/// Loads the grayscale (un-normalized) train and test sets from `dir`.
CifarData load_cifar10(const std::filesystem::path& dir);

/// One line per missing or missized file; empty when the directory is complete.
std::vector<std::string> verify_cifar_dir(const std::filesystem::path& dir);

struct DataSplit
{
    ImageSet train;
    ImageSet val;
    ImageSet test;
};

/// Stratified split: per class, round(frac * count) images chosen uniformly
/// without replacement go to `val`. Both halves keep input order. `test` is
/// left empty.
DataSplit split_train_val(const ImageSet& images, double frac, RngStream& rng);

/// Global scalar mean/std over every pixel of `gray` after /255 scaling.
NormStats compute_norm_stats(const ImageSet& gray);

void normalize_in_place(ImageSet& images, const NormStats& stats);

/// Images whose label belongs to `category`, order preserved.
ImageSet filter_by_category(const ImageSet& images, std::string_view category, const Taxonomy& taxonomy);

/// One epoch of mini-batches over `n` items: a fresh uniform shuffle cut into
/// consecutive batches; the final short batch is kept.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, RngStream& rng);

}  // namespace gatenet
