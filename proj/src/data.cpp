#include "gatenet/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

namespace gatenet {

Taxonomy Taxonomy::cifar10()
{
    Taxonomy t;
    t.class_names = {"airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"};
    t.categories = {"vehicles", "animals"};
    t.category_of = {0, 0, 1, 1, 1, 1, 1, 1, 0, 0};
    return t;
}

std::size_t Taxonomy::category_index(std::string_view name) const
{
    for (std::size_t c = 0; c < categories.size(); ++c)
        if (categories[c] == name)
            return c;
    std::string valid;
    for (const auto& c : categories)
        valid += (valid.empty() ? "" : ", ") + c;
    throw UnknownCategoryError("unknown category '" + std::string(name) + "' (valid: " + valid + ")");
}

const std::string& Taxonomy::category_of_class(int label) const
{
    return categories.at(category_of.at(static_cast<std::size_t>(label)));
}

std::vector<int> Taxonomy::classes_in(std::size_t category) const
{
    std::vector<int> out;
    for (std::size_t k = 0; k < category_of.size(); ++k)
        if (category_of[k] == category)
            out.push_back(static_cast<int>(k));
    return out;
}

void Taxonomy::validate() const
{
    if (category_of.size() != class_names.size())
        throw ArgumentError("taxonomy: " + std::to_string(class_names.size()) + " classes but " +
                            std::to_string(category_of.size()) + " category assignments");
    for (std::size_t k = 0; k < category_of.size(); ++k)
        if (category_of[k] >= categories.size())
            throw ArgumentError("taxonomy: class '" + class_names[k] + "' maps to no known category");
}

std::vector<RawRecord> parse_cifar_batch(std::span<const std::uint8_t> bytes)
{
    if (bytes.empty() || bytes.size() % kRecordBytes != 0)
        throw MalformedFileError("CIFAR-10 batch of " + std::to_string(bytes.size()) +
                                 " bytes is not a positive multiple of the " + std::to_string(kRecordBytes) +
                                 "-byte record size");
    std::vector<RawRecord> records(bytes.size() / kRecordBytes);
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto record = bytes.subspan(r * kRecordBytes, kRecordBytes);
        if (record[0] >= kNumClasses)
            throw CorruptRecordError(r, record[0]);
        records[r].label = record[0];
        std::copy(record.begin() + 1, record.end(), records[r].rgb.begin());
    }
    return records;
}

float to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
    return static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
}

float normalize(float gray, const NormStats& stats)
{
    if (!(stats.std > 0.0f))
        throw DegenerateStatisticsError("normalization std must be positive, got " + std::to_string(stats.std));
    return (gray / 255.0f - stats.mean) / stats.std;
}

LabeledImage ImageSet::at(std::size_t i) const
{
    return LabeledImage{pixels.row(static_cast<Eigen::Index>(i)), labels.at(i)};
}

ImageSet subset(const ImageSet& images, std::span<const std::size_t> rows)
{
    ImageSet out;
    out.pixels.resize(static_cast<Eigen::Index>(rows.size()), images.pixels.cols());
    out.labels.reserve(rows.size());
    out.source_index.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.pixels.row(static_cast<Eigen::Index>(i)) = images.pixels.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(images.labels[rows[i]]);
        out.source_index.push_back(images.source_index[rows[i]]);
    }
    return out;
}

ImageSet concat(std::span<const ImageSet> parts)
{
    std::size_t total = 0;
    Eigen::Index width = parts.empty() ? static_cast<Eigen::Index>(kImagePixels) : parts.front().pixels.cols();
    for (const auto& p : parts)
        total += p.size();
    ImageSet out;
    out.pixels.resize(static_cast<Eigen::Index>(total), width);
    Eigen::Index row = 0;
    for (const auto& p : parts) {
        out.pixels.middleRows(row, p.pixels.rows()) = p.pixels;
        row += p.pixels.rows();
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    out.source_index.resize(total);
    for (std::size_t i = 0; i < total; ++i)
        out.source_index[i] = i;
    return out;
}

ImageSet to_grayscale_images(std::span<const RawRecord> records)
{
    ImageSet out;
    out.pixels.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(kImagePixels));
    out.labels.reserve(records.size());
    out.source_index.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rgb = records[r].rgb;
        for (std::size_t p = 0; p < kImagePixels; ++p)
            out.pixels(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) =
                to_grayscale(rgb[p], rgb[kImagePixels + p], rgb[2 * kImagePixels + p]);
        out.labels.push_back(records[r].label);
        out.source_index.push_back(r);
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ImageSet load_cifar_file(const std::filesystem::path& path)
{
    const auto bytes = read_file_bytes(path);
    try {
        return to_grayscale_images(parse_cifar_batch(bytes));
    } catch (const MalformedFileError& e) {
        throw MalformedFileError(path.string() + ": " + e.what());
    }
}

std::vector<std::string> cifar_train_files()
{
    std::vector<std::string> files;
    for (int i = 1; i <= 5; ++i)
        files.push_back("data_batch_" + std::to_string(i) + ".bin");
    return files;
}

CifarData load_cifar10(const std::filesystem::path& dir)
{
    std::vector<ImageSet> parts;
    for (const auto& name : cifar_train_files())
        parts.push_back(load_cifar_file(dir / name));
    CifarData data;
    data.train = concat(parts);
    parts.clear();
    data.test = load_cifar_file(dir / kCifarTestFile);
    return data;
}

std::vector<std::string> verify_cifar_dir(const std::filesystem::path& dir)
{
    auto files = cifar_train_files();
    files.emplace_back(kCifarTestFile);
    std::vector<std::string> problems;
    for (const auto& name : files) {
        const auto path = dir / name;
        std::error_code ec;
        if (!std::filesystem::is_regular_file(path, ec)) {
            problems.push_back(path.string() + ": missing (expected " + std::to_string(kBatchFileBytes) + " bytes)");
            continue;
        }
        const auto size = std::filesystem::file_size(path, ec);
        if (ec || size != kBatchFileBytes)
            problems.push_back(path.string() + ": " + std::to_string(size) + " bytes, expected " +
                               std::to_string(kBatchFileBytes));
    }
    return problems;
}

DataSplit split_train_val(const ImageSet& images, double frac, RngStream& rng)
{
    if (images.empty())
        throw EmptyDatasetError("split_train_val: empty dataset");
    if (!(frac > 0.0 && frac < 1.0))
        throw ArgumentError("split_train_val: fraction must lie in (0, 1), got " + std::to_string(frac));

    int max_label = 0;
    for (auto l : images.labels)
        max_label = std::max<int>(max_label, l);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < images.size(); ++i)
        by_class[images.labels[i]].push_back(i);

    std::vector<bool> in_val(images.size(), false);
    for (auto& members : by_class) {
        const auto take = static_cast<std::size_t>(std::llround(frac * static_cast<double>(members.size())));
        rng.shuffle(members);
        for (std::size_t j = 0; j < take; ++j)
            in_val[members[j]] = true;
    }

    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t i = 0; i < images.size(); ++i)
        (in_val[i] ? val_rows : train_rows).push_back(i);

    DataSplit split;
    split.train = subset(images, train_rows);
    split.val = subset(images, val_rows);
    return split;
}

NormStats compute_norm_stats(const ImageSet& gray)
{
    if (gray.empty())
        throw EmptyDatasetError("compute_norm_stats: empty dataset");
    const auto n = static_cast<double>(gray.pixels.size());
    const auto scaled = [&](Eigen::Index i) { return static_cast<double>(gray.pixels.data()[i]) / 255.0; };
    double sum = 0.0;
    for (Eigen::Index i = 0; i < gray.pixels.size(); ++i)
        sum += scaled(i);
    const double mean = sum / n;
    double sum_sq = 0.0;
    for (Eigen::Index i = 0; i < gray.pixels.size(); ++i) {
        const double d = scaled(i) - mean;
        sum_sq += d * d;
    }
    const double var = sum_sq / n;
    NormStats stats{static_cast<float>(mean), static_cast<float>(std::sqrt(var))};
    if (!(stats.std > 0.0f) || gray.pixels.minCoeff() == gray.pixels.maxCoeff())
        throw DegenerateStatisticsError("compute_norm_stats: pixel standard deviation is zero");
    return stats;
}

void normalize_in_place(ImageSet& images, const NormStats& stats)
{
    if (!(stats.std > 0.0f))
        throw DegenerateStatisticsError("normalization std must be positive, got " + std::to_string(stats.std));
    images.pixels = images.pixels.unaryExpr([&](float g) { return normalize(g, stats); });
}

ImageSet filter_by_category(const ImageSet& images, std::string_view category, const Taxonomy& taxonomy)
{
    const auto c = taxonomy.category_index(category);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (taxonomy.category_of.at(images.labels[i]) == c)
            rows.push_back(i);
    return subset(images, rows);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, RngStream& rng)
{
    if (batch_size == 0)
        throw ArgumentError("mini-batch size must be at least 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const auto stop = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

}  // namespace gatenet
