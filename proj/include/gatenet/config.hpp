#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gatenet/nn.hpp"
#include "gatenet/train.hpp"

namespace gatenet {

struct RunConfig
{
    std::string data_dir = "data/cifar-10-batches-bin";
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::vector<Eigen::Index> hidden_sizes{256, 128};
    double dropout = 0.5;
    double lr = 1e-2;
    std::size_t batch_size = 32;
    int epochs_base = 30;
    int epochs_gates = 15;
    double val_fraction = 0.1;
    std::size_t val_interval_updates = 200;
    double rmsprop_rho = 0.99;
    double rmsprop_eps = 1e-8;

    MlpConfig mlp() const;
    TrainSchedule schedule() const;
    void validate() const;
};

/// Strict parse: unknown keys and mistyped values throw ConfigError, missing
/// keys keep their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// The run's train/validation split of `data.train` (drawn from the seed's
/// "split" stream), with `data.test` attached.
DataSplit make_split(const CifarData& data, const RunConfig& config);

/// All fields, in declaration order.
std::string config_json(const RunConfig& config);

}  // namespace gatenet
