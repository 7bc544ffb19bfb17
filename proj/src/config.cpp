#include "gatenet/config.hpp"

#include <algorithm>
#include <fstream>
#include <type_traits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gatenet {

namespace {

using json = nlohmann::ordered_json;

template <typename T>
void read_field(const json& j, const char* key, T& out)
{
    const auto it = j.find(key);
    if (it == j.end())
        return;
    try {
        if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string())
                throw ConfigError(std::string("config key '") + key + "' must be a string");
            out = it->template get<std::string>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number())
                throw ConfigError(std::string("config key '") + key + "' must be a number");
            out = it->template get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_unsigned())
                throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
            out = it->template get<T>();
        } else {
            if (!it->is_array())
                throw ConfigError(std::string("config key '") + key + "' must be an array of integers");
            T values;
            for (const auto& v : *it) {
                if (!v.is_number_unsigned())
                    throw ConfigError(std::string("config key '") + key + "' must be an array of positive integers");
                values.push_back(v.template get<typename T::value_type>());
            }
            out = std::move(values);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

const std::vector<std::string>& known_keys()
{
    static const std::vector<std::string> keys{
        "data_dir", "out_dir",      "seed",         "hidden_sizes",         "dropout",     "lr",
        "batch_size", "epochs_base", "epochs_gates", "val_fraction", "val_interval_updates", "rmsprop_rho",
        "rmsprop_eps"};
    return keys;
}

}  // namespace

MlpConfig RunConfig::mlp() const
{
    MlpConfig config;
    config.hidden_sizes = hidden_sizes;
    config.dropout_rate = dropout;
    return config;
}

TrainSchedule RunConfig::schedule() const
{
    TrainSchedule schedule;
    schedule.epochs_base = epochs_base;
    schedule.epochs_gates = epochs_gates;
    schedule.batch_size = batch_size;
    schedule.val_interval_updates = val_interval_updates;
    schedule.rmsprop = {lr, rmsprop_rho, rmsprop_eps};
    schedule.seed = seed;
    return schedule;
}

void RunConfig::validate() const
{
    mlp().validate();
    schedule().validate();
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must lie in (0, 1), got " + std::to_string(val_fraction));
    if (!(lr > 0.0))
        throw ConfigError("lr must be positive");
    if (!(rmsprop_rho >= 0.0 && rmsprop_rho < 1.0))
        throw ConfigError("rmsprop_rho must lie in [0, 1)");
    if (!(rmsprop_eps > 0.0))
        throw ConfigError("rmsprop_eps must be positive");
}

RunConfig parse_config(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const auto& keys = known_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown config key '" + key + "'");
    }

    RunConfig config;
    read_field(j, "data_dir", config.data_dir);
    read_field(j, "out_dir", config.out_dir);
    read_field(j, "seed", config.seed);
    read_field(j, "hidden_sizes", config.hidden_sizes);
    read_field(j, "dropout", config.dropout);
    read_field(j, "lr", config.lr);
    read_field(j, "batch_size", config.batch_size);
    read_field(j, "epochs_base", config.epochs_base);
    read_field(j, "epochs_gates", config.epochs_gates);
    read_field(j, "val_fraction", config.val_fraction);
    read_field(j, "val_interval_updates", config.val_interval_updates);
    read_field(j, "rmsprop_rho", config.rmsprop_rho);
    read_field(j, "rmsprop_eps", config.rmsprop_eps);
    return config;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

DataSplit make_split(const CifarData& data, const RunConfig& config)
{
    RngStream rng = RngStream(config.seed).child("split");
    DataSplit split = split_train_val(data.train, config.val_fraction, rng);
    split.test = data.test;
    return split;
}

std::string config_json(const RunConfig& config)
{
    json j;
    j["data_dir"] = config.data_dir;
    j["out_dir"] = config.out_dir;
    j["seed"] = config.seed;
    j["hidden_sizes"] = config.hidden_sizes;
    j["dropout"] = config.dropout;
    j["lr"] = config.lr;
    j["batch_size"] = config.batch_size;
    j["epochs_base"] = config.epochs_base;
    j["epochs_gates"] = config.epochs_gates;
    j["val_fraction"] = config.val_fraction;
    j["val_interval_updates"] = config.val_interval_updates;
    j["rmsprop_rho"] = config.rmsprop_rho;
    j["rmsprop_eps"] = config.rmsprop_eps;
    return j.dump(2) + "\n";
}

}  // namespace gatenet
