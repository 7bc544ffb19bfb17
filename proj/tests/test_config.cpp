#include <gtest/gtest.h>

#include "gatenet/config.hpp"

using namespace gatenet;

TEST(Config, EmptyObjectGivesDefaults)
{
    const auto c = parse_config("{}");
    EXPECT_EQ(c.hidden_sizes, (std::vector<Eigen::Index>{256, 128}));
    EXPECT_EQ(c.dropout, 0.5);
    EXPECT_EQ(c.lr, 1e-2);
    EXPECT_EQ(c.batch_size, 32u);
    EXPECT_EQ(c.val_fraction, 0.1);
    EXPECT_EQ(c.epochs_base, 30);
    EXPECT_EQ(c.epochs_gates, 15);
    EXPECT_EQ(c.val_interval_updates, 200u);
    EXPECT_EQ(c.rmsprop_rho, 0.99);
    EXPECT_EQ(c.rmsprop_eps, 1e-8);
    EXPECT_EQ(c.seed, 0u);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, SingleOverride)
{
    const auto c = parse_config(R"({"lr": 0.01})");
    EXPECT_EQ(c.lr, 0.01);
    EXPECT_EQ(c.batch_size, 32u);
    const auto d = parse_config(R"({"hidden_sizes": [64, 32, 16], "seed": 7, "data_dir": "x"})");
    EXPECT_EQ(d.hidden_sizes, (std::vector<Eigen::Index>{64, 32, 16}));
    EXPECT_EQ(d.seed, 7u);
    EXPECT_EQ(d.data_dir, "x");
}

TEST(Config, UnknownKeyNamed)
{
    try {
        parse_config(R"({"learning_rate": 0.01})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
    }
}

TEST(Config, TypeMismatches)
{
    EXPECT_THROW(parse_config(R"({"lr": "fast"})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"batch_size": 3.5})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"seed": -1})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"hidden_sizes": 256})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"data_dir": 3})"), ConfigError);
    EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
    EXPECT_THROW(parse_config("{"), ConfigError);
}

TEST(Config, IntegerLiteralAcceptedForReal)
{
    EXPECT_EQ(parse_config(R"({"dropout": 0})").dropout, 0.0);
}

TEST(Config, RoundTripThroughJson)
{
    auto c = parse_config(R"({"lr": 0.003, "epochs_base": 2})");
    const auto again = parse_config(config_json(c));
    EXPECT_EQ(config_json(again), config_json(c));
    EXPECT_EQ(again.lr, 0.003);
}

TEST(Config, InvalidValuesRejected)
{
    EXPECT_THROW(parse_config(R"({"val_fraction": 1.5})").validate(), Error);
    EXPECT_THROW(parse_config(R"({"dropout": 1.0})").validate(), Error);
    EXPECT_THROW(parse_config(R"({"batch_size": 0})").validate(), Error);
}

TEST(Config, MissingFile)
{
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}
