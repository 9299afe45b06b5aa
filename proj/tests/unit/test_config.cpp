#include "rpsft/config.hpp"
#include "rpsft/error.hpp"

#include <gtest/gtest.h>

using namespace rpsft;

namespace {

Schema schema() {
    Schema s;
    s.push_back({"seed", KeyType::unsigned64, "0", "seed", {}, {}, false, {}});
    s.push_back({"reg.lambda", KeyType::real, "1", "strength", 0.0, {}, false, {}});
    s.push_back({"steps", KeyType::integer, "10", "steps", 1.0, {}, false, {}});
    s.push_back({"lr", KeyType::real, "0.1", "lr", 0.0, {}, true, {}});
    s.push_back({"mode", KeyType::text, "sft", "mode", {}, {}, false, {"sft", "rpsft"}});
    s.push_back({"reg.k", KeyType::rank, "auto", "rank", {}, {}, false, {}});
    s.push_back({"ranks", KeyType::integer_list, "1,2", "ranks", {}, {}, false, {}});
    s.push_back({"verbose", KeyType::boolean, "false", "flag", {}, {}, false, {}});
    return s;
}

std::size_t error_line(const std::string& text, const std::vector<std::string>& overrides = {}) {
    try {
        parse_config(schema(), text, overrides);
    } catch (const ConfigError& e) {
        return e.line();
    }
    ADD_FAILURE() << "expected ConfigError";
    return 999;
}

} // namespace

TEST(Config, DefaultsApplied) {
    const Config c = parse_config(schema(), "");
    EXPECT_EQ(c.real("reg.lambda"), 1.0);
    EXPECT_EQ(c.count("steps"), 10u);
    EXPECT_FALSE(c.rank("reg.k").has_value());
    EXPECT_EQ(c.counts("ranks"), (std::vector<std::size_t>{1, 2}));
    EXPECT_FALSE(c.flag("verbose"));
    EXPECT_EQ(c.lines().front(), "seed = 0");
}

TEST(Config, ParsesLinesAndComments) {
    const Config c = parse_config(schema(), "# header\nreg.lambda = 2.5  # strong\n\nmode=rpsft\nreg.k = 3\n");
    EXPECT_EQ(c.real("reg.lambda"), 2.5);
    EXPECT_EQ(c.text("mode"), "rpsft");
    EXPECT_EQ(*c.rank("reg.k"), 3u);
}

TEST(Config, OverridesWin) {
    const Config c = parse_config(schema(), "steps = 5\n", {"steps=7", "seed=18446744073709551615"});
    EXPECT_EQ(c.count("steps"), 7u);
    EXPECT_EQ(c.seed(), 18446744073709551615ull);
}

TEST(Config, RejectsWithLine) {
    EXPECT_EQ(error_line("steps = 3\nreg.lambda = -1\n"), 2u);
    EXPECT_EQ(error_line("bogus = 1\n"), 1u);
    EXPECT_EQ(error_line("\n\nsteps = 2.5\n"), 3u);
    EXPECT_EQ(error_line("lr = 0\n"), 1u);
    EXPECT_EQ(error_line("mode = adam\n"), 1u);
    EXPECT_EQ(error_line("just words\n"), 1u);
    EXPECT_EQ(error_line("", {"steps=0"}), 0u);
    EXPECT_EQ(error_line("", {"nokey"}), 0u);
    EXPECT_EQ(error_line("reg.k = many\n"), 1u);
    EXPECT_EQ(error_line("verbose = maybe\n"), 1u);
}

TEST(Config, MessageNamesKey) {
    try {
        parse_config(schema(), "steps = 2\nreg.lambda = -1\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "reg.lambda");
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("reg.lambda"), std::string::npos);
    }
}

TEST(Config, Deterministic) {
    const std::string text = "reg.lambda = 0.1\nranks = 1, 4\n";
    EXPECT_TRUE(parse_config(schema(), text) == parse_config(schema(), text));
    EXPECT_EQ(parse_config(schema(), text).lines(), parse_config(schema(), text).lines());
}

TEST(Config, CanonicalReals) {
    EXPECT_EQ(parse_config(schema(), "reg.lambda = 1.0\n").lines(), parse_config(schema(), "reg.lambda = 1\n").lines());
}

TEST(Config, MissingFile) {
    EXPECT_THROW(load_config(schema(), std::filesystem::path("/nonexistent/rpsft.cfg")), IoError);
}
