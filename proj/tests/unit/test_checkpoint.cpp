#include "rpsft/checkpoint.hpp"
#include "rpsft/error.hpp"
#include "rpsft/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace rpsft;

namespace {

NamedTensors sample() {
    Rng rng(1);
    return {{"a", rng.gaussian(3, 2)}, {"bb", rng.gaussian(1, 4)}};
}

std::uint64_t read_offset(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_checkpoint(bytes);
    } catch (const FormatError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "expected FormatError";
    return 0;
}

} // namespace

TEST(Checkpoint, Layout) {
    const NamedTensors t{{"w", DenseMatrix{{1.5}}}};
    const auto bytes = encode_checkpoint(t);
    ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 + 1 + 8 + 8 + 8);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RPSV");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 1);
    EXPECT_EQ(bytes[12], 1);
    EXPECT_EQ(bytes[14], 'w');
    EXPECT_EQ(bytes[15], 1);
    EXPECT_EQ(bytes[23], 1);
    EXPECT_EQ(bytes[37], 0xF8);
    EXPECT_EQ(bytes[38], 0x3F);
}

TEST(Checkpoint, RoundTripBytes) {
    const auto bytes = encode_checkpoint(sample());
    const NamedTensors back = decode_checkpoint(bytes);
    EXPECT_EQ(encode_checkpoint(back), bytes);
    EXPECT_TRUE(bitwise_equal(back[0].second, sample()[0].second));
}

TEST(Checkpoint, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "rpsft_ckpt_test.rpsv";
    const ModelParams m = init_model(Architecture::two_layer_tanh, 4, 3, 5, 7, 1.0);
    save_checkpoint(path, to_tensors(m));
    const ModelParams back = model_from_tensors(load_checkpoint(path));
    EXPECT_EQ(back.architecture(), Architecture::two_layer_tanh);
    EXPECT_TRUE(bitwise_equal(back.layer("hidden.weight"), m.layer("hidden.weight")));
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, Bases) {
    Rng rng(2);
    const DenseMatrix w = rng.gaussian(5, 4);
    const BasisSet set{{"lin", build_basis("lin", w, 2)}};
    const NamedTensors t = to_tensors(set);
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0].first, "lin.Uk");
    const BasisSet back = bases_from_tensors(t);
    EXPECT_TRUE(bitwise_equal(back.at("lin").S_ref(), set.at("lin").S_ref()));
}

TEST(Checkpoint, Truncated) {
    auto bytes = encode_checkpoint(sample());
    bytes.resize(bytes.size() - 3);
    EXPECT_GT(read_offset(bytes), 12u);
    EXPECT_EQ(read_offset({'R', 'P'}), 0u);
}

TEST(Checkpoint, BadMagicAndVersion) {
    auto bytes = encode_checkpoint(sample());
    bytes[0] = 'X';
    EXPECT_EQ(read_offset(bytes), 0u);
    bytes = encode_checkpoint(sample());
    bytes[4] = 2;
    EXPECT_EQ(read_offset(bytes), 4u);
}

TEST(Checkpoint, DuplicateNames) {
    const NamedTensors dup{{"a", DenseMatrix{{1.0}}}, {"a", DenseMatrix{{2.0}}}};
    EXPECT_THROW(encode_checkpoint(dup), ParameterError);
    auto bytes = encode_checkpoint({{"a", DenseMatrix{{1.0}}}, {"b", DenseMatrix{{2.0}}}});
    bytes[14 + 1 + 24 + 2] = 'a';
    EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, TrailingBytesAndNonFinite) {
    auto bytes = encode_checkpoint(sample());
    bytes.push_back(0);
    EXPECT_EQ(read_offset(bytes), bytes.size() - 1);
    auto nan = encode_checkpoint({{"x", DenseMatrix{{1.0}}}});
    nan[37] = 0xF8;
    nan[38] = 0x7F;
    EXPECT_THROW(decode_checkpoint(nan), FormatError);
}
