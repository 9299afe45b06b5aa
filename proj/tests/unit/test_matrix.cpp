#include "rpsft/error.hpp"
#include "rpsft/matrix.hpp"
#include "rpsft/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace rpsft;

TEST(DenseMatrix, RejectsBadExternalData) {
    EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), ValidationError);
    EXPECT_THROW(DenseMatrix(1, 2, std::vector<double>{1, std::nan("")}), ValidationError);
    EXPECT_THROW(DenseMatrix(1, 1, std::vector<double>{std::numeric_limits<double>::infinity()}), ValidationError);
    EXPECT_THROW(DenseMatrix(0, 3), ParameterError);
}

TEST(DenseMatrix, ProductsAgree) {
    Rng rng(3);
    const DenseMatrix a = rng.gaussian(4, 3);
    const DenseMatrix b = rng.gaussian(4, 5);
    const DenseMatrix c = rng.gaussian(6, 3);
    EXPECT_LT(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)), 1e-14);
    EXPECT_LT(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))), 1e-14);
    EXPECT_THROW(matmul(a, b), ParameterError);
}

TEST(DenseMatrix, NormsAndBlocks) {
    const DenseMatrix m{{3, 0}, {0, -4}};
    EXPECT_EQ(squared_norm(m), 25.0);
    EXPECT_EQ(frobenius_norm(m), 5.0);
    EXPECT_EQ(max_abs(m), 4.0);
    EXPECT_EQ(leading_columns(m, 1)(1, 0), 0.0);
    EXPECT_EQ(leading_block(m, 1, 1)(0, 0), 3.0);
    EXPECT_TRUE(bitwise_equal(m, DenseMatrix{{3, 0}, {0, -4}}));
    EXPECT_FALSE(bitwise_equal(m, DenseMatrix{{3, 0}, {-0.0, -4}}));
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42);
    Rng b(42);
    EXPECT_TRUE(bitwise_equal(a.gaussian(5, 5), b.gaussian(5, 5)));
    EXPECT_NE(Rng::derive(1, 2), Rng::derive(1, 3));
    const auto p = Rng(7).permutation(10);
    std::vector<bool> seen(10, false);
    for (auto i : p) {
        seen[i] = true;
    }
    EXPECT_EQ(std::count(seen.begin(), seen.end(), true), 10);
}
