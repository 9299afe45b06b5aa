#include "rpsft/diagnostics.hpp"
#include "rpsft/error.hpp"
#include "rpsft/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace rpsft;

namespace {

DenseMatrix rotate_columns(const DenseMatrix& Q, std::size_t a, std::size_t b, double degrees) {
    const double t = degrees * std::acos(-1.0) / 180.0;
    DenseMatrix out = Q;
    for (std::size_t i = 0; i < Q.rows(); ++i) {
        out(i, a) = std::cos(t) * Q(i, a) + std::sin(t) * Q(i, b);
        out(i, b) = -std::sin(t) * Q(i, a) + std::cos(t) * Q(i, b);
    }
    return out;
}

DenseMatrix with_spectrum(const DenseMatrix& U, const DenseMatrix& V, const std::vector<double>& s) {
    DenseMatrix us = U;
    for (std::size_t i = 0; i < us.rows(); ++i) {
        for (std::size_t j = 0; j < us.cols(); ++j) {
            us(i, j) *= s[j];
        }
    }
    return matmul_nt(us, V);
}

} // namespace

TEST(Fisher, DiagonalSingleEntry) {
    const DenseMatrix w{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}};
    const SvdResult svd = svd_full(w, "w");
    GradientBatch b{{DenseMatrix{{0, 0, 0}, {0, 1, 0}, {0, 0, 0}}}};
    const auto curve = fisher_energy_curve(b, svd, {1, 2, 3});
    EXPECT_EQ(curve[0].y, 0.0);
    EXPECT_DOUBLE_EQ(curve[1].y, 1.0);
    EXPECT_DOUBLE_EQ(curve[2].y, 1.0);
    EXPECT_DOUBLE_EQ(curve[0].x, 1.0 / 9.0);
}

TEST(Fisher, MonotoneAndComplete) {
    Rng rng(2);
    const DenseMatrix w = rng.gaussian(7, 7);
    GradientBatch b;
    for (int t = 0; t < 20; ++t) {
        b.samples.push_back(rng.gaussian(7, 7));
    }
    std::vector<std::size_t> ranks(7);
    std::iota(ranks.begin(), ranks.end(), std::size_t{1});
    const auto curve = fisher_energy_curve(b, svd_full(w, "w"), ranks);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        EXPECT_GE(curve[i].y, curve[i - 1].y);
    }
    EXPECT_NEAR(curve.back().y, 1.0, 1e-12);
}

TEST(Fisher, ErrorPaths) {
    const SvdResult svd = svd_full(DenseMatrix{{1, 0}, {0, 1}}, "w");
    GradientBatch zero{{DenseMatrix(2, 2, 0.0)}};
    EXPECT_THROW(fisher_energy_curve(zero, svd, {1}), NumericalError);
    GradientBatch ok{{DenseMatrix{{1, 0}, {0, 1}}}};
    EXPECT_THROW(fisher_energy_curve(ok, svd, {2, 1}), ParameterError);
    EXPECT_THROW(fisher_energy_curve(ok, svd, {3}), ParameterError);
    EXPECT_THROW(GradientBatch{}.validate(), ParameterError);
}

TEST(FirstOrder, SignFollowsAlignment) {
    const LayerMap base{{"a.weight", DenseMatrix{{0, 0}, {0, 0}}}};
    const LayerMap down{{"a.weight", DenseMatrix{{-1, 0}, {0, 0}}}};
    std::map<std::string, GradientBatch> grads{{"a.weight", GradientBatch{{DenseMatrix{{2, 0}, {0, 0}}}}}};
    const auto groups = default_layer_groups(base);
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].first, "a");
    const auto s = first_order_signal(base, down, grads, groups);
    EXPECT_DOUBLE_EQ(s.at(0).m, -2.0);
    EXPECT_EQ(first_order_signal(base, base, grads, groups).at(0).m, 0.0);
}

TEST(Rotation, IdenticalIsExactlyZero) {
    Rng rng(3);
    const DenseMatrix w = rng.gaussian(8, 6);
    EXPECT_EQ(mean_left_rotation(w, w, 3), 0.0);
}

TEST(Rotation, PlantedAngle) {
    Rng rng(4);
    const DenseMatrix U = complete_orthogonal(orthonormalize_columns(rng.gaussian(8, 1)));
    const DenseMatrix V = complete_orthogonal(orthonormalize_columns(rng.gaussian(4, 1)));
    const std::vector<double> s{8, 6, 4, 2};
    const DenseMatrix U4 = leading_columns(U, 4);
    const DenseMatrix base = with_spectrum(U4, V, s);
    DenseMatrix Ut = rotate_columns(U, 0, 5, 25.0);
    const DenseMatrix tuned = with_spectrum(leading_columns(Ut, 4), V, s);
    EXPECT_NEAR(mean_left_rotation(base, tuned, 1), 25.0, 1e-8);
    EXPECT_NEAR(mean_left_rotation(base, tuned, 2), 12.5, 1e-8);
}

TEST(Rotation, ScaleInvariant) {
    Rng rng(5);
    const DenseMatrix a = rng.gaussian(6, 6);
    const DenseMatrix b = a + rng.gaussian(6, 6, 0.2);
    EXPECT_NEAR(mean_left_rotation(a, b, 3), mean_left_rotation(7.0 * a, 7.0 * b, 3), 1e-9);
}

TEST(Rotation, LayerwiseWarnsOnMissing) {
    Rng rng(6);
    const LayerMap base{{"l1.weight", rng.gaussian(4, 4)}, {"l2.bias", rng.gaussian(4, 1)}};
    const LayerMap tuned{{"l1.weight", base.at("l1.weight")}};
    const RotationReport r = rotation_layerwise(base, tuned, {"weight", "bias"});
    ASSERT_EQ(r.layers.size(), 1u);
    EXPECT_EQ(r.layers[0].layer, "l1");
    EXPECT_EQ(r.layers[0].degrees, 0.0);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Rotation, RankwiseMatchesMeanRotation) {
    Rng rng(7);
    const DenseMatrix a = rng.gaussian(6, 5);
    const DenseMatrix b = a + rng.gaussian(6, 5, 0.3);
    const auto rw = rotation_rankwise(a, b, {1, 3, 5});
    ASSERT_EQ(rw.size(), 3u);
    EXPECT_DOUBLE_EQ(rw[1].degrees, mean_left_rotation(a, b, 3));
    EXPECT_THROW(rotation_rankwise(a, b, {6}), ParameterError);
}

TEST(HiddenDrift, Translation) {
    Rng rng(8);
    const DenseMatrix base = rng.gaussian(20, 4);
    const std::vector<double> v{0.3, -1.2, 0.0, 2.0};
    DenseMatrix moved = base;
    for (std::size_t i = 0; i < moved.rows(); ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            moved(i, j) += v[j];
        }
    }
    const HiddenDrift d = hidden_drift({{"base", "A", base}, {"tuned", "A", moved}}, "base");
    const double norm = std::sqrt(0.09 + 1.44 + 4.0);
    EXPECT_NEAR(d.models.at(1).d_hidden, norm, 1e-12);
    EXPECT_EQ(d.models.at(0).d_hidden, 0.0);
    EXPECT_LE(d.models.at(1).d_pca, d.models.at(1).d_hidden + 1e-12);
    EXPECT_EQ(d.pca_coords.rows(), 40u);
    EXPECT_EQ(d.sample_models.back(), "tuned");
}

TEST(HiddenDrift, Rejects) {
    const DenseMatrix x(3, 2, 1.0);
    EXPECT_THROW(hidden_drift({{"a", "A", x}}, "base"), ParameterError);
    EXPECT_THROW(hidden_drift({{"base", "A", x}, {"base", "A", x}}, "base"), ParameterError);
    EXPECT_THROW(hidden_drift({{"base", "A", x}, {"t", "B", x}}, "base"), ParameterError);
    EXPECT_THROW(hidden_drift({{"base", "A", x}, {"t", "A", DenseMatrix(3, 3, 1.0)}}, "base"), ParameterError);
}

TEST(Entropy, Endpoints) {
    const ProbSequence uniform{{{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}}};
    const ProbSequence onehot{{{0, 1, 0, 0}}};
    const EntropyProfile e = entropy_profile({uniform, onehot});
    EXPECT_DOUBLE_EQ(e.e_values[0], std::log(4.0));
    EXPECT_EQ(e.e_values[1], 0.0);
    ASSERT_TRUE(e.kde.has_value());
    EXPECT_EQ(e.kde->grid.size(), kKdeGridPoints);
}

TEST(Entropy, SingleSequenceHasNoKde) {
    const ProbSequence s{{{0.5, 0.5}}};
    EXPECT_FALSE(entropy_profile({s}).kde.has_value());
}

TEST(Entropy, KdeMass) {
    Rng rng(9);
    std::vector<ProbSequence> seqs;
    for (int n = 0; n < 40; ++n) {
        ProbSequence s;
        for (int t = 0; t < 5; ++t) {
            std::vector<double> p(6);
            double sum = 0;
            for (double& x : p) {
                x = rng.uniform() + 1e-3;
                sum += x;
            }
            for (double& x : p) {
                x /= sum;
            }
            s.steps.push_back(p);
        }
        seqs.push_back(s);
    }
    const EntropyProfile e = entropy_profile(seqs);
    ASSERT_TRUE(e.kde.has_value());
    double mass = 0;
    for (std::size_t i = 1; i < e.kde->grid.size(); ++i) {
        mass += 0.5 * (e.kde->density[i] + e.kde->density[i - 1]) * (e.kde->grid[i] - e.kde->grid[i - 1]);
    }
    EXPECT_NEAR(mass, 1.0, 1e-3);
}

TEST(Entropy, Bandwidth) {
    EXPECT_EQ(kde_bandwidth(1.0, 32), 0.53);
    EXPECT_THROW(kde_bandwidth(1.0, 0), ParameterError);
}

TEST(Entropy, Validation) {
    EXPECT_THROW((ProbSequence{{{0.5, 0.6}}}.validate()), ValidationError);
    EXPECT_THROW((ProbSequence{{{0.5, 0.5}, {1.0}}}.validate()), ValidationError);
    EXPECT_THROW(ProbSequence{}.validate(), ValidationError);
    ProbSequence long_seq;
    long_seq.steps.assign(3, {1.0});
    EXPECT_THROW(long_seq.validate(2), ValidationError);
}
