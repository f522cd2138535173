// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ssplat/core.hpp"
#include "ssplat/errors.hpp"

namespace ssplat {
namespace {

// Rotation about a unit axis by angle θ (Rodrigues), independent of the
// quaternion path under test.
Eigen::Matrix3d axis_angle(const Eigen::Vector3d &axis, double theta) {
    Eigen::Matrix3d Kx;
    Kx << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Eigen::Matrix3d::Identity() + std::sin(theta) * Kx + (1 - std::cos(theta)) * Kx * Kx;
}

TEST(Covariance, IdentityRotationUnitScale) {
    const auto cov = build_covariance({}, {1, 1, 1});
    EXPECT_EQ(cov, Eigen::Matrix3d::Identity());
}

TEST(Covariance, AxisScaleSquares) {
    const auto cov = build_covariance({}, {2, 1, 1});
    Eigen::Matrix3d expected = Eigen::Vector3d(4, 1, 1).asDiagonal();
    EXPECT_EQ(cov, expected);
}

TEST(Covariance, QuarterTurnAboutZSwapsAxes) {
    const auto cov = build_covariance({0.7071f, 0, 0, 0.7071f}, {2, 1, 1});
    const Eigen::Matrix3d R = axis_angle(Eigen::Vector3d::UnitZ(), M_PI / 2);
    const Eigen::Matrix3d S = Eigen::Vector3d(2, 1, 1).asDiagonal();
    const Eigen::Matrix3d oracle = R * S * S.transpose() * R.transpose();
    EXPECT_LE((cov - oracle).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(cov(0, 0), 1.0, 1e-6);
    EXPECT_NEAR(cov(1, 1), 4.0, 1e-6);
    EXPECT_NEAR(cov(2, 2), 1.0, 1e-6);
}

TEST(Covariance, RandomRotationsMatchAxisAngleOracle) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Quaternion q = testing::random_rotation(rng);
        const Vec3 s{float(u(rng)), float(u(rng)), float(u(rng))};
        const double half = std::acos(std::clamp(double(q.w), -1.0, 1.0));
        Eigen::Vector3d axis(q.x, q.y, q.z);
        const Eigen::Matrix3d R = axis.norm() > 1e-12 ? axis_angle(axis.normalized(), 2 * half)
                                                      : Eigen::Matrix3d::Identity();
        const Eigen::Matrix3d S = Eigen::Vector3d(s[0], s[1], s[2]).asDiagonal();
        const Eigen::Matrix3d oracle = R * S * S * R.transpose();
        const auto cov = build_covariance(q, s);
        EXPECT_LE((cov - oracle).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
        EXPECT_EQ((cov - cov.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const double min_s = std::min({s[0], s[1], s[2]});
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        EXPECT_GE(eig.eigenvalues().minCoeff(), double(min_s) * min_s - 1e-9);
    }
}

TEST(Covariance, RejectsInvalidInput) {
    const float nan = std::numeric_limits<float>::quiet_NaN();
    EXPECT_THROW(build_covariance({nan, 0, 0, 0}, {1, 1, 1}), ValidationError);
    EXPECT_THROW(build_covariance({}, {1, nan, 1}), ValidationError);
    EXPECT_THROW(build_covariance({}, {1, 0, 1}), ValidationError);
    EXPECT_THROW(build_covariance({}, {1, -1, 1}), ValidationError);
    EXPECT_THROW(build_covariance({0, 0, 0, 0}, {1, 1, 1}), ValidationError);
}

Codebook random_codebook(std::uint32_t L, std::uint32_t D, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    Codebook cb(0, L, D);
    for (float &v : cb.data()) v = nd(rng);
    return cb;
}

TEST(ReconstructFeature, OneHotSelectsAtom) {
    const auto cb = random_codebook(8, 5, 1);
    const auto f = reconstruct_feature({{3}, {1.0f}}, cb);
    const auto atom = cb.atom(3);
    EXPECT_TRUE(std::equal(f.begin(), f.end(), atom.begin(), atom.end()));
}

TEST(ReconstructFeature, EqualWeightsAverageAtoms) {
    const auto cb = random_codebook(8, 5, 2);
    const auto f = reconstruct_feature({{0, 1}, {0.5f, 0.5f}}, cb);
    for (std::uint32_t d = 0; d < 5; ++d) EXPECT_FLOAT_EQ(f[d], 0.5f * (cb.atom(0)[d] + cb.atom(1)[d]));
}

TEST(ReconstructFeature, MatchesDenseMatvecOracle) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    const std::uint32_t L = 32, D = 24, K = 5;
    const auto cb = random_codebook(L, D, 4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> logits(L);
        for (double &z : logits) z = 2 * nd(rng);
        const auto c = normalize_coefficients(std::span<const double>(logits), K);
        const auto dense = densify(c, L);
        const auto f = reconstruct_feature(c, cb);
        for (std::uint32_t d = 0; d < D; ++d) {
            long double acc = 0;
            for (std::uint32_t l = 0; l < L; ++l) acc += (long double)dense[l] * cb.atom(l)[d];
            EXPECT_NEAR(f[d], double(acc), 1e-6 * std::max(1.0, std::fabs(double(acc))));
        }
        // Convex combination: no coordinate exceeds the largest atom entry.
        float bound = 0;
        for (float v : cb.data()) bound = std::max(bound, std::fabs(v));
        for (float v : f) EXPECT_LE(std::fabs(v), bound + 1e-6f);
    }
}

TEST(ReconstructFeature, RejectsOutOfRangeIndex) {
    const auto cb = random_codebook(8, 5, 5);
    EXPECT_THROW(reconstruct_feature({{8}, {1.0f}}, cb), ValidationError);
}

TEST(Densify, OneHotAtZero) {
    const auto v = densify({{0}, {1.0f}}, 6);
    EXPECT_EQ(v, (std::vector<float>{1, 0, 0, 0, 0, 0}));
}

TEST(Densify, CompactRoundTripOnRandomCoefficients) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint32_t L = 4 + std::uint32_t(rng() % 60);
        const std::uint32_t K = 1 + std::uint32_t(rng() % std::min<std::uint32_t>(L, 8));
        std::vector<double> logits(L);
        for (double &z : logits) z = 3 * nd(rng);
        const auto c = normalize_coefficients(std::span<const double>(logits), K);
        const auto dense = densify(c, L);
        std::size_t nonzero = 0;
        for (float v : dense) nonzero += v != 0.0f;
        EXPECT_LE(nonzero, K);
        EXPECT_EQ(compact(dense, K), c) << "trial " << trial;
    }
}

TEST(Densify, CompactBreaksTiesTowardLowerIndex) {
    const std::vector<float> dense{0.25f, 0.25f, 0.25f, 0.25f, 0.0f};
    const auto c = compact(dense, 2);
    EXPECT_EQ(c.indices, (std::vector<std::uint32_t>{0, 1}));
}

TEST(SparseCoefficients, ValidationRules) {
    EXPECT_NO_THROW((SparseCoefficients{{1, 4}, {0.25f, 0.75f}}.validate(8, 2)));
    EXPECT_THROW((SparseCoefficients{{4, 1}, {0.25f, 0.75f}}.validate(8)), ValidationError);
    EXPECT_THROW((SparseCoefficients{{1, 1}, {0.5f, 0.5f}}.validate(8)), ValidationError);
    EXPECT_THROW((SparseCoefficients{{1, 8}, {0.5f, 0.5f}}.validate(8)), ValidationError);
    EXPECT_THROW((SparseCoefficients{{1, 2}, {0.6f, 0.5f}}.validate(8)), ValidationError);
    EXPECT_THROW((SparseCoefficients{{1, 2}, {1.5f, -0.5f}}.validate(8)), ValidationError);
    EXPECT_THROW((SparseCoefficients{{1, 2}, {0.5f, 0.5f}}.validate(8, 3)), ValidationError);
}

TEST(SceneConfig, Invariants) {
    EXPECT_NO_THROW((SceneConfig{3, 64, 4, 512}.validate()));
    EXPECT_THROW((SceneConfig{3, 4, 5, 8}.validate()), ValidationError);
    EXPECT_THROW((SceneConfig{3, 4, 0, 8}.validate()), ValidationError);
    EXPECT_THROW((SceneConfig{0, 4, 2, 8}.validate()), ValidationError);
}

TEST(Scene, ValidationCatchesBadGaussians) {
    auto scene = testing::random_scene(7, {.gaussians = 10});
    EXPECT_NO_THROW(scene.validate());
    auto dup = scene;
    dup.gaussians[1].id = dup.gaussians[0].id;
    EXPECT_THROW(dup.validate(), ValidationError);
    auto rot = scene;
    rot.gaussians[2].rotation = {1.0f, 0.01f, 0, 0};
    EXPECT_THROW(rot.validate(), ValidationError);
    auto op = scene;
    op.gaussians[3].opacity = 1.5f;
    EXPECT_THROW(op.validate(), ValidationError);
    auto missing = scene;
    missing.codebooks.pop_back();
    EXPECT_THROW(missing.validate(), ValidationError);
}

} // namespace
} // namespace ssplat
