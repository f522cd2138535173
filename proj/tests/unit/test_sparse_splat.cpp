// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ssplat/errors.hpp"
#include "ssplat/sparse_splat.hpp"

namespace ssplat {
namespace {

bool bytes_equal(const Framebuffer &a, const Framebuffer &b) {
    return a.data.size() == b.data.size() &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

TEST(SparseSplat, MatchesDenseCoefficientRender) {
    const auto cam = testing::test_camera();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto scene = testing::random_scene(300 + seed, {.gaussians = 500});
        for (std::uint32_t l = 0; l < scene.config.num_levels; ++l) {
            const auto sparse = splat_sparse(scene, cam, l);
            const auto dense = render_dense(scene, cam, ChannelSource::coefficients(l));
            EXPECT_LE(max_abs_diff(sparse.buffer, dense), 1e-6) << "seed " << seed << " level " << l;
            EXPECT_NO_THROW(sparse.validate());
        }
    }
}

TEST(SparseSplat, FullSupportIsBitIdenticalToDense) {
    const auto cam = testing::test_camera();
    const auto scene = testing::random_scene(310, {.config = {2, 8, 8, 4}});
    const auto sparse = splat_sparse(scene, cam, 1);
    const auto dense = render_dense(scene, cam, ChannelSource::coefficients(1));
    EXPECT_TRUE(bytes_equal(sparse.buffer, dense));
}

TEST(SparseSplat, FusedLevelsMatchPerLevelPasses) {
    const auto cam = testing::test_camera(40, 30);
    const auto scene = testing::random_scene(320);
    const auto fused = splat_multilevel(scene, cam);
    const auto L = scene.config.L;
    ASSERT_EQ(fused.buffer.channels, L * scene.config.num_levels);
    for (std::uint32_t l = 0; l < scene.config.num_levels; ++l) {
        const auto single = splat_sparse(scene, cam, l);
        for (std::size_t p = 0; p < fused.buffer.pixel_count(); ++p) {
            ASSERT_EQ(std::memcmp(&fused.buffer.data[p * fused.buffer.channels + l * L],
                                  &single.buffer.data[p * L], L * sizeof(float)),
                      0)
                << "pixel " << p << " level " << l;
        }
    }
}

TEST(SparseSplat, OneHotCoefficientsLandInOneChannel) {
    const auto cam = testing::test_camera();
    auto scene = testing::random_scene(330, {.config = {1, 16, 1, 4}});
    for (auto &g : scene.gaussians) g.coeffs[0] = {{7}, {1.0f}};
    const auto cmap = splat_sparse(scene, cam, 0);
    ChannelMatrix ones{1, ChannelTag::Scalar, std::vector<float>(scene.gaussians.size(), 1.0f)};
    const auto mass = render_channels(scene, cam, ones);
    for (std::size_t p = 0; p < cmap.buffer.pixel_count(); ++p) {
        for (std::uint32_t c = 0; c < 16; ++c) {
            const float v = cmap.buffer.data[p * 16 + c];
            if (c == 7) {
                EXPECT_EQ(v, mass.data[p]);
            } else {
                EXPECT_EQ(v, 0.0f);
            }
        }
    }
}

TEST(SparseSplat, DecodedFeaturesEqualRenderedFeatures) {
    const auto cam = testing::test_camera();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto scene = testing::random_scene(340 + seed, {.gaussians = 300, .config = {3, 64, 4, 16}});
        const auto features = decode(splat_multilevel(scene, cam), scene.codebooks);
        ASSERT_EQ(features.levels.size(), 3u);
        for (std::uint32_t l = 0; l < 3; ++l) {
            const auto direct = render_dense(scene, cam, ChannelSource::features(l));
            EXPECT_LE(max_abs_diff(features.levels[l], direct), 1e-5) << "seed " << seed << " level " << l;
        }
    }
}

TEST(SparseSplat, DecodeMatchesNaiveProduct) {
    const auto cam = testing::test_camera(17, 23);
    const auto scene = testing::random_scene(350);
    const auto cmap = splat_multilevel(scene, cam);
    const auto features = decode(cmap, scene.codebooks);
    const auto &cfg = scene.config;
    for (std::uint32_t l = 0; l < cfg.num_levels; ++l) {
        const auto &cb = scene.codebooks[l];
        for (std::size_t p = 0; p < cmap.buffer.pixel_count(); ++p) {
            for (std::uint32_t d = 0; d < cfg.D; ++d) {
                double acc = 0;
                for (std::uint32_t k = 0; k < cfg.L; ++k)
                    acc += double(cmap.buffer.data[p * cmap.buffer.channels + l * cfg.L + k]) * cb.atom(k)[d];
                EXPECT_NEAR(features.levels[l].data[p * cfg.D + d], acc, 1e-5);
            }
        }
    }
}

TEST(SparseSplat, BlendWidthIsLevelsTimesK) {
    const auto cam = testing::test_camera();
    const auto scene = testing::random_scene(360, {.config = {3, 64, 4, 16}});
    BlendStats sparse, dense;
    splat_multilevel(scene, cam, {}, &sparse);
    render_dense(scene, cam, ChannelSource::all_coefficients(), {}, &dense);
    EXPECT_EQ(sparse.contributions, dense.contributions);
    EXPECT_DOUBLE_EQ(sparse.channels_per_contribution(), 12.0);
    EXPECT_DOUBLE_EQ(dense.channels_per_contribution(), 192.0);
}

TEST(SparseSplat, CoefficientMassEqualsAccumulatedOpacity) {
    const auto cam = testing::test_camera();
    const auto scene = testing::random_scene(370, {.gaussians = 400});
    const auto cmap = splat_multilevel(scene, cam);
    ChannelMatrix ones{1, ChannelTag::Scalar, std::vector<float>(scene.gaussians.size(), 1.0f)};
    const auto mass = render_channels(scene, cam, ones);
    const auto L = scene.config.L;
    for (std::size_t p = 0; p < cmap.buffer.pixel_count(); ++p) {
        for (std::uint32_t l = 0; l < scene.config.num_levels; ++l) {
            double sum = 0;
            for (std::uint32_t c = 0; c < L; ++c) sum += cmap.buffer.data[p * cmap.buffer.channels + l * L + c];
            EXPECT_NEAR(sum, mass.data[p], 1e-5);
        }
    }
}

TEST(SparseSplat, RejectsInvalidInputs) {
    const auto cam = testing::test_camera();
    auto scene = testing::random_scene(380, {.gaussians = 20});
    EXPECT_THROW(splat_sparse(scene, cam, 3), ValidationError);
    auto cmap = splat_multilevel(scene, cam);
    std::vector<Codebook> missing(scene.codebooks.begin(), scene.codebooks.begin() + 2);
    EXPECT_THROW(decode(cmap, missing), ValidationError);
    std::vector<Codebook> wrong_L{Codebook(0, 32, 16), Codebook(1, 32, 16), Codebook(2, 32, 16)};
    EXPECT_THROW(decode(cmap, wrong_L), ValidationError);
    EXPECT_THROW(splat_multilevel(scene, cam, {.max_elements = 100}), ResourceError);
    scene.gaussians[0].coeffs[1].values[0] = 2.0f;
    EXPECT_THROW(splat_multilevel(scene, cam), ValidationError);
}

TEST(QueryPipeline, InstrumentationDoesNotChangeResults) {
    const auto cam = testing::test_camera();
    const auto scene = testing::random_scene(390);
    std::mt19937_64 rng(1);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    QueryEmbedding q{"probe", std::vector<float>(scene.config.D)};
    for (float &v : q.vector) v = nd(rng);
    std::vector<std::vector<float>> canon(2, std::vector<float>(scene.config.D));
    for (auto &c : canon)
        for (float &v : c) v = nd(rng);
    const auto on = query_pipeline(scene, cam, q, canon, {}, true);
    const auto off = query_pipeline(scene, cam, q, canon, {}, false);
    EXPECT_EQ(on.level_maps, off.level_maps);
    EXPECT_EQ(on.chosen_level, off.chosen_level);
    EXPECT_EQ(off.timings.total_ms(), 0.0);
    EXPECT_GT(on.timings.render_ms, 0.0);
    EXPECT_GT(on.timings.decode_ms, 0.0);
    EXPECT_GT(on.timings.post_ms, 0.0);
    EXPECT_NEAR(on.timings.total_ms(), on.timings.render_ms + on.timings.decode_ms + on.timings.post_ms, 1e-12);
}

TEST(QueryPipeline, FixedLevelOverridesSelection) {
    const auto cam = testing::test_camera(24, 24);
    const auto scene = testing::random_scene(391);
    QueryEmbedding q{"probe", std::vector<float>(scene.config.D, 0.1f)};
    std::vector<std::vector<float>> canon{std::vector<float>(scene.config.D, -0.1f)};
    QuerySettings s;
    s.level = 2;
    EXPECT_EQ(query_pipeline(scene, cam, q, canon, s).chosen_level, 2u);
    s.level = 3;
    EXPECT_THROW(query_pipeline(scene, cam, q, canon, s), ValidationError);
}

TEST(TimingCsv, HeaderAndRowShape) {
    EXPECT_EQ(timing_csv_header(), "scene_id,H,W,L,K,levels,render_ms,decode_ms,post_ms");
    const auto row = timing_csv_row("s1", 48, 64, {3, 64, 4, 512}, {1.5, 0.25, 0.125});
    EXPECT_EQ(row, "s1,48,64,64,4,3,1.500000,0.250000,0.125000");
}

} // namespace
} // namespace ssplat
