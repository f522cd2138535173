// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/sparse_splat.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include <Eigen/Core>

#include "ssplat/errors.hpp"
#include "ssplat/parallel.hpp"
#include "tile_walk.hpp"

namespace ssplat {

namespace {

/// Per projected Gaussian: `stride` = levels·K (channel, value) pairs, with the
/// channel already offset into its level block.
struct PackedCoefficients {
    std::uint32_t stride = 0;
    std::vector<std::uint32_t> channel;
    std::vector<float> value;
};

PackedCoefficients pack(const Scene &scene, std::span<const ProjectedGaussian> projected,
                        std::span<const std::uint32_t> levels) {
    const auto &cfg = scene.config;
    PackedCoefficients packed;
    packed.stride = std::uint32_t(levels.size()) * cfg.K;
    packed.channel.reserve(projected.size() * packed.stride);
    packed.value.reserve(projected.size() * packed.stride);
    for (const auto &p : projected) {
        const auto &g = scene.gaussians[p.source_index];
        for (std::size_t slot = 0; slot < levels.size(); ++slot) {
            const auto &c = g.coeffs[levels[slot]];
            for (std::uint32_t k = 0; k < cfg.K; ++k) {
                packed.channel.push_back(std::uint32_t(slot) * cfg.L + c.indices[k]);
                packed.value.push_back(c.values[k]);
            }
        }
    }
    return packed;
}

void check_coefficients(const Scene &scene, std::span<const std::uint32_t> levels) {
    const auto &cfg = scene.config;
    for (auto l : levels)
        if (l >= cfg.num_levels) throw ValidationError("splat: level " + std::to_string(l) + " out of range");
    for (const auto &g : scene.gaussians) {
        if (g.coeffs.size() != cfg.num_levels) {
            throw ValidationError("splat: gaussian " + std::to_string(g.id) + " lacks coefficient levels");
        }
        for (auto l : levels) g.coeffs[l].validate(cfg.L, cfg.K);
    }
}

CoefficientMap splat_levels(const Scene &scene, const Camera &cam, std::vector<std::uint32_t> levels,
                            const RenderOptions &options, BlendStats *stats) {
    cam.validate();
    check_coefficients(scene, levels);
    const auto &cfg = scene.config;
    const std::uint32_t C = std::uint32_t(levels.size()) * cfg.L;
    check_render_budget(cam, C, options);

    const auto projected = project_scene(scene, cam);
    const auto bins = bin_tiles(projected, cam, options.tile_size);
    const auto packed = pack(scene, projected, levels);

    CoefficientMap cmap;
    cmap.L = cfg.L;
    cmap.K = cfg.K;
    cmap.levels = std::move(levels);
    cmap.buffer = Framebuffer(cam.width, cam.height, C, ChannelTag::Coefficient);

    float *out = cmap.buffer.data.data();
    const std::uint32_t stride = packed.stride;
    const std::uint32_t *chan = packed.channel.data();
    const float *val = packed.value.data();
    // Scatter into a per-worker pixel accumulator that stays in L1, then copy
    // the finished pixel out in one sequential write.
    thread_local std::vector<float> acc;
    const auto count = detail::walk_tiles(
        projected, bins, cam, options.early_exit,
        [&](std::size_t, std::uint32_t j, float e) {
            if (acc.size() != C) acc.assign(C, 0.0f);
            float *W = acc.data();
            const std::size_t base = std::size_t(j) * stride;
            for (std::uint32_t k = 0; k < stride; ++k) W[chan[base + k]] += val[base + k] * e;
        },
        [&](std::size_t pix) {
            if (acc.size() != C) return; // no contributor has touched this worker's buffer yet
            std::copy(acc.begin(), acc.end(), out + pix * C);
            std::fill(acc.begin(), acc.end(), 0.0f);
        });
    if (stats) {
        stats->contributions += count;
        stats->channel_updates += count * stride;
    }
    return cmap;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

} // namespace

CoefficientMap splat_sparse(const Scene &scene, const Camera &cam, std::uint32_t level, const RenderOptions &options,
                            BlendStats *stats) {
    return splat_levels(scene, cam, {level}, options, stats);
}

CoefficientMap splat_multilevel(const Scene &scene, const Camera &cam, const RenderOptions &options,
                                BlendStats *stats) {
    std::vector<std::uint32_t> levels(scene.config.num_levels);
    for (std::uint32_t l = 0; l < levels.size(); ++l) levels[l] = l;
    return splat_levels(scene, cam, std::move(levels), options, stats);
}

FeatureMapSet decode(const CoefficientMap &cmap, std::span<const Codebook> codebooks) {
    const auto &buf = cmap.buffer;
    if (buf.channels != cmap.L * cmap.num_levels()) {
        throw ValidationError("decode: coefficient map channel count does not match L x levels");
    }
    FeatureMapSet set;
    set.provenance = FeatureMapSet::Provenance::DecodedFromCoefficients;
    const auto rows = Eigen::Index(buf.height);
    const auto cols = Eigen::Index(buf.width);
    for (std::uint32_t slot = 0; slot < cmap.num_levels(); ++slot) {
        const std::uint32_t level = cmap.levels[slot];
        const auto it = std::find_if(codebooks.begin(), codebooks.end(),
                                     [&](const Codebook &cb) { return cb.level() == level; });
        if (it == codebooks.end()) throw ValidationError("decode: no codebook for level " + std::to_string(level));
        if (it->L() != cmap.L) {
            throw ValidationError("decode: codebook L=" + std::to_string(it->L()) + " does not match map L=" +
                                  std::to_string(cmap.L));
        }
        const std::uint32_t D = it->D();
        Framebuffer out(buf.width, buf.height, D, ChannelTag::DenseFeature);
        const auto S = it->matrix();

        using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        using CoeffView = Eigen::Map<const RowMajorF, 0, Eigen::OuterStride<>>;
        // Row bands of the image are independent products.
        const std::size_t bands = std::max<std::size_t>(1, std::min<std::size_t>(thread_count(), std::size_t(rows)));
        parallel_for(bands, [&](std::size_t b) {
            const Eigen::Index r0 = rows * Eigen::Index(b) / Eigen::Index(bands);
            const Eigen::Index r1 = rows * Eigen::Index(b + 1) / Eigen::Index(bands);
            const Eigen::Index npix = (r1 - r0) * cols;
            if (npix == 0) return;
            const CoeffView Wmap(buf.data.data() + std::size_t(r0 * cols) * buf.channels + std::size_t(slot) * cmap.L,
                                 npix, cmap.L, Eigen::OuterStride<>(buf.channels));
            Eigen::Map<RowMajorF> F(out.data.data() + std::size_t(r0 * cols) * D, npix, D);
            F.noalias() = Wmap * S;
        });
        set.levels.push_back(std::move(out));
        set.level_ids.push_back(level);
    }
    return set;
}

QueryPipelineResult query_pipeline(const Scene &scene, const Camera &cam, const QueryEmbedding &query,
                                   std::span<const std::vector<float>> canonicals, const QuerySettings &settings,
                                   bool instrument) {
    if (settings.level && *settings.level >= scene.config.num_levels) {
        throw ValidationError("query: level " + std::to_string(*settings.level) + " out of range");
    }
    QueryPipelineResult result;
    using clock = std::chrono::steady_clock;
    clock::time_point t0;

    if (instrument) t0 = clock::now();
    const auto cmap = splat_multilevel(scene, cam, settings.render);
    if (instrument) result.timings.render_ms = elapsed_ms(t0);

    if (instrument) t0 = clock::now();
    const auto features = decode(cmap, scene.codebooks);
    if (instrument) result.timings.decode_ms = elapsed_ms(t0);

    if (instrument) t0 = clock::now();
    for (std::size_t l = 0; l < features.levels.size(); ++l) {
        const auto raw = relevancy_map(features.levels[l], query, canonicals, features.level_ids[l]);
        result.level_maps.push_back(mean_filter(raw, settings.window));
    }
    result.chosen_level = settings.level ? *settings.level : select_level(result.level_maps).level;
    if (instrument) result.timings.post_ms = elapsed_ms(t0);
    return result;
}

std::string timing_csv_header() { return "scene_id,H,W,L,K,levels,render_ms,decode_ms,post_ms"; }

std::string timing_csv_row(const std::string &scene_id, std::uint32_t height, std::uint32_t width,
                           const SceneConfig &config, const StageTimings &timings) {
    char buf[256];
    std::snprintf(buf, sizeof buf, ",%u,%u,%u,%u,%u,%.6f,%.6f,%.6f", height, width, config.L, config.K,
                  config.num_levels, timings.render_ms, timings.decode_ms, timings.post_ms);
    return scene_id + buf;
}

} // namespace ssplat
