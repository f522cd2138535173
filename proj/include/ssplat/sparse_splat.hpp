// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssplat/core.hpp"
#include "ssplat/query.hpp"
#include "ssplat/rasterizer.hpp"

namespace ssplat {

/// Rendered coefficient maps; channel layout per pixel is level-major,
/// `levels.size()` groups of L channels.
struct CoefficientMap {
    Framebuffer buffer;
    std::uint32_t L = 0;
    std::uint32_t K = 0;
    std::vector<std::uint32_t> levels;

    std::uint32_t num_levels() const noexcept { return std::uint32_t(levels.size()); }

    /// Framebuffer invariants plus the per-level simplex bound.
    void validate() const { buffer.validate(L); }
};

struct FeatureMapSet {
    enum class Provenance { DecodedFromCoefficients, DenseRendered };

    std::vector<Framebuffer> levels; // H×W×D each
    std::vector<std::uint32_t> level_ids;
    Provenance provenance = Provenance::DecodedFromCoefficients;
};

/// Blends only the K stored coefficients of every Gaussian into an L-channel
/// accumulator per pixel.
CoefficientMap splat_sparse(const Scene &scene, const Camera &cam, std::uint32_t level,
                            const RenderOptions &options = {}, BlendStats *stats = nullptr);

/// All levels in one fused pass; touches num_levels·K channels per Gaussian.
CoefficientMap splat_multilevel(const Scene &scene, const Camera &cam, const RenderOptions &options = {},
                                BlendStats *stats = nullptr);

/// feature(v) = W(v)ᵀ·S per level, as one matrix product over pixels.
FeatureMapSet decode(const CoefficientMap &cmap, std::span<const Codebook> codebooks);

struct StageTimings {
    double render_ms = 0.0;
    double decode_ms = 0.0;
    double post_ms = 0.0;

    double total_ms() const noexcept { return render_ms + decode_ms + post_ms; }
};

struct QuerySettings {
    std::uint32_t window = kDefaultFilterWindow;
    std::optional<std::uint32_t> level; // nullopt = automatic selection
    double threshold = kDefaultSegmentThreshold;
    RenderOptions render;
};

struct QueryPipelineResult {
    std::vector<RelevancyMap> level_maps; // filtered, one per level
    std::size_t chosen_level = 0;
    StageTimings timings;
};

/// render (splat_multilevel) → decode → relevancy + mean filter + level choice.
/// With `instrument` false no clocks are read and timings stay zero.
QueryPipelineResult query_pipeline(const Scene &scene, const Camera &cam, const QueryEmbedding &query,
                                   std::span<const std::vector<float>> canonicals, const QuerySettings &settings = {},
                                   bool instrument = true);

/// `scene_id,H,W,L,K,levels,render_ms,decode_ms,post_ms`
std::string timing_csv_header();
std::string timing_csv_row(const std::string &scene_id, std::uint32_t height, std::uint32_t width,
                           const SceneConfig &config, const StageTimings &timings);

} // namespace ssplat
