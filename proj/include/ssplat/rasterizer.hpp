// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssplat/core.hpp"
#include "ssplat/projection.hpp"

namespace ssplat {

enum class ChannelTag : std::uint32_t {
    Color = 0,
    DenseFeature = 1,
    Coefficient = 2,
    Scalar = 3, // masks and score maps
};

const char *to_string(ChannelTag tag) noexcept;

/// H×W×C grid, channels contiguous per pixel, rows top to bottom.
struct Framebuffer {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 0;
    ChannelTag tag = ChannelTag::Color;
    std::vector<float> data;

    Framebuffer() = default;
    Framebuffer(std::uint32_t w, std::uint32_t h, std::uint32_t c, ChannelTag t)
        : width(w), height(h), channels(c), tag(t), data(std::size_t(w) * h * c, 0.0f) {}

    std::size_t pixel_count() const noexcept { return std::size_t(width) * height; }

    std::span<float> pixel(std::uint32_t x, std::uint32_t y) {
        return std::span<float>(data).subspan((std::size_t(y) * width + x) * channels, channels);
    }
    std::span<const float> pixel(std::uint32_t x, std::uint32_t y) const {
        return std::span<const float>(data).subspan((std::size_t(y) * width + x) * channels, channels);
    }
    float at(std::uint32_t x, std::uint32_t y, std::uint32_t c) const {
        return data[(std::size_t(y) * width + x) * channels + c];
    }

    /// Throws ValidationError on non-finite data, or for coefficient buffers
    /// on entries outside [0,1] / per-group sums above 1 + 1e-5. `group` is
    /// the channel count of one simplex group (L); 0 means all channels.
    void validate(std::uint32_t group = 0) const;

    bool operator==(const Framebuffer &) const = default;
};

/// Max |a − b| over all entries; dimensions must match.
double max_abs_diff(const Framebuffer &a, const Framebuffer &b);

/// Front-to-back compositing state for one pixel.
struct BlendState {
    float transmittance = 1.0f;
};

inline constexpr float kTransmittanceStop = 1e-4f;

struct RenderOptions {
    std::uint32_t tile_size = 16;
    bool early_exit = true;
    /// Upper bound on H·W·C output floats; larger requests throw ResourceError.
    std::size_t max_elements = std::size_t(1) << 28;
    Vec3 background{0.0f, 0.0f, 0.0f}; // color buffers only
};

/// Counters filled by the tiled renderers when requested.
struct BlendStats {
    std::uint64_t contributions = 0;   // (Gaussian, pixel) pairs blended
    std::uint64_t channel_updates = 0; // accumulator writes performed

    double channels_per_contribution() const noexcept {
        return contributions == 0 ? 0.0 : double(channel_updates) / double(contributions);
    }
};

/// One depth-ordered contributor to a pixel.
struct BlendInput {
    const ProjectedGaussian *gaussian = nullptr;
    std::span<const float> channels;
};

/// out = Σ_i v_i · α_i · Π_{j<i}(1 − α_j) over contributors covering the
/// pixel, stopping once transmittance drops below 1e-4.
std::vector<float> blend_pixel_dense(std::span<const BlendInput> ordered, float x, float y, std::size_t channels,
                                     BlendState *state = nullptr);

/// Per-Gaussian channel vectors indexed by scene position, row-major G×C.
struct ChannelMatrix {
    std::uint32_t channels = 0;
    ChannelTag tag = ChannelTag::DenseFeature;
    std::vector<float> values;

    std::span<const float> row(std::size_t g) const {
        return std::span<const float>(values).subspan(g * channels, channels);
    }
};

/// What per-Gaussian vectors to splat.
struct ChannelSource {
    enum class Kind {
        Color,              // 3 channels
        Features,           // reconstructed D-dim features for one level
        Coefficients,       // densified L-dim coefficients for one level
        AllCoefficients,    // densified coefficients for every level, level-major
    };
    Kind kind = Kind::Color;
    std::uint32_t level = 0;

    static ChannelSource color() { return {Kind::Color, 0}; }
    static ChannelSource features(std::uint32_t level) { return {Kind::Features, level}; }
    static ChannelSource coefficients(std::uint32_t level) { return {Kind::Coefficients, level}; }
    static ChannelSource all_coefficients() { return {Kind::AllCoefficients, 0}; }
};

ChannelMatrix gather_channels(const Scene &scene, const ChannelSource &source);

/// Tiled renderer over arbitrary per-Gaussian channels.
Framebuffer render_channels(const Scene &scene, const Camera &cam, const ChannelMatrix &channels,
                            const RenderOptions &options = {}, BlendStats *stats = nullptr);

Framebuffer render_dense(const Scene &scene, const Camera &cam, const ChannelSource &source,
                         const RenderOptions &options = {}, BlendStats *stats = nullptr);

/// Reference renderer: no tiles, a global per-pixel depth sort and double
/// accumulation. Same contract as render_channels; slow.
Framebuffer oracle_render(const Scene &scene, const Camera &cam, const ChannelMatrix &channels,
                          const RenderOptions &options = {});

/// Per-pixel blend weights e_i = α_i·T_i in CSR form, the exact weights the
/// tiled renderer applies. Used by training, where geometry is frozen.
struct BlendWeights {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint32_t> offsets;  // pixel_count + 1
    std::vector<std::uint32_t> gaussian; // scene index
    std::vector<float> weight;

    std::size_t pixel_count() const noexcept { return std::size_t(width) * height; }
};

BlendWeights collect_blend_weights(const Scene &scene, const Camera &cam, const RenderOptions &options = {});

/// Throws ResourceError when H·W·C exceeds the option budget.
void check_render_budget(const Camera &cam, std::size_t channels, const RenderOptions &options);

} // namespace ssplat
