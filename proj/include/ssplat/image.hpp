// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssplat/query.hpp"
#include "ssplat/rasterizer.hpp"

namespace ssplat {

/// 8-bit RGB image, rows top to bottom.
struct RgbImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels; // width·height·3

    bool operator==(const RgbImage &) const = default;
};

/// Color framebuffer to 8 bits: round(clamp(v, 0, 1)·255).
RgbImage to_rgb8(const Framebuffer &color);

/// PNG bytes (8-bit RGB, no ancillary chunks, so identical images give
/// identical bytes).
std::string encode_png(const RgbImage &image);
/// Throws LoadError(Corrupt) for anything that is not an 8-bit RGB PNG.
RgbImage decode_png(std::span<const std::uint8_t> bytes);

/// Turbo-style ramp for t in [0, 1] (clamped), polynomial fit.
std::array<float, 3> turbo(float t);

inline constexpr float kOverlayMaxAlpha = 0.6f;

/// Heat map over a color render. Scores are min-max normalized to n; each
/// pixel becomes (1 − a)·base + a·turbo(n) with a = kOverlayMaxAlpha·n. A
/// constant map leaves the base untouched.
RgbImage overlay_relevancy(const RgbImage &base, const RelevancyMap &map);

} // namespace ssplat
