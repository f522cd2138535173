// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssplat/rasterizer.hpp"

namespace ssplat {

struct QueryEmbedding {
    std::string name;
    std::vector<float> vector;
    std::string canonical_set = "default";
};

/// Per-pixel scalar score map with provenance.
struct RelevancyMap {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<double> scores; // row-major
    std::string query;
    std::uint32_t level = 0;
    bool filtered = false;
    std::uint32_t window = 1;

    double at(std::uint32_t row, std::uint32_t col) const { return scores[std::size_t(row) * width + col]; }

    bool operator==(const RelevancyMap &) const = default;
};

/// score = min over canonicals c of exp(f·q) / (exp(f·q) + exp(f·c)), kept
/// strictly inside (0, 1).
RelevancyMap relevancy_map(const Framebuffer &features, const QueryEmbedding &query,
                           std::span<const std::vector<float>> canonicals, std::uint32_t level = 0);

inline constexpr std::uint32_t kDefaultFilterWindow = 11;

/// Box filter with edge-clamped borders. `window` must be odd.
RelevancyMap mean_filter(const RelevancyMap &map, std::uint32_t window);

struct LevelSelection {
    std::size_t level = 0;
    RelevancyMap map;
};

/// Level whose map has the highest maximum; ties go to the lowest level.
LevelSelection select_level(std::span<const RelevancyMap> maps);

struct PixelCoord {
    std::uint32_t row = 0;
    std::uint32_t col = 0;

    bool operator==(const PixelCoord &) const = default;
};

/// Location of the maximum score; ties resolve to the smallest row, then column.
PixelCoord localize(const RelevancyMap &map);

inline constexpr double kDefaultSegmentThreshold = 0.5;

struct Segmentation {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> mask; // 1 = selected
    double threshold = kDefaultSegmentThreshold;
    bool degenerate = false; // constant map, normalization undefined
};

/// Min-max normalizes the map and selects pixels strictly above `threshold`.
Segmentation segment(const RelevancyMap &map, double threshold = kDefaultSegmentThreshold);

/// |A∩B| / |A∪B|; two empty masks give 1.
double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Run lengths over the row-major mask, alternating 0-runs and 1-runs,
/// starting with a (possibly empty) 0-run.
std::vector<std::uint32_t> mask_rle(std::span<const std::uint8_t> mask);

struct ScoreStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

ScoreStats score_stats(const RelevancyMap &map);

} // namespace ssplat
