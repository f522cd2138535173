// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "ssplat/errors.hpp"
#include "ssplat/parallel.hpp"

namespace ssplat {

namespace {

constexpr double kScoreLow = std::numeric_limits<double>::min();
constexpr double kScoreHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2;

} // namespace

RelevancyMap relevancy_map(const Framebuffer &features, const QueryEmbedding &query,
                           std::span<const std::vector<float>> canonicals, std::uint32_t level) {
    const std::uint32_t D = features.channels;
    if (canonicals.empty()) throw ValidationError("relevancy_map: at least one canonical embedding is required");
    if (query.vector.size() != D) {
        throw ValidationError("relevancy_map: query dimension " + std::to_string(query.vector.size()) +
                              " does not match feature dimension " + std::to_string(D));
    }
    for (const auto &c : canonicals)
        if (c.size() != D) throw ValidationError("relevancy_map: canonical dimension mismatch");

    // Column 0 is the query, the rest are canonicals.
    const Eigen::Index nvec = Eigen::Index(canonicals.size()) + 1;
    Eigen::MatrixXd probes(D, nvec);
    for (std::uint32_t d = 0; d < D; ++d) {
        probes(d, 0) = query.vector[d];
        for (Eigen::Index c = 1; c < nvec; ++c) probes(d, c) = canonicals[c - 1][d];
    }
    using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajorF> F(features.data.data(), Eigen::Index(features.pixel_count()), D);
    const Eigen::MatrixXd logits = F.cast<double>() * probes;

    RelevancyMap out;
    out.width = features.width;
    out.height = features.height;
    out.query = query.name;
    out.level = level;
    out.scores.resize(features.pixel_count());
    for (Eigen::Index p = 0; p < logits.rows(); ++p) {
        double score = 1.0;
        for (Eigen::Index c = 1; c < nvec; ++c) {
            // exp(a) / (exp(a) + exp(b)) = 1 / (1 + exp(b − a))
            score = std::min(score, 1.0 / (1.0 + std::exp(logits(p, c) - logits(p, 0))));
        }
        out.scores[p] = std::clamp(score, kScoreLow, kScoreHigh);
    }
    return out;
}

RelevancyMap mean_filter(const RelevancyMap &map, std::uint32_t window) {
    if (window < 1 || window % 2 == 0) {
        throw ValidationError("mean_filter: window must be a positive odd integer, got " + std::to_string(window));
    }
    RelevancyMap out = map;
    out.filtered = true;
    out.window = window;
    if (window == 1 || map.scores.empty()) return out;

    const int W = int(map.width), H = int(map.height), r = int(window / 2);
    const auto [lo, hi] = std::minmax_element(map.scores.begin(), map.scores.end());
    const double vmin = *lo, vmax = *hi;
    std::vector<double> horiz(map.scores.size());
    parallel_for(std::size_t(H), [&](std::size_t y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += map.scores[y * W + std::clamp(x + i, 0, W - 1)];
            horiz[y * W + x] = s;
        }
    });
    const double norm = double(window) * double(window);
    parallel_for(std::size_t(H), [&](std::size_t y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int j = -r; j <= r; ++j) s += horiz[std::size_t(std::clamp(int(y) + j, 0, H - 1)) * W + x];
            out.scores[y * W + x] = std::clamp(s / norm, vmin, vmax);
        }
    });
    return out;
}

LevelSelection select_level(std::span<const RelevancyMap> maps) {
    if (maps.empty()) throw ValidationError("select_level: no levels given");
    std::size_t best = 0;
    double best_max = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < maps.size(); ++l) {
        if (maps[l].scores.empty()) continue;
        const double m = *std::max_element(maps[l].scores.begin(), maps[l].scores.end());
        if (m > best_max) {
            best_max = m;
            best = l;
        }
    }
    return {best, maps[best]};
}

PixelCoord localize(const RelevancyMap &map) {
    if (map.scores.empty()) throw ValidationError("localize: empty map");
    // max_element returns the first maximum in row-major order.
    const auto it = std::max_element(map.scores.begin(), map.scores.end());
    const auto idx = std::size_t(it - map.scores.begin());
    return {std::uint32_t(idx / map.width), std::uint32_t(idx % map.width)};
}

Segmentation segment(const RelevancyMap &map, double threshold) {
    Segmentation seg;
    seg.width = map.width;
    seg.height = map.height;
    seg.threshold = threshold;
    seg.mask.assign(map.scores.size(), 0);
    if (map.scores.empty()) {
        seg.degenerate = true;
        return seg;
    }
    const auto [lo, hi] = std::minmax_element(map.scores.begin(), map.scores.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) {
        seg.degenerate = true;
        return seg;
    }
    for (std::size_t i = 0; i < map.scores.size(); ++i) {
        seg.mask[i] = (map.scores[i] - *lo) / range > threshold ? 1 : 0;
    }
    return seg;
}

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw ValidationError("iou: mask sizes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0, y = b[i] != 0;
        inter += (x && y);
        uni += (x || y);
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

std::vector<std::uint32_t> mask_rle(std::span<const std::uint8_t> mask) {
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t len = 0;
    for (auto v : mask) {
        const std::uint8_t bit = v != 0;
        if (bit != current) {
            runs.push_back(len);
            current = bit;
            len = 0;
        }
        ++len;
    }
    runs.push_back(len);
    return runs;
}

ScoreStats score_stats(const RelevancyMap &map) {
    ScoreStats s;
    if (map.scores.empty()) return s;
    const auto [lo, hi] = std::minmax_element(map.scores.begin(), map.scores.end());
    s.min = *lo;
    s.max = *hi;
    double sum = 0.0;
    for (double v : map.scores) sum += v;
    s.mean = sum / double(map.scores.size());
    return s;
}

} // namespace ssplat
