// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

// Shared per-tile compositing loop used by the dense and sparse renderers.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <utility>
#include <vector>

#include "ssplat/parallel.hpp"
#include "ssplat/projection.hpp"
#include "ssplat/rasterizer.hpp"

namespace ssplat::detail {

/// Walks every pixel of every tile front to back. For each contributor
/// `blend(pixel_index, projected_index, weight)` is called with the blend
/// weight e = α·T, then `pixel_done(pixel_index)` once the pixel is finished.
/// Both run on the worker that owns the tile. Returns the number of
/// contributions.
template <class Blend, class PixelDone>
std::uint64_t walk_tiles(std::span<const ProjectedGaussian> projected, const TileBinning &bins, const Camera &cam,
                         bool early_exit, Blend &&blend, PixelDone &&pixel_done) {
    std::atomic<std::uint64_t> total{0};
    parallel_for(bins.tile_count(), [&](std::size_t t) {
        const auto list = bins.tile(std::uint32_t(t));
        if (list.empty()) return;
        const std::uint32_t tx = std::uint32_t(t) % bins.tiles_x;
        const std::uint32_t ty = std::uint32_t(t) / bins.tiles_x;
        const std::uint32_t x0 = tx * bins.tile_size, y0 = ty * bins.tile_size;
        const std::uint32_t x1 = std::min(cam.width, x0 + bins.tile_size);
        const std::uint32_t y1 = std::min(cam.height, y0 + bins.tile_size);

        // Tile-local structure of arrays so distances for a chunk of the list
        // are evaluated in one vectorizable pass. The expression matches
        // ProjectedGaussian::mahalanobis2 term for term.
        const std::size_t n = list.size();
        std::vector<float> mx(n), my(n), ca(n), cb(n), cc(n), op(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto &p = projected[list[i]];
            mx[i] = p.mean2d[0];
            my[i] = p.mean2d[1];
            ca[i] = p.inv_cov2d[0];
            cb[i] = p.inv_cov2d[1];
            cc[i] = p.inv_cov2d[2];
            op[i] = p.opacity;
        }

        constexpr std::size_t kChunk = 64;
        float d2[kChunk];
        std::uint32_t hit[kChunk];
        std::uint64_t count = 0;
        for (std::uint32_t y = y0; y < y1; ++y) {
            for (std::uint32_t x = x0; x < x1; ++x) {
                const std::size_t pix = std::size_t(y) * cam.width + x;
                const float fx = float(x), fy = float(y);
                float T = 1.0f;
                bool done = false;
                for (std::size_t base = 0; base < n && !done; base += kChunk) {
                    const std::size_t m = std::min(kChunk, n - base);
                    for (std::size_t k = 0; k < m; ++k) {
                        const float dx = fx - mx[base + k];
                        const float dy = fy - my[base + k];
                        d2[k] = ca[base + k] * dx * dx + 2.0f * cb[base + k] * dx * dy + cc[base + k] * dy * dy;
                    }
                    // Branch-free compaction of the covering entries, in list order.
                    std::size_t hits = 0;
                    for (std::size_t k = 0; k < m; ++k) {
                        hit[hits] = std::uint32_t(k);
                        hits += d2[k] <= kSigmaCutoff * kSigmaCutoff ? 1 : 0;
                    }
                    for (std::size_t h = 0; h < hits; ++h) {
                        const std::size_t i = base + hit[h];
                        const float alpha = alpha_from_mahalanobis(op[i], d2[hit[h]]);
                        blend(pix, list[i], alpha * T);
                        ++count;
                        T *= 1.0f - alpha;
                        if (early_exit && T < kTransmittanceStop) {
                            done = true;
                            break;
                        }
                    }
                }
                pixel_done(pix);
            }
        }
        total.fetch_add(count, std::memory_order_relaxed);
    });
    return total.load();
}

template <class Blend>
std::uint64_t walk_tiles(std::span<const ProjectedGaussian> projected, const TileBinning &bins, const Camera &cam,
                         bool early_exit, Blend &&blend) {
    return walk_tiles(projected, bins, cam, early_exit, std::forward<Blend>(blend), [](std::size_t) {});
}

} // namespace ssplat::detail
