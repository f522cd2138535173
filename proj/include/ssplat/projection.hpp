// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ssplat/core.hpp"

namespace ssplat {

/// Pinhole camera. Camera frame is x right, y down, z forward; pixel centers
/// sit on integer coordinates.
struct Camera {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity(); // world -> camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    std::uint32_t width = 1;
    std::uint32_t height = 1;
    double near_plane = 0.01;

    void validate() const;

    Eigen::Vector3d to_camera(const Eigen::Vector3d &world) const { return rotation * world + translation; }

    /// Camera at `eye` looking at `target`; intrinsics from the vertical
    /// field of view with the principal point at the image center.
    static Camera look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target, const Eigen::Vector3d &up,
                          double vfov_degrees, std::uint32_t width, std::uint32_t height,
                          double near_plane = 0.01);
};

/// Diagonal added to the screen-space covariance before inversion (px²).
inline constexpr double kLowPassFloor = 0.3;
/// Screen-space support radius in standard deviations.
inline constexpr float kSigmaCutoff = 3.0f;
inline constexpr float kMaxAlpha = 0.99f;

struct ProjectedGaussian {
    std::array<float, 2> mean2d{};
    std::array<float, 3> cov2d{};     // xx, xy, yy (after the low-pass floor)
    std::array<float, 3> inv_cov2d{}; // conic: xx, xy, yy
    float depth = 0.0f;
    float opacity = 0.0f;
    std::uint32_t source_id = 0;
    std::uint32_t source_index = 0; // position in Scene::gaussians

    /// Squared Mahalanobis distance of pixel (x, y) from the mean.
    float mahalanobis2(float x, float y) const noexcept {
        const float dx = x - mean2d[0];
        const float dy = y - mean2d[1];
        return inv_cov2d[0] * dx * dx + 2.0f * inv_cov2d[1] * dx * dy + inv_cov2d[2] * dy * dy;
    }

    /// True when the pixel lies inside the 3σ ellipse.
    bool covers(float x, float y) const noexcept { return mahalanobis2(x, y) <= kSigmaCutoff * kSigmaCutoff; }
};

/// Projects one Gaussian; std::nullopt when culled (behind the near plane,
/// entirely off-screen, or with a degenerate screen covariance).
std::optional<ProjectedGaussian> project_gaussian(const Gaussian &g, std::uint32_t source_index, const Camera &cam);

/// Projects every Gaussian of the scene, keeping scene order among survivors.
std::vector<ProjectedGaussian> project_scene(const Scene &scene, const Camera &cam);

/// α from an opacity and a precomputed squared Mahalanobis distance.
inline float alpha_from_mahalanobis(float opacity, float d2) noexcept {
    const float power = -0.5f * d2;
    const float a = opacity * std::exp(std::min(power, 0.0f));
    return std::clamp(a, 0.0f, kMaxAlpha);
}

inline float alpha_from_mahalanobis(const ProjectedGaussian &p, float d2) noexcept {
    return alpha_from_mahalanobis(p.opacity, d2);
}

/// α = opacity · exp(−½ dᵀ Σ⁻¹ d), clamped to [0, 0.99].
inline float eval_alpha(const ProjectedGaussian &p, float x, float y) noexcept {
    return alpha_from_mahalanobis(p, p.mahalanobis2(x, y));
}

/// Per-tile, depth-ordered lists of projected Gaussians in CSR form.
struct TileBinning {
    std::uint32_t tile_size = 16;
    std::uint32_t tiles_x = 0;
    std::uint32_t tiles_y = 0;
    std::vector<std::uint32_t> offsets; // tiles_x * tiles_y + 1
    std::vector<std::uint32_t> entries; // indices into the projected list

    std::uint32_t tile_count() const noexcept { return tiles_x * tiles_y; }

    std::span<const std::uint32_t> tile(std::uint32_t t) const {
        return std::span<const std::uint32_t>(entries).subspan(offsets[t], offsets[t + 1] - offsets[t]);
    }

    bool operator==(const TileBinning &) const = default;
};

/// True when at least one pixel center of the tile lies inside the 3σ ellipse.
bool tile_overlaps(const ProjectedGaussian &p, std::uint32_t x0, std::uint32_t y0, std::uint32_t x1,
                   std::uint32_t y1) noexcept;

/// Bins projected Gaussians into tiles; each list sorted by (depth, source_id).
TileBinning bin_tiles(std::span<const ProjectedGaussian> projected, const Camera &cam,
                      std::uint32_t tile_size = 16);

} // namespace ssplat
