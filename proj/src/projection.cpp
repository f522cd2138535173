// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "ssplat/errors.hpp"
#include "ssplat/parallel.hpp"

namespace ssplat {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("camera: focal lengths must be positive");
    if (width < 1 || height < 1) throw ValidationError("camera: image must be at least 1x1");
    if (!(near_plane > 0.0)) throw ValidationError("camera: near plane must be positive");
    if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw ValidationError("camera: non-finite parameters");
    }
}

Camera Camera::look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target, const Eigen::Vector3d &up,
                       double vfov_degrees, std::uint32_t width, std::uint32_t height, double near_plane) {
    const Eigen::Vector3d forward = target - eye;
    if (forward.norm() <= 0.0) throw ValidationError("camera: eye and target coincide");
    if (!(vfov_degrees > 0.0 && vfov_degrees < 180.0)) throw ValidationError("camera: fov must be in (0, 180)");
    const Eigen::Vector3d z = forward.normalized();
    Eigen::Vector3d x = z.cross(up);
    if (x.norm() < 1e-12) throw ValidationError("camera: up vector is parallel to the view direction");
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);

    Camera cam;
    cam.rotation.row(0) = x.transpose();
    cam.rotation.row(1) = y.transpose();
    cam.rotation.row(2) = z.transpose();
    cam.translation = -cam.rotation * eye;
    const double half = vfov_degrees * std::numbers::pi / 360.0;
    cam.fy = 0.5 * height / std::tan(half);
    cam.fx = cam.fy;
    cam.cx = 0.5 * (double(width) - 1.0);
    cam.cy = 0.5 * (double(height) - 1.0);
    cam.width = width;
    cam.height = height;
    cam.near_plane = near_plane;
    cam.validate();
    return cam;
}

std::optional<ProjectedGaussian> project_gaussian(const Gaussian &g, std::uint32_t source_index, const Camera &cam) {
    const Eigen::Vector3d t = cam.to_camera(Eigen::Vector3d(g.position[0], g.position[1], g.position[2]));
    if (!(t.z() > cam.near_plane)) return std::nullopt;

    const Eigen::Matrix3d cov3 = build_covariance(g.rotation, g.scale);
    const double iz = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz,
         0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    const Eigen::Matrix<double, 2, 3> T = J * cam.rotation;
    Eigen::Matrix2d cov2 = T * cov3 * T.transpose();
    cov2(0, 0) += kLowPassFloor;
    cov2(1, 1) += kLowPassFloor;
    const double xy = 0.5 * (cov2(0, 1) + cov2(1, 0));
    const double det = cov2(0, 0) * cov2(1, 1) - xy * xy;
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;

    ProjectedGaussian p;
    p.mean2d = {float(cam.fx * t.x() * iz + cam.cx), float(cam.fy * t.y() * iz + cam.cy)};
    p.cov2d = {float(cov2(0, 0)), float(xy), float(cov2(1, 1))};
    p.inv_cov2d = {float(cov2(1, 1) / det), float(-xy / det), float(cov2(0, 0) / det)};
    p.depth = float(t.z());
    p.opacity = g.opacity;
    p.source_id = g.id;
    p.source_index = source_index;
    if (!std::isfinite(p.mean2d[0]) || !std::isfinite(p.mean2d[1])) return std::nullopt;

    // Off-screen test on the axis-aligned extent of the 3σ ellipse, padded by
    // a pixel so rounding in the conic never drops a covered pixel.
    const double rx = kSigmaCutoff * std::sqrt(cov2(0, 0)) + 1.0;
    const double ry = kSigmaCutoff * std::sqrt(cov2(1, 1)) + 1.0;
    if (p.mean2d[0] + rx < 0.0 || p.mean2d[0] - rx > double(cam.width) - 1.0 || p.mean2d[1] + ry < 0.0 ||
        p.mean2d[1] - ry > double(cam.height) - 1.0) {
        return std::nullopt;
    }
    return p;
}

std::vector<ProjectedGaussian> project_scene(const Scene &scene, const Camera &cam) {
    cam.validate();
    const std::size_t n = scene.gaussians.size();
    std::vector<std::optional<ProjectedGaussian>> slots(n);
    parallel_for(n, [&](std::size_t i) { slots[i] = project_gaussian(scene.gaussians[i], std::uint32_t(i), cam); });
    std::vector<ProjectedGaussian> out;
    out.reserve(n);
    for (auto &s : slots)
        if (s) out.push_back(*s);
    return out;
}

bool tile_overlaps(const ProjectedGaussian &p, std::uint32_t x0, std::uint32_t y0, std::uint32_t x1,
                   std::uint32_t y1) noexcept {
    // Along a pixel row the Mahalanobis distance is convex in x, so the
    // minimizing pixel of the row is one of the two integers bracketing the
    // continuous minimizer, clamped into [x0, x1].
    const float a = p.inv_cov2d[0];
    const float b = p.inv_cov2d[1];
    for (std::uint32_t y = y0; y <= y1; ++y) {
        const float dy = float(y) - p.mean2d[1];
        const float xstar = p.mean2d[0] - (a > 0.0f ? b * dy / a : 0.0f);
        const float lo = std::clamp(std::floor(xstar), float(x0), float(x1));
        const float hi = std::clamp(std::ceil(xstar), float(x0), float(x1));
        if (p.covers(lo, float(y)) || p.covers(hi, float(y))) return true;
    }
    return false;
}

TileBinning bin_tiles(std::span<const ProjectedGaussian> projected, const Camera &cam, std::uint32_t tile_size) {
    if (tile_size < 1) throw ValidationError("bin_tiles: tile size must be positive");
    TileBinning bins;
    bins.tile_size = tile_size;
    bins.tiles_x = (cam.width + tile_size - 1) / tile_size;
    bins.tiles_y = (cam.height + tile_size - 1) / tile_size;
    const std::uint32_t ntiles = bins.tile_count();

    // Per-Gaussian tile lists, gathered in parallel then merged in index order.
    std::vector<std::vector<std::uint32_t>> hits(projected.size());
    parallel_for(projected.size(), [&](std::size_t i) {
        const auto &p = projected[i];
        const double rx = kSigmaCutoff * std::sqrt(double(p.cov2d[0])) + 1.0;
        const double ry = kSigmaCutoff * std::sqrt(double(p.cov2d[2])) + 1.0;
        const double px0 = std::max(0.0, std::floor(p.mean2d[0] - rx));
        const double py0 = std::max(0.0, std::floor(p.mean2d[1] - ry));
        const double px1 = std::min(double(cam.width) - 1.0, std::ceil(p.mean2d[0] + rx));
        const double py1 = std::min(double(cam.height) - 1.0, std::ceil(p.mean2d[1] + ry));
        if (px0 > px1 || py0 > py1) return;
        const auto tx0 = std::uint32_t(px0) / tile_size, tx1 = std::uint32_t(px1) / tile_size;
        const auto ty0 = std::uint32_t(py0) / tile_size, ty1 = std::uint32_t(py1) / tile_size;
        for (std::uint32_t ty = ty0; ty <= ty1; ++ty) {
            for (std::uint32_t tx = tx0; tx <= tx1; ++tx) {
                const std::uint32_t x0 = tx * tile_size, y0 = ty * tile_size;
                const std::uint32_t x1 = std::min(cam.width, x0 + tile_size) - 1;
                const std::uint32_t y1 = std::min(cam.height, y0 + tile_size) - 1;
                if (tile_overlaps(p, x0, y0, x1, y1)) hits[i].push_back(ty * bins.tiles_x + tx);
            }
        }
    });

    std::vector<std::uint32_t> counts(ntiles + 1, 0);
    for (const auto &h : hits)
        for (auto t : h) ++counts[t + 1];
    bins.offsets.assign(ntiles + 1, 0);
    for (std::uint32_t t = 0; t < ntiles; ++t) bins.offsets[t + 1] = bins.offsets[t] + counts[t + 1];
    bins.entries.resize(bins.offsets.back());
    std::vector<std::uint32_t> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
    for (std::uint32_t i = 0; i < hits.size(); ++i)
        for (auto t : hits[i]) bins.entries[cursor[t]++] = i;

    parallel_for(ntiles, [&](std::size_t t) {
        auto first = bins.entries.begin() + bins.offsets[t];
        auto last = bins.entries.begin() + bins.offsets[t + 1];
        std::sort(first, last, [&](std::uint32_t a, std::uint32_t b) {
            const auto &pa = projected[a];
            const auto &pb = projected[b];
            return pa.depth < pb.depth || (pa.depth == pb.depth && pa.source_id < pb.source_id);
        });
    });
    return bins;
}

} // namespace ssplat
