// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ssplat/errors.hpp"
#include "ssplat/io.hpp"

namespace ssplat {

namespace {

constexpr std::size_t kCanonicalCount = 4;
constexpr double kLevelNoise = 0.25;
constexpr double kCameraDistance = 2.6;
constexpr double kFovDegrees = 50.0;

using Rng = std::mt19937_64;

std::vector<double> random_normal(Rng &rng, std::size_t n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n);
    for (auto &x : v) x = nd(rng);
    return v;
}

void normalize(std::vector<double> &v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double &x : v) x /= n;
}

/// `count` unit vectors in R^D, mutually orthogonal when count <= D.
std::vector<std::vector<double>> random_directions(Rng &rng, std::size_t count, std::size_t D) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < count; ++i) {
        auto v = random_normal(rng, D);
        if (i < D) {
            for (const auto &u : out) {
                double dot = 0.0;
                for (std::size_t d = 0; d < D; ++d) dot += v[d] * u[d];
                for (std::size_t d = 0; d < D; ++d) v[d] -= dot * u[d];
            }
        }
        normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

/// Class of a point in [-1,1]² under a block partition with A blocks; the last
/// block row is stretched when A is not a multiple of the column count.
std::uint32_t block_class(double x, double y, std::uint32_t A) {
    const auto cols = std::uint32_t(std::ceil(std::sqrt(double(A))));
    const auto rows = (A + cols - 1) / cols;
    const double u = std::clamp((x + 1.0) / 2.0, 0.0, 0.999999);
    const double v = std::clamp((y + 1.0) / 2.0, 0.0, 0.999999);
    const auto by = std::uint32_t(v * rows);
    const std::uint32_t in_row = by + 1 == rows ? A - (rows - 1) * cols : cols;
    const auto bx = std::uint32_t(u * in_row);
    return by * cols + bx;
}

Quaternion about_z(double angle) {
    return {float(std::cos(angle / 2)), 0.0f, 0.0f, float(std::sin(angle / 2))};
}

SparseCoefficients one_hot(std::uint32_t index, std::uint32_t K) {
    // Padding zeros take the lowest free indices, which is also the order
    // compact() picks ties in, so densify/compact round-trips.
    std::vector<std::uint32_t> idx{index};
    for (std::uint32_t j = 0; idx.size() < K; ++j)
        if (j != index) idx.push_back(j);
    std::sort(idx.begin(), idx.end());
    SparseCoefficients c;
    c.indices = idx;
    for (auto i : idx) c.values.push_back(i == index ? 1.0f : 0.0f);
    return c;
}

} // namespace

void SyntheticSpec::validate() const {
    config.validate();
    if (num_classes < 2) throw ValidationError("synthetic: at least 2 classes are required");
    if (num_classes > config.L) throw ValidationError("synthetic: number of classes exceeds codebook size L");
    if (num_gaussians < num_classes) throw ValidationError("synthetic: need at least one gaussian per class");
    if (width < 1 || height < 1) throw ValidationError("synthetic: image must be at least 1x1");
    if (train_views < 1) throw ValidationError("synthetic: at least one training view is required");
    if (!(atom_scale > 0.0f)) throw ValidationError("synthetic: atom scale must be positive");
    if (!class_atoms.empty()) {
        if (class_atoms.size() != num_classes) throw ValidationError("synthetic: one atom per class is required");
        for (const auto &a : class_atoms)
            if (a.size() != config.D) throw ValidationError("synthetic: class atom dimension mismatch");
    }
}

SyntheticBundle generate_synthetic(const SyntheticSpec &spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto &cfg = spec.config;
    const std::uint32_t A = spec.num_classes;
    const std::uint32_t G = spec.num_gaussians;
    const std::size_t D = cfg.D;

    SyntheticBundle bundle;
    bundle.scene.config = cfg;

    // Class directions and the canonical set, jointly orthogonal when D allows.
    auto dirs = random_directions(rng, A + kCanonicalCount, D);
    if (!spec.class_atoms.empty()) {
        for (std::uint32_t c = 0; c < A; ++c) {
            dirs[c].assign(spec.class_atoms[c].begin(), spec.class_atoms[c].end());
            normalize(dirs[c]);
        }
    }

    for (std::uint32_t level = 0; level < cfg.num_levels; ++level) {
        Codebook cb(level, cfg.L, cfg.D);
        for (std::uint32_t l = 0; l < cfg.L; ++l) {
            auto noise = random_normal(rng, D);
            std::vector<double> atom(D);
            if (l < A) {
                for (std::size_t d = 0; d < D; ++d) atom[d] = dirs[l][d] + kLevelNoise * noise[d] / std::sqrt(double(D));
                normalize(atom);
            } else {
                atom = std::move(noise);
                normalize(atom);
                for (double &x : atom) x *= 0.5;
            }
            auto row = cb.atom(l);
            for (std::size_t d = 0; d < D; ++d) row[d] = float(atom[d] * spec.atom_scale);
        }
        bundle.scene.codebooks.push_back(std::move(cb));
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto side = std::uint32_t(std::ceil(std::sqrt(double(G))));
    const double spacing = 2.0 / side;
    std::vector<std::array<double, 2>> centers;
    if (spec.layout == SyntheticLayout::Clustered) {
        for (std::uint32_t c = 0; c < A; ++c) centers.push_back({-0.7 + 1.4 * unit(rng), -0.7 + 1.4 * unit(rng)});
    }
    const double cluster_sigma = 0.18;
    const double cluster_spacing = 2.0 * cluster_sigma * std::sqrt(std::numbers::pi * A / double(G));
    std::normal_distribution<double> nd(0.0, 1.0);

    for (std::uint32_t i = 0; i < G; ++i) {
        Gaussian g;
        g.id = i;
        double x, y, s;
        std::uint32_t cls;
        if (spec.layout == SyntheticLayout::Grid) {
            const std::uint32_t gx = i % side, gy = i / side;
            x = -1.0 + (gx + 0.5) * spacing + 0.2 * spacing * (unit(rng) - 0.5);
            y = -1.0 + (gy + 0.5) * spacing + 0.2 * spacing * (unit(rng) - 0.5);
            cls = block_class(x, y, A);
            s = spacing;
        } else {
            cls = i % A;
            x = centers[cls][0] + cluster_sigma * nd(rng);
            y = centers[cls][1] + cluster_sigma * nd(rng);
            s = cluster_spacing;
        }
        const double z = 0.04 * (unit(rng) - 0.5);
        const double aniso = 0.8 + 0.4 * unit(rng);
        g.position = {float(x), float(y), float(z)};
        g.rotation = about_z(2.0 * std::numbers::pi * unit(rng));
        g.scale = {float(0.6 * s * aniso), float(0.6 * s / aniso), float(0.15 * s)};
        g.opacity = float(0.6 + 0.35 * unit(rng));
        const double hue = double(cls) / A;
        g.color = {float(0.5 + 0.4 * std::cos(2 * std::numbers::pi * hue)),
                   float(0.5 + 0.4 * std::cos(2 * std::numbers::pi * (hue + 1.0 / 3))),
                   float(0.5 + 0.4 * std::cos(2 * std::numbers::pi * (hue + 2.0 / 3)))};
        for (std::uint32_t level = 0; level < cfg.num_levels; ++level) g.coeffs.push_back(one_hot(cls, cfg.K));
        bundle.classes.push_back(cls);
        bundle.scene.gaussians.push_back(std::move(g));
    }

    for (std::uint32_t v = 0; v < spec.train_views; ++v) {
        const double a = 2.0 * std::numbers::pi * v / spec.train_views;
        const Eigen::Vector3d eye(0.35 * std::cos(a), 0.35 * std::sin(a), -kCameraDistance);
        bundle.cameras.push_back(Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0), kFovDegrees,
                                                 spec.width, spec.height));
    }
    bundle.heldout_view = bundle.cameras.size();
    bundle.cameras.push_back(Camera::look_at(Eigen::Vector3d(0.12, -0.08, -kCameraDistance + 0.1),
                                             Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0), kFovDegrees,
                                             spec.width, spec.height));

    ChannelMatrix indicator;
    indicator.channels = A;
    indicator.tag = ChannelTag::Scalar;
    indicator.values.assign(std::size_t(G) * A, 0.0f);
    for (std::uint32_t i = 0; i < G; ++i) indicator.values[std::size_t(i) * A + bundle.classes[i]] = 1.0f;
    for (const auto &cam : bundle.cameras) {
        const auto fb = render_channels(bundle.scene, cam, indicator);
        std::vector<std::vector<std::uint8_t>> view(A, std::vector<std::uint8_t>(fb.pixel_count(), 0));
        for (std::size_t p = 0; p < fb.pixel_count(); ++p)
            for (std::uint32_t c = 0; c < A; ++c) view[c][p] = fb.data[p * A + c] > 0.5f ? 1 : 0;
        bundle.masks.push_back(std::move(view));
    }

    auto &qs = bundle.queries;
    qs.D = cfg.D;
    for (std::size_t c = 0; c < kCanonicalCount; ++c) qs.canonicals.emplace_back(dirs[A + c].begin(), dirs[A + c].end());
    for (std::uint32_t c = 0; c < A; ++c) {
        QueryEntry e;
        e.embedding.name = "class_" + std::to_string(c);
        e.embedding.vector.assign(dirs[c].begin(), dirs[c].end());
        qs.queries.push_back(std::move(e));
    }
    return bundle;
}

std::vector<Framebuffer> render_targets(const Scene &scene, const Camera &cam) {
    std::vector<Framebuffer> out;
    for (std::uint32_t level = 0; level < scene.config.num_levels; ++level) {
        out.push_back(render_dense(scene, cam, ChannelSource::features(level)));
    }
    return out;
}

} // namespace ssplat
