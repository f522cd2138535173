// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

// Random scenes and cameras shared by the unit and acceptance suites.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ssplat/core.hpp"
#include "ssplat/projection.hpp"
#include "ssplat/train.hpp"

namespace ssplat::testing {

struct RandomSceneOptions {
    std::uint32_t gaussians = 200;
    SceneConfig config{3, 64, 4, 16};
    float opacity_min = 0.1f;
    float opacity_max = 0.95f;
    float scale_min = 0.03f;
    float scale_max = 0.2f;
    float logit_std = 2.0f;
};

inline Quaternion random_rotation(std::mt19937_64 &rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    double q[4] = {nd(rng), nd(rng), nd(rng), nd(rng)};
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    return {float(q[0] / n), float(q[1] / n), float(q[2] / n), float(q[3] / n)};
}

/// Gaussians scattered in [-1,1]²×[-0.5,0.5] with random top-K coefficients
/// and Gaussian-distributed codebooks.
inline Scene random_scene(std::uint64_t seed, const RandomSceneOptions &o = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    Scene scene;
    scene.config = o.config;
    std::vector<double> logits(o.config.L);
    for (std::uint32_t i = 0; i < o.gaussians; ++i) {
        Gaussian g;
        g.id = 1000 + i;
        g.position = {float(2 * u(rng) - 1), float(2 * u(rng) - 1), float(u(rng) - 0.5)};
        g.rotation = random_rotation(rng);
        for (float &s : g.scale) s = float(o.scale_min + (o.scale_max - o.scale_min) * u(rng));
        g.opacity = float(o.opacity_min + (o.opacity_max - o.opacity_min) * u(rng));
        g.color = {float(u(rng)), float(u(rng)), float(u(rng))};
        for (std::uint32_t l = 0; l < o.config.num_levels; ++l) {
            for (double &z : logits) z = o.logit_std * nd(rng);
            g.coeffs.push_back(normalize_coefficients(std::span<const double>(logits), o.config.K));
        }
        scene.gaussians.push_back(std::move(g));
    }
    for (std::uint32_t l = 0; l < o.config.num_levels; ++l) {
        Codebook cb(l, o.config.L, o.config.D);
        for (float &v : cb.data()) v = float(nd(rng));
        scene.codebooks.push_back(std::move(cb));
    }
    return scene;
}

inline Camera test_camera(std::uint32_t width = 64, std::uint32_t height = 64) {
    return Camera::look_at(Eigen::Vector3d(0.0, 0.0, -3.0), Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0), 45.0,
                           width, height);
}

/// Training batch with N(0, sd) targets for every level.
inline TrainingBatch random_batch(const SceneConfig &cfg, const Camera &cam, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sd);
    TrainingBatch b;
    b.camera = cam;
    for (std::uint32_t l = 0; l < cfg.num_levels; ++l) {
        Framebuffer t(cam.width, cam.height, cfg.D, ChannelTag::DenseFeature);
        for (float &v : t.data) v = float(nd(rng));
        b.targets.push_back(std::move(t));
    }
    return b;
}

} // namespace ssplat::testing
