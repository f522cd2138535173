// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ssplat/errors.hpp"

namespace ssplat {

namespace {

constexpr double kSimplexTol = 1e-6;
constexpr double kQuatTol = 1e-6;

bool all_finite(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

} // namespace

void SparseCoefficients::validate(std::uint32_t L, std::size_t expected_k) const {
    if (indices.size() != values.size()) {
        throw ValidationError("sparse coefficients: index/value arrays differ in length");
    }
    if (indices.empty()) {
        throw ValidationError("sparse coefficients: K must be at least 1");
    }
    if (expected_k != 0 && indices.size() != expected_k) {
        throw ValidationError("sparse coefficients: expected K=" + std::to_string(expected_k) + ", got " +
                              std::to_string(indices.size()));
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= L) {
            throw ValidationError("sparse coefficients: index " + std::to_string(indices[k]) +
                                  " out of range for L=" + std::to_string(L));
        }
        if (k > 0 && indices[k] <= indices[k - 1]) {
            throw ValidationError("sparse coefficients: indices must be strictly increasing");
        }
        if (!std::isfinite(values[k]) || values[k] < 0.0f) {
            throw ValidationError("sparse coefficients: values must be finite and non-negative");
        }
        sum += values[k];
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
        throw ValidationError("sparse coefficients: values sum to " + std::to_string(sum) + ", expected 1");
    }
}

void SceneConfig::validate() const {
    if (num_levels < 1) throw ValidationError("scene config: num_levels must be >= 1");
    if (K < 1) throw ValidationError("scene config: K must be >= 1");
    if (K > L) throw ValidationError("scene config: K must not exceed L");
    if (D < 1) throw ValidationError("scene config: D must be >= 1");
    if (L > 65536) throw ValidationError("scene config: L must fit 16-bit indices");
}

void Gaussian::validate(const SceneConfig &config) const {
    if (!all_finite(position) || !all_finite(scale) || !all_finite(color) || !std::isfinite(opacity)) {
        throw ValidationError("gaussian " + std::to_string(id) + ": non-finite attribute");
    }
    const double qn = std::sqrt(double(rotation.w) * rotation.w + double(rotation.x) * rotation.x +
                                double(rotation.y) * rotation.y + double(rotation.z) * rotation.z);
    if (!(std::abs(qn - 1.0) <= kQuatTol)) {
        throw ValidationError("gaussian " + std::to_string(id) + ": rotation is not a unit quaternion");
    }
    for (float s : scale) {
        if (!(s > 0.0f)) throw ValidationError("gaussian " + std::to_string(id) + ": scale must be positive");
    }
    if (opacity < 0.0f || opacity > 1.0f) {
        throw ValidationError("gaussian " + std::to_string(id) + ": opacity outside [0,1]");
    }
    if (coeffs.size() != config.num_levels) {
        throw ValidationError("gaussian " + std::to_string(id) + ": expected " +
                              std::to_string(config.num_levels) + " coefficient levels");
    }
    for (const auto &c : coeffs) c.validate(config.L, config.K);
}

Codebook::Codebook(std::uint32_t level, std::uint32_t L, std::uint32_t D)
    : level_(level), L_(L), D_(D), atoms_(std::size_t(L) * D, 0.0f) {}

Codebook::Codebook(std::uint32_t level, std::uint32_t L, std::uint32_t D, std::vector<float> atoms)
    : level_(level), L_(L), D_(D), atoms_(std::move(atoms)) {
    if (atoms_.size() != std::size_t(L) * D) {
        throw ValidationError("codebook: expected " + std::to_string(std::size_t(L) * D) + " entries, got " +
                              std::to_string(atoms_.size()));
    }
}

std::span<const float> Codebook::atom(std::uint32_t l) const {
    return std::span<const float>(atoms_).subspan(std::size_t(l) * D_, D_);
}

std::span<float> Codebook::atom(std::uint32_t l) {
    return std::span<float>(atoms_).subspan(std::size_t(l) * D_, D_);
}

void Codebook::validate() const {
    if (atoms_.size() != std::size_t(L_) * D_) throw ValidationError("codebook: size mismatch");
    if (!all_finite(atoms_)) throw ValidationError("codebook: non-finite atom entry");
}

void Scene::validate() const {
    config.validate();
    if (codebooks.size() != config.num_levels) {
        throw ValidationError("scene: expected one codebook per level");
    }
    for (std::uint32_t l = 0; l < config.num_levels; ++l) {
        const auto &cb = codebooks[l];
        cb.validate();
        if (cb.level() != l || cb.L() != config.L || cb.D() != config.D) {
            throw ValidationError("scene: codebook " + std::to_string(l) + " does not match scene config");
        }
    }
    std::vector<std::uint32_t> ids;
    ids.reserve(gaussians.size());
    for (const auto &g : gaussians) {
        g.validate(config);
        ids.push_back(g.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw ValidationError("scene: gaussian ids are not unique");
    }
}

Eigen::Matrix3d rotation_matrix(const Quaternion &q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    // s = 2/|q|² keeps R orthonormal for quaternions stored with rounding.
    const double s = 2.0 / (w * w + x * x + y * y + z * z);
    Eigen::Matrix3d R;
    R << 1 - s * (y * y + z * z), s * (x * y - w * z), s * (x * z + w * y),
         s * (x * y + w * z), 1 - s * (x * x + z * z), s * (y * z - w * x),
         s * (x * z - w * y), s * (y * z + w * x), 1 - s * (x * x + y * y);
    return R;
}

Eigen::Matrix3d build_covariance(const Quaternion &rotation, const Vec3 &scale) {
    const std::array<float, 4> q{rotation.w, rotation.x, rotation.y, rotation.z};
    if (!all_finite(q) || !all_finite(scale)) {
        throw ValidationError("build_covariance: non-finite input");
    }
    for (float s : scale) {
        if (!(s > 0.0f)) throw ValidationError("build_covariance: scale must be positive");
    }
    if (!(double(q[0]) * q[0] + double(q[1]) * q[1] + double(q[2]) * q[2] + double(q[3]) * q[3] > 0.0)) {
        throw ValidationError("build_covariance: zero quaternion");
    }
    const Eigen::Matrix3d R = rotation_matrix(rotation);
    const Eigen::Matrix3d M = R * Eigen::Vector3d(scale[0], scale[1], scale[2]).asDiagonal();
    Eigen::Matrix3d cov = M * M.transpose();
    // Exact symmetry; the product is symmetric only up to rounding.
    for (int r = 0; r < 3; ++r)
        for (int c = r + 1; c < 3; ++c) cov(c, r) = cov(r, c);
    return cov;
}

std::vector<float> reconstruct_feature(const SparseCoefficients &coeffs, const Codebook &codebook) {
    coeffs.validate(codebook.L());
    std::vector<float> out(codebook.D(), 0.0f);
    for (std::size_t k = 0; k < coeffs.k(); ++k) {
        const float w = coeffs.values[k];
        const auto atom = codebook.atom(coeffs.indices[k]);
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += w * atom[d];
    }
    return out;
}

std::vector<float> densify(const SparseCoefficients &coeffs, std::uint32_t L) {
    coeffs.validate(L);
    std::vector<float> out(L, 0.0f);
    for (std::size_t k = 0; k < coeffs.k(); ++k) out[coeffs.indices[k]] = coeffs.values[k];
    return out;
}

SparseCoefficients compact(std::span<const float> dense, std::uint32_t K) {
    if (K < 1 || K > dense.size()) throw ValidationError("compact: K must be in [1, L]");
    std::vector<std::uint32_t> order(dense.size());
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + K, order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return dense[a] > dense[b] || (dense[a] == dense[b] && a < b);
    });
    order.resize(K);
    std::sort(order.begin(), order.end());
    SparseCoefficients out;
    out.indices = order;
    out.values.reserve(K);
    for (auto i : order) out.values.push_back(dense[i]);
    return out;
}

} // namespace ssplat
