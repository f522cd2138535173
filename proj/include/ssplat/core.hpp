// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ssplat {

using Vec3 = std::array<float, 3>;

/// Unit quaternion stored as (w, x, y, z).
struct Quaternion {
    float w = 1.0f;
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;

    bool operator==(const Quaternion &) const = default;
};

/// Top-K representation of an L-dimensional simplex vector: two parallel
/// K-arrays, indices strictly increasing.
struct SparseCoefficients {
    std::vector<std::uint32_t> indices;
    std::vector<float> values;

    std::size_t k() const noexcept { return indices.size(); }

    /// Throws ValidationError unless the entries form a valid K-sparse simplex
    /// vector over [0, L). When `expected_k` is nonzero the entry count must
    /// match it.
    void validate(std::uint32_t L, std::size_t expected_k = 0) const;

    bool operator==(const SparseCoefficients &) const = default;
};

struct SceneConfig {
    std::uint32_t num_levels = 3;
    std::uint32_t L = 64;
    std::uint32_t K = 4;
    std::uint32_t D = 512;

    void validate() const;

    bool operator==(const SceneConfig &) const = default;
};

struct Gaussian {
    Vec3 position{0.0f, 0.0f, 0.0f};
    Quaternion rotation;
    Vec3 scale{1.0f, 1.0f, 1.0f};
    float opacity = 1.0f;
    Vec3 color{0.0f, 0.0f, 0.0f};
    /// One entry per semantic level.
    std::vector<SparseCoefficients> coeffs;
    std::uint32_t id = 0;

    void validate(const SceneConfig &config) const;

    bool operator==(const Gaussian &) const = default;
};

/// L global basis vectors of dimension D for one semantic level, row-major.
class Codebook {
public:
    Codebook() = default;
    Codebook(std::uint32_t level, std::uint32_t L, std::uint32_t D);
    Codebook(std::uint32_t level, std::uint32_t L, std::uint32_t D, std::vector<float> atoms);

    std::uint32_t level() const noexcept { return level_; }
    std::uint32_t L() const noexcept { return L_; }
    std::uint32_t D() const noexcept { return D_; }

    std::span<const float> atom(std::uint32_t l) const;
    std::span<float> atom(std::uint32_t l);

    std::span<const float> data() const noexcept { return atoms_; }
    std::span<float> data() noexcept { return atoms_; }

    using MatrixMap = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    MatrixMap matrix() const { return MatrixMap(atoms_.data(), L_, D_); }

    void validate() const;

    bool operator==(const Codebook &) const = default;

private:
    std::uint32_t level_ = 0;
    std::uint32_t L_ = 0;
    std::uint32_t D_ = 0;
    std::vector<float> atoms_;
};

struct Scene {
    SceneConfig config;
    std::vector<Gaussian> gaussians;
    std::vector<Codebook> codebooks; // one per level

    /// Full structural validation; throws ValidationError.
    void validate() const;

    bool operator==(const Scene &) const = default;
};

/// Σ = R·S·Sᵀ·Rᵀ. Throws ValidationError on non-finite or non-positive input.
Eigen::Matrix3d build_covariance(const Quaternion &rotation, const Vec3 &scale);

Eigen::Matrix3d rotation_matrix(const Quaternion &q);

/// f = Σ_k values[k] · atom(indices[k]).
std::vector<float> reconstruct_feature(const SparseCoefficients &coeffs, const Codebook &codebook);

/// Dense L-vector with the stored entries scattered in.
std::vector<float> densify(const SparseCoefficients &coeffs, std::uint32_t L);

/// Inverse of densify for a vector with at most K nonzeros: keeps the K
/// largest entries (ties broken by lower index) in ascending index order.
SparseCoefficients compact(std::span<const float> dense, std::uint32_t K);

} // namespace ssplat
