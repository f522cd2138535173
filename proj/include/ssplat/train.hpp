// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssplat/core.hpp"
#include "ssplat/projection.hpp"
#include "ssplat/rasterizer.hpp"

namespace ssplat {

/// Top-K of softmax(logits), ties to the lower index, renormalized to sum 1.
/// Indices ascending; weights in double precision.
struct TopK {
    std::vector<std::uint32_t> indices;
    std::vector<double> weights;
};

TopK select_top_k(std::span<const double> logits, std::uint32_t K);

/// softmax → keep top-K → renormalize, as stored SparseCoefficients.
SparseCoefficients normalize_coefficients(std::span<const double> logits, std::uint32_t K);
SparseCoefficients normalize_coefficients(std::span<const float> logits, std::uint32_t K);

/// Unconstrained pre-softmax parameters, laid out [gaussian][level][L].
struct CoefficientLogits {
    std::uint32_t num_gaussians = 0;
    std::uint32_t num_levels = 0;
    std::uint32_t L = 0;
    std::vector<double> values;

    CoefficientLogits() = default;
    CoefficientLogits(std::uint32_t g, std::uint32_t levels, std::uint32_t l)
        : num_gaussians(g), num_levels(levels), L(l), values(std::size_t(g) * levels * l, 0.0) {}

    std::span<const double> row(std::uint32_t g, std::uint32_t level) const {
        return std::span<const double>(values).subspan((std::size_t(g) * num_levels + level) * L, L);
    }
    std::span<double> row(std::uint32_t g, std::uint32_t level) {
        return std::span<double>(values).subspan((std::size_t(g) * num_levels + level) * L, L);
    }

    bool operator==(const CoefficientLogits &) const = default;
};

/// Everything the coefficient stage learns: logits plus one L×D codebook per
/// level (row-major, double).
struct FieldParams {
    CoefficientLogits logits;
    std::uint32_t K = 0;
    std::uint32_t D = 0;
    std::vector<std::vector<double>> codebooks;

    bool operator==(const FieldParams &) const = default;
};

struct TrainingBatch {
    Camera camera;
    std::vector<Framebuffer> targets;        // one H×W×D map per level
    std::optional<std::vector<std::uint8_t>> mask; // H×W, nonzero = supervised

    void validate(const SceneConfig &config) const;
};

/// A batch together with the frozen-geometry blend weights of its view.
struct PreparedBatch {
    const TrainingBatch *batch = nullptr;
    BlendWeights weights;
    std::size_t valid_pixels = 0;
};

PreparedBatch prepare_batch(const Scene &scene, const TrainingBatch &batch);

struct LossConfig {
    /// Weight of the optional (1 − cos) term; 0 disables it.
    double cosine_weight = 0.0;
};

/// Activations kept for the backward pass.
struct ForwardCache {
    const PreparedBatch *prepared = nullptr;
    std::vector<std::vector<TopK>> selection;     // [level][gaussian]
    std::vector<std::vector<double>> pixel_grads; // [level] HW×D, dLoss/dFeature
    double loss = 0.0;
};

/// loss = mean over supervised pixels and levels of ‖decoded − target‖²
/// (+ cosine_weight · (1 − cos)).
double forward_loss(const FieldParams &params, const PreparedBatch &batch, const LossConfig &config = {},
                    ForwardCache *cache = nullptr);

struct FieldGradients {
    std::vector<double> logits;                // same layout as CoefficientLogits::values
    std::vector<std::vector<double>> codebooks; // per level L×D

    double norm() const;
};

/// Analytic gradients. Top-K membership is held fixed; gradients reach only
/// the surviving logits.
FieldGradients backward(const FieldParams &params, const ForwardCache &cache);

/// First/second-moment adaptive optimizer state.
struct OptimState {
    double lr_logits = 5e-3;
    double lr_codebook = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t iteration = 0;
    std::vector<double> m_logits, v_logits;
    std::vector<std::vector<double>> m_codebook, v_codebook;

    void step(FieldParams &params, const FieldGradients &grads);
};

struct TrainConfig {
    std::uint32_t iterations = 2000;
    std::uint64_t seed = 0;
    double lr_logits = 5e-3;
    double lr_codebook = 1e-3;
    LossConfig loss;
    /// Standard deviation of the random logit initialization.
    double logit_init_std = 1e-2;
    double divergence_factor = 10.0;
    std::uint32_t divergence_patience = 100;
    /// Called after every iteration; may be empty.
    std::function<void(std::uint32_t iteration, double loss)> on_iteration;
};

struct LossRecord {
    std::uint32_t iteration = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
};

struct TrainResult {
    Scene scene;
    std::vector<LossRecord> curve;
    std::optional<double> heldout_initial;
    std::optional<double> heldout_final;
    std::string init_method; // "kmeans-seeded" or "unit-random"
};

/// Logits from a scene's stored coefficients: log of the densified weights.
FieldParams field_params_from_scene(const Scene &scene);

/// Random logits and a codebook seeded k-means++ style from per-Gaussian
/// target features (unit random atoms when no target sees a Gaussian).
FieldParams init_field_params(const Scene &scene, std::span<const PreparedBatch> batches, std::uint64_t seed,
                              double logit_std, std::string *method = nullptr);

/// Scene with coefficients and codebooks replaced by the learned field;
/// geometry is copied unchanged.
Scene apply_field(const Scene &scene, const FieldParams &params);

/// Learns the coefficient field with all geometry frozen. One batch per
/// iteration, cycling in order. `heldout`, when given, is scored before and
/// after training.
TrainResult train_field(const Scene &scene, std::span<const TrainingBatch> batches, const TrainConfig &config,
                        const TrainingBatch *heldout = nullptr);

/// `iter,loss,grad_norm` rows.
std::string loss_curve_csv(std::span<const LossRecord> curve);

} // namespace ssplat
