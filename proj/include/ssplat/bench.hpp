// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssplat/core.hpp"
#include "ssplat/projection.hpp"
#include "ssplat/sparse_splat.hpp"

namespace ssplat {

enum class BenchMethod { Dense, Sparse };

const char *to_string(BenchMethod m) noexcept;

/// Random volumetric scene used for timing. Geometry depends only on the
/// seed, so every (L, K) cell renders identical splats.
struct BenchSceneSpec {
    std::uint64_t seed = 7;
    std::uint32_t num_gaussians = 4000;
    std::uint32_t D = 512;
    float opacity_min = 0.02f;
    float opacity_max = 0.06f;
    float scale_min = 0.04f;
    float scale_max = 0.30f;
};

Scene make_bench_scene(const BenchSceneSpec &spec, std::uint32_t L, std::uint32_t K, std::uint32_t levels);
Camera make_bench_camera(std::uint32_t width, std::uint32_t height);

struct BenchPlan {
    BenchSceneSpec scene;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> image_sizes{{64, 64}}; // (H, W)
    std::vector<std::uint32_t> L_values{16, 64, 256};
    std::vector<std::uint32_t> K_values{4};
    std::vector<BenchMethod> methods{BenchMethod::Dense, BenchMethod::Sparse};
    std::uint32_t levels = 3;
    std::uint32_t repetitions = 31;
    std::uint32_t warmup = 10;
    /// Working-set budget in floats; cells above it are recorded as OOM.
    std::size_t max_elements = std::size_t(1) << 28;
    /// Render stage only; skips decode and post-processing.
    bool render_only = false;

    void validate() const;
};

struct BenchRecord {
    BenchMethod method = BenchMethod::Sparse;
    std::uint32_t L = 0;
    std::uint32_t K = 0;
    std::uint32_t levels = 0;
    std::uint32_t H = 0;
    std::uint32_t W = 0;
    StageTimings median;
    double iqr_ms = 0.0; // of the render stage
    bool oom = false;
};

/// Runs every (size, L, K, method) cell serially. `progress`, when set, is
/// called after each cell.
std::vector<BenchRecord> run_benchmark(const BenchPlan &plan,
                                       const std::function<void(const BenchRecord &)> &progress = {});

/// Median of `samples` (odd count gives the middle element).
double median(std::vector<double> samples);
/// Interquartile range, linear interpolation between order statistics.
double interquartile_range(std::vector<double> samples);

std::string machine_description();

/// Comment lines with machine info, then
/// `method,L,K,levels,H,W,render_ms,decode_ms,post_ms,iqr_ms`.
std::string bench_csv(std::span<const BenchRecord> records);
inline constexpr const char *kBenchCsvColumns = "method,L,K,levels,H,W,render_ms,decode_ms,post_ms,iqr_ms";

/// Median render time against L, one line per method, log-scaled y.
std::string bench_svg(std::span<const BenchRecord> records);

struct SpeedupReport {
    enum class Outcome { Pass, Fail, Incomparable };
    Outcome outcome = Outcome::Incomparable;
    double sparse_total_ms = 0.0;
    double dense_total_ms = 0.0;
    double ratio = 0.0; // dense / sparse
    std::string message;
};

/// Compares the total query path of both methods at L=64, K=4, 3 levels.
/// Single-method records are Incomparable; a missing paper-config cell when
/// both methods are present throws ValidationError.
SpeedupReport verify_speedup(std::span<const BenchRecord> records);

} // namespace ssplat
