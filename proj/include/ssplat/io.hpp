// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssplat/core.hpp"
#include "ssplat/projection.hpp"
#include "ssplat/query.hpp"
#include "ssplat/rasterizer.hpp"

namespace ssplat {

inline constexpr std::uint32_t kSceneFormatVersion = 1;
inline constexpr std::uint32_t kFramebufferFormatVersion = 1;

// Scene file, little-endian:
//   "LSV2" | version u32 | gaussian count u32 | num_levels u32 | L u32 | K u32 | D u32
//   per Gaussian: id u32 | position f32×3 | quaternion (w,x,y,z) f32×4 | scale f32×3 |
//                 opacity f32 | color f32×3 | per level: K u16 indices, K f32 values
//   per level: L×D f32 codebook, row-major

std::vector<std::uint8_t> encode_scene(const Scene &scene);
Scene decode_scene(std::span<const std::uint8_t> bytes);

void save_scene(const std::filesystem::path &path, const Scene &scene);
Scene load_scene(const std::filesystem::path &path);

// Framebuffer file: "LSFB" | version u32 | width u32 | height u32 |
// channels u32 | tag u32 | H×W×C f32

std::vector<std::uint8_t> encode_framebuffer(const Framebuffer &fb);
Framebuffer decode_framebuffer(std::span<const std::uint8_t> bytes);

void dump_framebuffer(const std::filesystem::path &path, const Framebuffer &fb);
/// Loads a framebuffer; when `expected` is set a different tag is a
/// LoadError of kind WrongTag.
Framebuffer load_framebuffer(const std::filesystem::path &path, std::optional<ChannelTag> expected = std::nullopt);
/// Loads into an already-shaped buffer; dimension or tag mismatch throws.
void load_framebuffer_into(const std::filesystem::path &path, Framebuffer &dst);

struct QueryEntry {
    QueryEmbedding embedding;
    std::optional<std::string> gt_mask_path;
};

struct QuerySet {
    std::uint32_t D = 0;
    std::vector<std::vector<float>> canonicals;
    std::vector<QueryEntry> queries;

    const QueryEntry *find(const std::string &name) const;
    std::vector<std::string> names() const;
};

nlohmann::json query_set_to_json(const QuerySet &set);
QuerySet query_set_from_json(const nlohmann::json &j);
void save_query_set(const std::filesystem::path &path, const QuerySet &set);
QuerySet load_query_set(const std::filesystem::path &path);

nlohmann::json camera_to_json(const Camera &cam);
Camera camera_from_json(const nlohmann::json &j);

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path &path, const std::string &text);

// Synthetic scenes with known ground truth.

enum class SyntheticLayout { Grid, Clustered };

struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::uint32_t num_gaussians = 1024;
    std::uint32_t num_classes = 8;
    SyntheticLayout layout = SyntheticLayout::Grid;
    std::uint32_t width = 64;
    std::uint32_t height = 64;
    SceneConfig config{3, 64, 4, 32};
    std::uint32_t train_views = 4;
    /// Norm of every ground-truth atom.
    float atom_scale = 1.0f;
    /// Optional per-class base directions (A vectors of length D); generated
    /// from the seed when empty.
    std::vector<std::vector<float>> class_atoms;

    void validate() const;
};

struct SyntheticBundle {
    Scene scene; // ground-truth coefficients and codebooks
    std::vector<Camera> cameras;
    std::size_t heldout_view = 0;
    std::vector<std::uint32_t> classes; // per Gaussian
    /// masks[view][class], H×W, 1 where the rendered class indicator exceeds 0.5.
    std::vector<std::vector<std::vector<std::uint8_t>>> masks;
    QuerySet queries; // one query per class plus the canonical set
};

SyntheticBundle generate_synthetic(const SyntheticSpec &spec);

/// Ground-truth dense feature maps for one view, one framebuffer per level.
std::vector<Framebuffer> render_targets(const Scene &scene, const Camera &cam);

} // namespace ssplat
