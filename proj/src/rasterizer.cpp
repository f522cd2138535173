// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ssplat/errors.hpp"
#include "ssplat/parallel.hpp"
#include "tile_walk.hpp"

namespace ssplat {

const char *to_string(ChannelTag tag) noexcept {
    switch (tag) {
    case ChannelTag::Color: return "color";
    case ChannelTag::DenseFeature: return "dense-feature";
    case ChannelTag::Coefficient: return "coefficient";
    case ChannelTag::Scalar: return "scalar";
    }
    return "unknown";
}

void Framebuffer::validate(std::uint32_t group) const {
    if (data.size() != pixel_count() * channels) throw ValidationError("framebuffer: data size mismatch");
    for (float v : data)
        if (!std::isfinite(v)) throw ValidationError("framebuffer: non-finite entry");
    if (tag != ChannelTag::Coefficient) return;
    const std::uint32_t g = group == 0 ? channels : group;
    if (g == 0 || channels % g != 0) throw ValidationError("framebuffer: channel group does not divide channels");
    for (std::size_t p = 0; p < pixel_count(); ++p) {
        for (std::uint32_t base = 0; base < channels; base += g) {
            double sum = 0.0;
            for (std::uint32_t c = 0; c < g; ++c) {
                const float v = data[p * channels + base + c];
                if (v < 0.0f || v > 1.0f) throw ValidationError("framebuffer: coefficient outside [0,1]");
                sum += v;
            }
            if (sum > 1.0 + 1e-5) throw ValidationError("framebuffer: coefficient group sums above 1");
        }
    }
}

double max_abs_diff(const Framebuffer &a, const Framebuffer &b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw ValidationError("max_abs_diff: framebuffer dimensions differ");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(double(a.data[i]) - b.data[i]));
    return m;
}

std::vector<float> blend_pixel_dense(std::span<const BlendInput> ordered, float x, float y, std::size_t channels,
                                     BlendState *state) {
    std::vector<float> out(channels, 0.0f);
    BlendState local;
    BlendState &s = state ? *state : local;
    for (const auto &in : ordered) {
        if (s.transmittance < kTransmittanceStop) break;
        const float d2 = in.gaussian->mahalanobis2(x, y);
        if (!(d2 <= kSigmaCutoff * kSigmaCutoff)) continue;
        const float alpha = alpha_from_mahalanobis(*in.gaussian, d2);
        const float e = alpha * s.transmittance;
        for (std::size_t c = 0; c < channels; ++c) out[c] += e * in.channels[c];
        s.transmittance *= 1.0f - alpha;
    }
    return out;
}

ChannelMatrix gather_channels(const Scene &scene, const ChannelSource &source) {
    const std::size_t G = scene.gaussians.size();
    const auto &cfg = scene.config;
    if (source.kind != ChannelSource::Kind::Color && source.kind != ChannelSource::Kind::AllCoefficients &&
        source.level >= cfg.num_levels) {
        throw ValidationError("channel source: level " + std::to_string(source.level) + " out of range");
    }
    ChannelMatrix m;
    switch (source.kind) {
    case ChannelSource::Kind::Color:
        m.channels = 3;
        m.tag = ChannelTag::Color;
        m.values.reserve(G * 3);
        for (const auto &g : scene.gaussians) m.values.insert(m.values.end(), g.color.begin(), g.color.end());
        break;
    case ChannelSource::Kind::Features:
        m.channels = cfg.D;
        m.tag = ChannelTag::DenseFeature;
        m.values.reserve(G * cfg.D);
        for (const auto &g : scene.gaussians) {
            const auto f = reconstruct_feature(g.coeffs.at(source.level), scene.codebooks.at(source.level));
            m.values.insert(m.values.end(), f.begin(), f.end());
        }
        break;
    case ChannelSource::Kind::Coefficients:
        m.channels = cfg.L;
        m.tag = ChannelTag::Coefficient;
        m.values.reserve(G * cfg.L);
        for (const auto &g : scene.gaussians) {
            const auto w = densify(g.coeffs.at(source.level), cfg.L);
            m.values.insert(m.values.end(), w.begin(), w.end());
        }
        break;
    case ChannelSource::Kind::AllCoefficients:
        m.channels = cfg.L * cfg.num_levels;
        m.tag = ChannelTag::Coefficient;
        m.values.reserve(G * m.channels);
        for (const auto &g : scene.gaussians) {
            for (std::uint32_t l = 0; l < cfg.num_levels; ++l) {
                const auto w = densify(g.coeffs.at(l), cfg.L);
                m.values.insert(m.values.end(), w.begin(), w.end());
            }
        }
        break;
    }
    return m;
}

void check_render_budget(const Camera &cam, std::size_t channels, const RenderOptions &options) {
    const std::size_t need = std::size_t(cam.width) * cam.height * channels;
    if (channels != 0 && need / channels != std::size_t(cam.width) * cam.height) {
        throw ResourceError("render: output size overflows");
    }
    if (need > options.max_elements) {
        throw ResourceError("render: out of memory, " + std::to_string(need) + " output floats requested, budget is " +
                            std::to_string(options.max_elements));
    }
}

namespace {

void fill_background(Framebuffer &fb, const ChannelMatrix &channels, const RenderOptions &options,
                     std::span<const float> transmittance) {
    if (channels.tag != ChannelTag::Color) return;
    for (std::size_t p = 0; p < fb.pixel_count(); ++p)
        for (std::uint32_t c = 0; c < 3; ++c) fb.data[p * 3 + c] += transmittance[p] * options.background[c];
}

bool has_background(const ChannelMatrix &channels, const RenderOptions &options) {
    return channels.tag == ChannelTag::Color &&
           std::any_of(options.background.begin(), options.background.end(), [](float v) { return v != 0.0f; });
}

} // namespace

Framebuffer render_channels(const Scene &scene, const Camera &cam, const ChannelMatrix &channels,
                            const RenderOptions &options, BlendStats *stats) {
    cam.validate();
    const std::uint32_t C = channels.channels;
    if (channels.values.size() != scene.gaussians.size() * std::size_t(C)) {
        throw ValidationError("render: channel matrix does not match the scene");
    }
    check_render_budget(cam, C, options);

    const auto projected = project_scene(scene, cam);
    const auto bins = bin_tiles(projected, cam, options.tile_size);

    // Channel rows reordered to projected order for locality.
    std::vector<float> rows(projected.size() * std::size_t(C));
    for (std::size_t i = 0; i < projected.size(); ++i) {
        const auto src = channels.row(projected[i].source_index);
        std::copy(src.begin(), src.end(), rows.begin() + i * C);
    }

    Framebuffer fb(cam.width, cam.height, C, channels.tag);
    float *out = fb.data.data();
    const float *in = rows.data();
    const auto count = detail::walk_tiles(projected, bins, cam, options.early_exit,
                                          [&](std::size_t pix, std::uint32_t j, float e) {
                                              float *o = out + pix * C;
                                              const float *v = in + std::size_t(j) * C;
                                              for (std::uint32_t c = 0; c < C; ++c) o[c] += e * v[c];
                                          });
    if (stats) {
        stats->contributions += count;
        stats->channel_updates += count * C;
    }
    if (has_background(channels, options)) {
        // Final transmittance equals 1 − Σ e_i per pixel.
        std::vector<float> T(fb.pixel_count(), 1.0f);
        detail::walk_tiles(projected, bins, cam, options.early_exit,
                           [&](std::size_t pix, std::uint32_t, float e) { T[pix] -= e; });
        fill_background(fb, channels, options, T);
    }
    return fb;
}

Framebuffer render_dense(const Scene &scene, const Camera &cam, const ChannelSource &source,
                         const RenderOptions &options, BlendStats *stats) {
    const std::size_t C = source.kind == ChannelSource::Kind::Color ? 3
                          : source.kind == ChannelSource::Kind::Features ? scene.config.D
                          : source.kind == ChannelSource::Kind::Coefficients ? scene.config.L
                                                                             : std::size_t(scene.config.L) *
                                                                                   scene.config.num_levels;
    check_render_budget(cam, C, options);
    return render_channels(scene, cam, gather_channels(scene, source), options, stats);
}

Framebuffer oracle_render(const Scene &scene, const Camera &cam, const ChannelMatrix &channels,
                          const RenderOptions &options) {
    cam.validate();
    const std::uint32_t C = channels.channels;
    if (channels.values.size() != scene.gaussians.size() * std::size_t(C)) {
        throw ValidationError("oracle_render: channel matrix does not match the scene");
    }
    check_render_budget(cam, C, options);
    const auto projected = project_scene(scene, cam);

    Framebuffer fb(cam.width, cam.height, C, channels.tag);
    std::vector<std::uint32_t> order;
    std::vector<double> acc(C);
    for (std::uint32_t y = 0; y < cam.height; ++y) {
        for (std::uint32_t x = 0; x < cam.width; ++x) {
            const float fx = float(x), fy = float(y);
            order.clear();
            for (std::uint32_t i = 0; i < projected.size(); ++i)
                if (projected[i].covers(fx, fy)) order.push_back(i);
            std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
                const auto &pa = projected[a];
                const auto &pb = projected[b];
                return pa.depth < pb.depth || (pa.depth == pb.depth && pa.source_id < pb.source_id);
            });
            std::fill(acc.begin(), acc.end(), 0.0);
            double T = 1.0;
            for (auto i : order) {
                const double alpha = eval_alpha(projected[i], fx, fy);
                const auto v = channels.row(projected[i].source_index);
                for (std::uint32_t c = 0; c < C; ++c) acc[c] += double(v[c]) * alpha * T;
                T *= 1.0 - alpha;
                if (options.early_exit && T < double(kTransmittanceStop)) break;
            }
            auto px = fb.pixel(x, y);
            for (std::uint32_t c = 0; c < C; ++c) {
                double v = acc[c];
                if (channels.tag == ChannelTag::Color) v += T * options.background[c];
                px[c] = float(v);
            }
        }
    }
    return fb;
}

BlendWeights collect_blend_weights(const Scene &scene, const Camera &cam, const RenderOptions &options) {
    cam.validate();
    const auto projected = project_scene(scene, cam);
    const auto bins = bin_tiles(projected, cam, options.tile_size);
    const std::size_t npix = std::size_t(cam.width) * cam.height;

    // Each pixel belongs to exactly one tile, so per-pixel lists are private.
    std::vector<std::vector<std::pair<std::uint32_t, float>>> lists(npix);
    detail::walk_tiles(projected, bins, cam, options.early_exit, [&](std::size_t pix, std::uint32_t j, float e) {
        lists[pix].emplace_back(projected[j].source_index, e);
    });

    BlendWeights w;
    w.width = cam.width;
    w.height = cam.height;
    w.offsets.resize(npix + 1, 0);
    for (std::size_t p = 0; p < npix; ++p) w.offsets[p + 1] = w.offsets[p] + std::uint32_t(lists[p].size());
    w.gaussian.reserve(w.offsets.back());
    w.weight.reserve(w.offsets.back());
    for (const auto &l : lists) {
        for (const auto &[g, e] : l) {
            w.gaussian.push_back(g);
            w.weight.push_back(e);
        }
    }
    return w;
}

} // namespace ssplat
