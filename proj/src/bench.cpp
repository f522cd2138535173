// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "ssplat/errors.hpp"
#include "ssplat/parallel.hpp"
#include "ssplat/train.hpp"

namespace ssplat {

const char *to_string(BenchMethod m) noexcept { return m == BenchMethod::Dense ? "dense" : "sparse"; }

Scene make_bench_scene(const BenchSceneSpec &spec, std::uint32_t L, std::uint32_t K, std::uint32_t levels) {
    Scene scene;
    scene.config = SceneConfig{levels, L, K, spec.D};
    scene.config.validate();

    std::mt19937_64 geometry(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::uint32_t i = 0; i < spec.num_gaussians; ++i) {
        Gaussian g;
        g.id = i;
        g.position = {float(-1.0 + 2.0 * u(geometry)), float(-1.0 + 2.0 * u(geometry)), float(-0.5 + u(geometry))};
        double q[4] = {nd(geometry), nd(geometry), nd(geometry), nd(geometry)};
        const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        g.rotation = {float(q[0] / qn), float(q[1] / qn), float(q[2] / qn), float(q[3] / qn)};
        // Renormalize in float so the stored quaternion passes the unit check.
        const double fn = std::sqrt(double(g.rotation.w) * g.rotation.w + double(g.rotation.x) * g.rotation.x +
                                    double(g.rotation.y) * g.rotation.y + double(g.rotation.z) * g.rotation.z);
        g.rotation = {float(g.rotation.w / fn), float(g.rotation.x / fn), float(g.rotation.y / fn),
                      float(g.rotation.z / fn)};
        for (float &s : g.scale) s = float(spec.scale_min + (spec.scale_max - spec.scale_min) * u(geometry));
        g.opacity = float(spec.opacity_min + (spec.opacity_max - spec.opacity_min) * u(geometry));
        g.color = {float(u(geometry)), float(u(geometry)), float(u(geometry))};
        scene.gaussians.push_back(std::move(g));
    }

    // Coefficients and codebooks depend on (L, K) but not on the geometry stream.
    std::mt19937_64 semantic(spec.seed ^ (std::uint64_t(L) << 32) ^ K);
    std::vector<double> logits(L);
    for (auto &g : scene.gaussians) {
        for (std::uint32_t level = 0; level < levels; ++level) {
            for (double &z : logits) z = 2.0 * nd(semantic);
            g.coeffs.push_back(normalize_coefficients(std::span<const double>(logits), K));
        }
    }
    for (std::uint32_t level = 0; level < levels; ++level) {
        Codebook cb(level, L, spec.D);
        for (float &v : cb.data()) v = float(nd(semantic) / std::sqrt(double(spec.D)));
        scene.codebooks.push_back(std::move(cb));
    }
    return scene;
}

Camera make_bench_camera(std::uint32_t width, std::uint32_t height) {
    return Camera::look_at(Eigen::Vector3d(0.0, 0.0, -3.0), Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0), 40.0,
                           width, height);
}

void BenchPlan::validate() const {
    if (repetitions < 5 || repetitions % 2 == 0) throw ValidationError("bench: repetitions must be odd and >= 5");
    if (image_sizes.empty() || L_values.empty() || K_values.empty() || methods.empty()) {
        throw ValidationError("bench: sweeps must be non-empty");
    }
    if (levels < 1) throw ValidationError("bench: levels must be >= 1");
    for (auto [h, w] : image_sizes)
        if (h < 1 || w < 1) throw ValidationError("bench: image sizes must be positive");
    for (auto L : L_values)
        for (auto K : K_values)
            if (K < 1 || K > L) throw ValidationError("bench: every K must satisfy 1 <= K <= L");
}

double median(std::vector<double> samples) {
    if (samples.empty()) return 0.0;
    const auto mid = samples.begin() + std::ptrdiff_t(samples.size() / 2);
    std::nth_element(samples.begin(), mid, samples.end());
    if (samples.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(samples.begin(), mid);
    return 0.5 * (lo + hi);
}

double interquartile_range(std::vector<double> samples) {
    if (samples.size() < 2) return 0.0;
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double q) {
        const double pos = q * double(samples.size() - 1);
        const auto i = std::size_t(std::floor(pos));
        const double frac = pos - double(i);
        return i + 1 < samples.size() ? samples[i] * (1.0 - frac) + samples[i + 1] * frac : samples[i];
    };
    return quantile(0.75) - quantile(0.25);
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Working set of one render: output plus per-Gaussian channel storage.
std::size_t working_set(BenchMethod method, const Scene &scene, std::uint32_t H, std::uint32_t W) {
    const auto &cfg = scene.config;
    const std::size_t C = std::size_t(cfg.L) * cfg.num_levels;
    const std::size_t per_gaussian = method == BenchMethod::Dense ? C : std::size_t(cfg.K) * cfg.num_levels * 2;
    return std::size_t(H) * W * C + scene.gaussians.size() * per_gaussian;
}

BenchRecord run_cell(const BenchPlan &plan, BenchMethod method, const Scene &scene, const Camera &cam,
                     const QueryEmbedding &query, const std::vector<std::vector<float>> &canonicals) {
    BenchRecord rec;
    rec.method = method;
    rec.L = scene.config.L;
    rec.K = scene.config.K;
    rec.levels = scene.config.num_levels;
    rec.H = cam.height;
    rec.W = cam.width;
    if (working_set(method, scene, cam.height, cam.width) > plan.max_elements) {
        rec.oom = true;
        return rec;
    }

    RenderOptions options;
    options.max_elements = plan.max_elements;
    ChannelMatrix dense_channels;
    if (method == BenchMethod::Dense) dense_channels = gather_channels(scene, ChannelSource::all_coefficients());

    auto render = [&] {
        if (method == BenchMethod::Sparse) return splat_multilevel(scene, cam, options);
        CoefficientMap cmap;
        cmap.buffer = render_channels(scene, cam, dense_channels, options);
        cmap.L = scene.config.L;
        cmap.K = scene.config.K;
        for (std::uint32_t l = 0; l < scene.config.num_levels; ++l) cmap.levels.push_back(l);
        return cmap;
    };

    std::vector<double> t_render, t_decode, t_post;
    for (std::uint32_t rep = 0; rep < plan.warmup + plan.repetitions; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        CoefficientMap cmap;
        try {
            cmap = render();
        } catch (const ResourceError &) {
            rec.oom = true;
            return rec;
        }
        const double r_ms = ms_since(t0);
        double d_ms = 0.0, p_ms = 0.0;
        if (!plan.render_only) {
            t0 = std::chrono::steady_clock::now();
            const auto features = decode(cmap, scene.codebooks);
            d_ms = ms_since(t0);

            t0 = std::chrono::steady_clock::now();
            std::vector<RelevancyMap> maps;
            for (std::size_t l = 0; l < features.levels.size(); ++l) {
                maps.push_back(mean_filter(relevancy_map(features.levels[l], query, canonicals, std::uint32_t(l)),
                                           kDefaultFilterWindow));
            }
            (void)select_level(maps);
            p_ms = ms_since(t0);
        }
        if (rep < plan.warmup) continue;
        t_render.push_back(r_ms);
        t_decode.push_back(d_ms);
        t_post.push_back(p_ms);
    }
    rec.median = {median(t_render), median(t_decode), median(t_post)};
    rec.iqr_ms = interquartile_range(t_render);
    return rec;
}

} // namespace

std::vector<BenchRecord> run_benchmark(const BenchPlan &plan, const std::function<void(const BenchRecord &)> &progress) {
    plan.validate();
    std::mt19937_64 rng(plan.scene.seed + 1);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto random_vec = [&] {
        std::vector<float> v(plan.scene.D);
        for (float &x : v) x = float(nd(rng) / std::sqrt(double(plan.scene.D)));
        return v;
    };
    QueryEmbedding query{"bench", random_vec(), "bench"};
    std::vector<std::vector<float>> canonicals;
    for (int i = 0; i < 4; ++i) canonicals.push_back(random_vec());

    std::vector<BenchRecord> records;
    for (auto [H, W] : plan.image_sizes) {
        const Camera cam = make_bench_camera(W, H);
        for (auto L : plan.L_values) {
            for (auto K : plan.K_values) {
                const Scene scene = make_bench_scene(plan.scene, L, K, plan.levels);
                for (auto method : plan.methods) {
                    records.push_back(run_cell(plan, method, scene, cam, query, canonicals));
                    if (progress) progress(records.back());
                }
            }
        }
    }
    return records;
}

std::string machine_description() {
    std::string cpu = "unknown";
    std::ifstream info("/proc/cpuinfo");
    for (std::string line; std::getline(info, line);) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) cpu = line.substr(colon + 2);
            break;
        }
    }
    return cpu;
}

std::string bench_csv(std::span<const BenchRecord> records) {
    std::string out;
    out += "# machine: " + machine_description() + "\n";
    out += "# worker_threads: " + std::to_string(thread_count()) + "\n";
    out += std::string(kBenchCsvColumns) + "\n";
    char line[256];
    for (const auto &r : records) {
        if (r.oom) {
            std::snprintf(line, sizeof line, "%s,%u,%u,%u,%u,%u,OOM,OOM,OOM,OOM\n", to_string(r.method), r.L, r.K,
                          r.levels, r.H, r.W);
        } else {
            std::snprintf(line, sizeof line, "%s,%u,%u,%u,%u,%u,%.6f,%.6f,%.6f,%.6f\n", to_string(r.method), r.L,
                          r.K, r.levels, r.H, r.W, r.median.render_ms, r.median.decode_ms, r.median.post_ms,
                          r.iqr_ms);
        }
        out += line;
    }
    return out;
}

std::string bench_svg(std::span<const BenchRecord> records) {
    constexpr double width = 640, height = 400, left = 70, right = 140, top = 30, bottom = 50;
    std::vector<const BenchRecord *> pts;
    for (const auto &r : records)
        if (!r.oom && r.median.render_ms > 0.0) pts.push_back(&r);

    double lmin = 1, lmax = 2, tmin = 1, tmax = 10;
    if (!pts.empty()) {
        lmin = lmax = pts.front()->L;
        tmin = tmax = pts.front()->median.render_ms;
        for (auto *r : pts) {
            lmin = std::min(lmin, double(r->L));
            lmax = std::max(lmax, double(r->L));
            tmin = std::min(tmin, r->median.render_ms);
            tmax = std::max(tmax, r->median.render_ms);
        }
    }
    const double lx0 = std::log2(lmin), lx1 = std::max(std::log2(lmax), lx0 + 1.0);
    const double ly0 = std::floor(std::log10(tmin)), ly1 = std::max(std::ceil(std::log10(tmax)), ly0 + 1.0);
    auto X = [&](double L) { return left + (std::log2(L) - lx0) / (lx1 - lx0) * (width - left - right); };
    auto Y = [&](double t) { return height - bottom - (std::log10(t) - ly0) / (ly1 - ly0) * (height - top - bottom); };

    std::string svg;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "font-family=\"sans-serif\" font-size=\"12\">\n"
                  "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                  width, height);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  left, height - bottom, width - right, height - bottom, left, top, left, height - bottom);
    svg += buf;
    for (double e = ly0; e <= ly1 + 1e-9; e += 1.0) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n"
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%g ms</text>\n",
                      left, Y(std::pow(10.0, e)), width - right, Y(std::pow(10.0, e)), left - 6,
                      Y(std::pow(10.0, e)) + 4, std::pow(10.0, e));
        svg += buf;
    }
    std::set<std::uint32_t> Ls;
    for (auto *r : pts) Ls.insert(r->L);
    for (auto L : Ls) {
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%u</text>\n", X(L),
                      height - bottom + 18, L);
        svg += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">codebook size L</text>\n"
                  "<text x=\"%.1f\" y=\"18\" text-anchor=\"middle\">median render time (log scale)</text>\n",
                  (left + width - right) / 2, height - 12, (left + width - right) / 2);
    svg += buf;

    const std::pair<BenchMethod, const char *> styles[] = {{BenchMethod::Dense, "#d62728"},
                                                           {BenchMethod::Sparse, "#1f77b4"}};
    int legend = 0;
    for (auto [method, color] : styles) {
        // One polyline per (method, K, H, W) series.
        std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> series;
        for (auto *r : pts)
            if (r->method == method) series.insert({r->K, r->H, r->W});
        for (auto [K, H, W] : series) {
            std::vector<const BenchRecord *> line;
            for (auto *r : pts)
                if (r->method == method && r->K == K && r->H == H && r->W == W) line.push_back(r);
            std::sort(line.begin(), line.end(), [](auto *a, auto *b) { return a->L < b->L; });
            std::string poly;
            for (auto *r : line) {
                std::snprintf(buf, sizeof buf, "%.1f,%.1f ", X(r->L), Y(r->median.render_ms));
                poly += buf;
            }
            svg += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(color) + "\" points=\"" +
                   poly + "\"/>\n";
            for (auto *r : line) {
                std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n", X(r->L),
                              Y(r->median.render_ms), color);
                svg += buf;
            }
            std::snprintf(buf, sizeof buf,
                          "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>\n"
                          "<text x=\"%.1f\" y=\"%.1f\">%s K=%u %ux%u</text>\n",
                          width - right + 10, top + 10 + 18.0 * legend, width - right + 30, top + 10 + 18.0 * legend,
                          color, width - right + 34, top + 14 + 18.0 * legend, to_string(method), K, W, H);
            svg += buf;
            ++legend;
        }
    }
    svg += "</svg>\n";
    return svg;
}

SpeedupReport verify_speedup(std::span<const BenchRecord> records) {
    SpeedupReport report;
    const bool has_dense = std::any_of(records.begin(), records.end(),
                                       [](const BenchRecord &r) { return r.method == BenchMethod::Dense; });
    const bool has_sparse = std::any_of(records.begin(), records.end(),
                                        [](const BenchRecord &r) { return r.method == BenchMethod::Sparse; });
    if (!has_dense || !has_sparse) {
        report.outcome = SpeedupReport::Outcome::Incomparable;
        report.message = "incomparable: records cover only one method";
        return report;
    }
    auto find = [&](BenchMethod m) -> const BenchRecord * {
        for (const auto &r : records)
            if (r.method == m && r.L == 64 && r.K == 4 && r.levels == 3) return &r;
        return nullptr;
    };
    const auto *dense = find(BenchMethod::Dense);
    const auto *sparse = find(BenchMethod::Sparse);
    if (!dense || !sparse) throw ValidationError("verify_speedup: missing L=64, K=4, 3-level cell for a method");
    if (sparse->oom) throw ValidationError("verify_speedup: sparse cell ran out of memory");
    report.sparse_total_ms = sparse->median.total_ms();
    if (dense->oom) {
        report.outcome = SpeedupReport::Outcome::Pass;
        report.message = "pass: dense path ran out of memory at the paper configuration";
        return report;
    }
    report.dense_total_ms = dense->median.total_ms();
    report.ratio = report.dense_total_ms / report.sparse_total_ms;
    report.outcome = report.sparse_total_ms < report.dense_total_ms ? SpeedupReport::Outcome::Pass
                                                                    : SpeedupReport::Outcome::Fail;
    char msg[160];
    std::snprintf(msg, sizeof msg, "%s: sparse %.3f ms vs dense %.3f ms, speedup %.2fx",
                  report.outcome == SpeedupReport::Outcome::Pass ? "pass" : "fail", report.sparse_total_ms,
                  report.dense_total_ms, report.ratio);
    report.message = msg;
    return report;
}

} // namespace ssplat
