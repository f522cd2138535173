// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "ssplat/errors.hpp"

namespace ssplat {

TopK select_top_k(std::span<const double> logits, std::uint32_t K) {
    const std::size_t L = logits.size();
    if (K < 1 || K > L) throw ValidationError("normalize_coefficients: K must be in [1, L]");
    for (double z : logits)
        if (!std::isfinite(z)) throw ValidationError("normalize_coefficients: non-finite logits");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(L);
    double z = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        p[l] = std::exp(logits[l] - mx);
        z += p[l];
    }
    for (double &v : p) v /= z;

    std::vector<std::uint32_t> order(L);
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + K, order.end(),
                      [&](std::uint32_t a, std::uint32_t b) { return p[a] > p[b] || (p[a] == p[b] && a < b); });
    order.resize(K);
    std::sort(order.begin(), order.end());

    TopK out;
    out.indices = order;
    double kept = 0.0;
    for (auto i : order) kept += p[i];
    out.weights.reserve(K);
    for (auto i : order) out.weights.push_back(p[i] / kept);
    return out;
}

SparseCoefficients normalize_coefficients(std::span<const double> logits, std::uint32_t K) {
    const auto top = select_top_k(logits, K);
    SparseCoefficients c;
    c.indices = top.indices;
    c.values.reserve(K);
    for (double w : top.weights) c.values.push_back(float(w));
    return c;
}

SparseCoefficients normalize_coefficients(std::span<const float> logits, std::uint32_t K) {
    const std::vector<double> wide(logits.begin(), logits.end());
    return normalize_coefficients(std::span<const double>(wide), K);
}

void TrainingBatch::validate(const SceneConfig &config) const {
    camera.validate();
    if (targets.size() != config.num_levels) throw ValidationError("training batch: need one target per level");
    for (const auto &t : targets) {
        if (t.width != camera.width || t.height != camera.height || t.channels != config.D) {
            throw ValidationError("training batch: target dimensions do not match camera and D");
        }
    }
    if (mask && mask->size() != std::size_t(camera.width) * camera.height) {
        throw ValidationError("training batch: mask size does not match the image");
    }
}

PreparedBatch prepare_batch(const Scene &scene, const TrainingBatch &batch) {
    batch.validate(scene.config);
    PreparedBatch p;
    p.batch = &batch;
    p.weights = collect_blend_weights(scene, batch.camera);
    p.valid_pixels = batch.mask ? std::size_t(std::count_if(batch.mask->begin(), batch.mask->end(),
                                                            [](std::uint8_t m) { return m != 0; }))
                                : p.weights.pixel_count();
    return p;
}

namespace {

void check_params(const FieldParams &params, const PreparedBatch &prepared) {
    const auto &lg = params.logits;
    if (lg.values.size() != std::size_t(lg.num_gaussians) * lg.num_levels * lg.L) {
        throw ValidationError("field params: logit array size mismatch");
    }
    if (params.codebooks.size() != lg.num_levels) throw ValidationError("field params: one codebook per level");
    for (const auto &cb : params.codebooks)
        if (cb.size() != std::size_t(lg.L) * params.D) throw ValidationError("field params: codebook size mismatch");
    if (prepared.batch == nullptr) throw ValidationError("forward_loss: batch not prepared");
    if (prepared.batch->targets.size() != lg.num_levels) throw ValidationError("forward_loss: level count mismatch");
    for (const auto &t : prepared.batch->targets)
        if (t.channels != params.D) throw ValidationError("forward_loss: target dimension mismatch");
    for (auto g : prepared.weights.gaussian)
        if (g >= lg.num_gaussians) throw ValidationError("forward_loss: batch prepared for a different scene");
}

} // namespace

double forward_loss(const FieldParams &params, const PreparedBatch &prepared, const LossConfig &config,
                    ForwardCache *cache) {
    check_params(params, prepared);
    const auto &batch = *prepared.batch;
    const auto &logits = params.logits;
    const std::uint32_t G = logits.num_gaussians, D = params.D, levels = logits.num_levels;
    const auto &bw = prepared.weights;
    const std::size_t npix = bw.pixel_count();
    const double denom = double(prepared.valid_pixels) * levels;
    const double lambda = config.cosine_weight;

    ForwardCache local;
    ForwardCache &c = cache ? *cache : local;
    c.prepared = &prepared;
    c.selection.assign(levels, {});
    c.pixel_grads.assign(levels, {});
    if (denom == 0.0) {
        for (std::uint32_t level = 0; level < levels; ++level) {
            for (std::uint32_t g = 0; g < G; ++g) c.selection[level].push_back(select_top_k(logits.row(g, level), params.K));
            c.pixel_grads[level].assign(npix * D, 0.0);
        }
        c.loss = 0.0;
        return 0.0;
    }

    double total = 0.0;
    std::vector<double> feat(std::size_t(G) * D);
    std::vector<double> F(D);
    for (std::uint32_t level = 0; level < levels; ++level) {
        const auto &S = params.codebooks[level];
        auto &sel = c.selection[level];
        sel.reserve(G);
        std::fill(feat.begin(), feat.end(), 0.0);
        for (std::uint32_t g = 0; g < G; ++g) {
            sel.push_back(select_top_k(logits.row(g, level), params.K));
            double *f = feat.data() + std::size_t(g) * D;
            const auto &top = sel.back();
            for (std::size_t k = 0; k < top.indices.size(); ++k) {
                const double *s = S.data() + std::size_t(top.indices[k]) * D;
                for (std::uint32_t d = 0; d < D; ++d) f[d] += top.weights[k] * s[d];
            }
        }

        const auto &target = batch.targets[level];
        auto &grad = c.pixel_grads[level];
        grad.assign(npix * D, 0.0);
        for (std::size_t p = 0; p < npix; ++p) {
            if (batch.mask && (*batch.mask)[p] == 0) continue;
            std::fill(F.begin(), F.end(), 0.0);
            for (std::uint32_t n = bw.offsets[p]; n < bw.offsets[p + 1]; ++n) {
                const double e = bw.weight[n];
                const double *f = feat.data() + std::size_t(bw.gaussian[n]) * D;
                for (std::uint32_t d = 0; d < D; ++d) F[d] += e * f[d];
            }
            const float *t = target.data.data() + p * D;
            double *gp = grad.data() + p * D;
            double sq = 0.0, ft = 0.0, ff = 0.0, tt = 0.0;
            for (std::uint32_t d = 0; d < D; ++d) {
                const double r = F[d] - double(t[d]);
                sq += r * r;
                gp[d] = 2.0 * r / denom;
                ft += F[d] * double(t[d]);
                ff += F[d] * F[d];
                tt += double(t[d]) * double(t[d]);
            }
            total += sq;
            if (lambda != 0.0) {
                const double nf = std::sqrt(ff), nt = std::sqrt(tt);
                if (nf > 0.0 && nt > 0.0) {
                    const double cosv = ft / (nf * nt);
                    total += lambda * (1.0 - cosv);
                    // d(1 − cos)/dF = −(t/(|F||t|) − cos·F/|F|²)
                    for (std::uint32_t d = 0; d < D; ++d) {
                        gp[d] -= lambda / denom * (double(t[d]) / (nf * nt) - cosv * F[d] / ff);
                    }
                } else {
                    total += lambda;
                }
            }
        }
    }
    const double loss = total / denom;
    if (!std::isfinite(loss)) throw TrainingError("forward produced a non-finite loss");
    c.loss = loss;
    return loss;
}

double FieldGradients::norm() const {
    double s = 0.0;
    for (double v : logits) s += v * v;
    for (const auto &cb : codebooks)
        for (double v : cb) s += v * v;
    return std::sqrt(s);
}

FieldGradients backward(const FieldParams &params, const ForwardCache &cache) {
    if (cache.prepared == nullptr) throw ValidationError("backward: empty forward cache");
    const auto &lg = params.logits;
    const std::uint32_t G = lg.num_gaussians, L = lg.L, D = params.D, levels = lg.num_levels;
    const auto &bw = cache.prepared->weights;
    const std::size_t npix = bw.pixel_count();

    FieldGradients out;
    out.logits.assign(lg.values.size(), 0.0);
    out.codebooks.assign(levels, std::vector<double>(std::size_t(L) * D, 0.0));

    std::vector<double> gfeat(std::size_t(G) * D);
    for (std::uint32_t level = 0; level < levels; ++level) {
        const auto &S = params.codebooks[level];
        const auto &grad = cache.pixel_grads[level];
        auto &gS = out.codebooks[level];
        // Through blending: dL/df_i = Σ_p e_ip · dL/dF_p.
        std::fill(gfeat.begin(), gfeat.end(), 0.0);
        for (std::size_t p = 0; p < npix; ++p) {
            const double *gp = grad.data() + p * D;
            for (std::uint32_t n = bw.offsets[p]; n < bw.offsets[p + 1]; ++n) {
                const double e = bw.weight[n];
                double *gf = gfeat.data() + std::size_t(bw.gaussian[n]) * D;
                for (std::uint32_t d = 0; d < D; ++d) gf[d] += e * gp[d];
            }
        }
        std::vector<double> gw;
        for (std::uint32_t g = 0; g < G; ++g) {
            const auto &top = cache.selection[level][g];
            const double *gf = gfeat.data() + std::size_t(g) * D;
            const std::size_t K = top.indices.size();
            gw.assign(K, 0.0);
            double mean = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const std::size_t j = top.indices[k];
                const double *s = S.data() + j * D;
                double *gs = gS.data() + j * D;
                double acc = 0.0;
                for (std::uint32_t d = 0; d < D; ++d) {
                    acc += s[d] * gf[d];
                    gs[d] += top.weights[k] * gf[d];
                }
                gw[k] = acc;
                mean += top.weights[k] * acc;
            }
            // Renormalized top-K softmax: dw_k/dz_m = w_k(δ_km − w_m) on survivors.
            auto row = std::span<double>(out.logits).subspan((std::size_t(g) * levels + level) * L, L);
            for (std::size_t k = 0; k < K; ++k) row[top.indices[k]] = top.weights[k] * (gw[k] - mean);
        }
    }
    for (double v : out.logits)
        if (!std::isfinite(v)) throw TrainingError("backward produced a non-finite logit gradient");
    for (const auto &cb : out.codebooks)
        for (double v : cb)
            if (!std::isfinite(v)) throw TrainingError("backward produced a non-finite codebook gradient");
    return out;
}

void OptimState::step(FieldParams &params, const FieldGradients &grads) {
    auto &theta = params.logits.values;
    if (m_logits.size() != theta.size()) {
        m_logits.assign(theta.size(), 0.0);
        v_logits.assign(theta.size(), 0.0);
        m_codebook.assign(params.codebooks.size(), {});
        v_codebook.assign(params.codebooks.size(), {});
        for (std::size_t l = 0; l < params.codebooks.size(); ++l) {
            m_codebook[l].assign(params.codebooks[l].size(), 0.0);
            v_codebook[l].assign(params.codebooks[l].size(), 0.0);
        }
    }
    ++iteration;
    const double c1 = 1.0 - std::pow(beta1, double(iteration));
    const double c2 = 1.0 - std::pow(beta2, double(iteration));
    auto update = [&](std::vector<double> &x, const std::vector<double> &g, std::vector<double> &m,
                      std::vector<double> &v, double lr) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon);
        }
    };
    update(theta, grads.logits, m_logits, v_logits, lr_logits);
    for (std::size_t l = 0; l < params.codebooks.size(); ++l) {
        update(params.codebooks[l], grads.codebooks[l], m_codebook[l], v_codebook[l], lr_codebook);
    }
}

FieldParams field_params_from_scene(const Scene &scene) {
    const auto &cfg = scene.config;
    FieldParams params;
    params.K = cfg.K;
    params.D = cfg.D;
    params.logits = CoefficientLogits(std::uint32_t(scene.gaussians.size()), cfg.num_levels, cfg.L);
    for (std::uint32_t g = 0; g < scene.gaussians.size(); ++g) {
        for (std::uint32_t level = 0; level < cfg.num_levels; ++level) {
            const auto dense = densify(scene.gaussians[g].coeffs[level], cfg.L);
            auto row = params.logits.row(g, level);
            for (std::uint32_t l = 0; l < cfg.L; ++l) row[l] = std::log(std::max(double(dense[l]), 1e-12));
        }
    }
    for (const auto &cb : scene.codebooks) params.codebooks.emplace_back(cb.data().begin(), cb.data().end());
    return params;
}

namespace {

/// k-means++ seeding: first seed uniform, then proportional to squared
/// distance from the nearest chosen seed. Exhausted pools (all distances
/// zero) fall back to a uniform pick with a small perturbation.
std::vector<double> kmeans_seed(const std::vector<std::vector<double>> &points, std::uint32_t count, std::size_t D,
                                std::mt19937_64 &rng) {
    std::vector<double> atoms;
    atoms.reserve(std::size_t(count) * D);
    std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    std::normal_distribution<double> jitter(0.0, 1.0);
    double scale = 0.0;
    for (const auto &p : points)
        for (double v : p) scale = std::max(scale, std::abs(v));
    for (std::uint32_t s = 0; s < count; ++s) {
        std::size_t chosen;
        bool perturb = false;
        const double total = s == 0 ? 0.0 : std::accumulate(dist.begin(), dist.end(), 0.0);
        if (s == 0 || !(total > 0.0)) {
            chosen = pick(rng);
            perturb = s != 0;
        } else {
            std::discrete_distribution<std::size_t> weighted(dist.begin(), dist.end());
            chosen = weighted(rng);
        }
        std::vector<double> atom = points[chosen];
        if (perturb)
            for (double &v : atom) v += 1e-3 * std::max(scale, 1.0) * jitter(rng);
        for (std::size_t i = 0; i < points.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < D; ++d) d2 += (points[i][d] - atom[d]) * (points[i][d] - atom[d]);
            dist[i] = std::min(dist[i], d2);
        }
        atoms.insert(atoms.end(), atom.begin(), atom.end());
    }
    return atoms;
}

} // namespace

FieldParams init_field_params(const Scene &scene, std::span<const PreparedBatch> batches, std::uint64_t seed,
                              double logit_std, std::string *method) {
    const auto &cfg = scene.config;
    const auto G = std::uint32_t(scene.gaussians.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);

    FieldParams params;
    params.K = cfg.K;
    params.D = cfg.D;
    params.logits = CoefficientLogits(G, cfg.num_levels, cfg.L);
    for (double &v : params.logits.values) v = logit_std * nd(rng);

    // Target feature under each Gaussian's projected center, first view wins.
    std::vector<std::int64_t> sample_pixel(G, -1);
    std::vector<std::size_t> sample_batch(G, 0);
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto &batch = *batches[b].batch;
        const auto &cam = batch.camera;
        for (std::uint32_t g = 0; g < G; ++g) {
            if (sample_pixel[g] >= 0) continue;
            const auto p = project_gaussian(scene.gaussians[g], g, cam);
            if (!p) continue;
            const auto x = std::lround(p->mean2d[0]), y = std::lround(p->mean2d[1]);
            if (x < 0 || y < 0 || x >= long(cam.width) || y >= long(cam.height)) continue;
            const std::size_t pix = std::size_t(y) * cam.width + std::size_t(x);
            if (batch.mask && (*batch.mask)[pix] == 0) continue;
            sample_pixel[g] = std::int64_t(pix);
            sample_batch[g] = b;
        }
    }
    const bool seeded = std::any_of(sample_pixel.begin(), sample_pixel.end(), [](std::int64_t p) { return p >= 0; });
    if (method) *method = seeded ? "kmeans-seeded" : "unit-random";

    for (std::uint32_t level = 0; level < cfg.num_levels; ++level) {
        if (seeded) {
            std::vector<std::vector<double>> points;
            for (std::uint32_t g = 0; g < G; ++g) {
                if (sample_pixel[g] < 0) continue;
                const auto &t = batches[sample_batch[g]].batch->targets[level];
                const float *f = t.data.data() + std::size_t(sample_pixel[g]) * cfg.D;
                points.emplace_back(f, f + cfg.D);
            }
            params.codebooks.push_back(kmeans_seed(points, cfg.L, cfg.D, rng));
        } else {
            std::vector<double> cb(std::size_t(cfg.L) * cfg.D);
            for (std::uint32_t l = 0; l < cfg.L; ++l) {
                double n2 = 0.0;
                for (std::uint32_t d = 0; d < cfg.D; ++d) {
                    cb[std::size_t(l) * cfg.D + d] = nd(rng);
                    n2 += cb[std::size_t(l) * cfg.D + d] * cb[std::size_t(l) * cfg.D + d];
                }
                for (std::uint32_t d = 0; d < cfg.D; ++d) cb[std::size_t(l) * cfg.D + d] /= std::sqrt(n2);
            }
            params.codebooks.push_back(std::move(cb));
        }
    }
    return params;
}

Scene apply_field(const Scene &scene, const FieldParams &params) {
    const auto &cfg = scene.config;
    if (params.logits.num_gaussians != scene.gaussians.size() || params.logits.L != cfg.L ||
        params.logits.num_levels != cfg.num_levels || params.D != cfg.D) {
        throw ValidationError("apply_field: parameters do not match the scene");
    }
    Scene out = scene;
    for (std::uint32_t g = 0; g < out.gaussians.size(); ++g) {
        for (std::uint32_t level = 0; level < cfg.num_levels; ++level) {
            out.gaussians[g].coeffs[level] = normalize_coefficients(params.logits.row(g, level), cfg.K);
        }
    }
    for (std::uint32_t level = 0; level < cfg.num_levels; ++level) {
        std::vector<float> atoms(params.codebooks[level].begin(), params.codebooks[level].end());
        out.codebooks[level] = Codebook(level, cfg.L, cfg.D, std::move(atoms));
    }
    return out;
}

TrainResult train_field(const Scene &scene, std::span<const TrainingBatch> batches, const TrainConfig &config,
                        const TrainingBatch *heldout) {
    scene.validate();
    TrainResult result;
    if (config.iterations == 0) {
        result.scene = scene;
        result.init_method = "none";
        return result;
    }
    if (batches.empty()) throw ValidationError("train_field: no training batches");

    std::vector<PreparedBatch> prepared;
    prepared.reserve(batches.size());
    for (const auto &b : batches) prepared.push_back(prepare_batch(scene, b));
    std::optional<PreparedBatch> held;
    if (heldout) held = prepare_batch(scene, *heldout);

    FieldParams params = init_field_params(scene, prepared, config.seed, config.logit_init_std, &result.init_method);
    if (held) result.heldout_initial = forward_loss(params, *held, config.loss);

    OptimState optim;
    optim.lr_logits = config.lr_logits;
    optim.lr_codebook = config.lr_codebook;

    double initial = 0.0;
    std::uint32_t streak = 0;
    result.curve.reserve(config.iterations);
    for (std::uint32_t it = 0; it < config.iterations; ++it) {
        const auto &batch = prepared[it % prepared.size()];
        ForwardCache cache;
        FieldGradients grads;
        double loss;
        try {
            loss = forward_loss(params, batch, config.loss, &cache);
            grads = backward(params, cache);
        } catch (const TrainingError &e) {
            throw TrainingError(e.what(), it);
        }
        const double gnorm = grads.norm();
        result.curve.push_back({it, loss, gnorm});
        if (config.on_iteration) config.on_iteration(it, loss);

        if (it == 0) initial = loss;
        streak = loss > config.divergence_factor * initial ? streak + 1 : 0;
        if (streak >= config.divergence_patience) {
            char msg[200];
            std::snprintf(msg, sizeof msg,
                          "training diverged: loss %.6g stayed above %.3gx the initial %.6g for %u iterations", loss,
                          config.divergence_factor, initial, streak);
            throw TrainingError(msg, it);
        }
        optim.step(params, grads);
    }
    if (held) result.heldout_final = forward_loss(params, *held, config.loss);
    result.scene = apply_field(scene, params);
    return result;
}

std::string loss_curve_csv(std::span<const LossRecord> curve) {
    std::string out = "iter,loss,grad_norm\n";
    char line[96];
    for (const auto &r : curve) {
        std::snprintf(line, sizeof line, "%u,%.9g,%.9g\n", r.iteration, r.loss, r.grad_norm);
        out += line;
    }
    return out;
}

} // namespace ssplat
