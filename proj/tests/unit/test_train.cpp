// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ssplat/errors.hpp"
#include "ssplat/io.hpp"
#include "ssplat/train.hpp"

namespace ssplat {
namespace {

TEST(TopK, WorkedExample) {
    const std::vector<double> z{0.0, std::log(2.0), std::log(3.0), std::log(1.0)};
    const auto c = normalize_coefficients(std::span<const double>(z), 2);
    EXPECT_EQ(c.indices, (std::vector<std::uint32_t>{1, 2}));
    EXPECT_FLOAT_EQ(c.values[0], 0.4f);
    EXPECT_FLOAT_EQ(c.values[1], 0.6f);
}

TEST(TopK, TiesPreferLowerIndex) {
    const std::vector<double> z(6, 0.5);
    const auto top = select_top_k(z, 3);
    EXPECT_EQ(top.indices, (std::vector<std::uint32_t>{0, 1, 2}));
    for (double w : top.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
}

TEST(TopK, ShiftInvariant) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 2.0);
    std::vector<double> z(20);
    for (double &v : z) v = nd(rng);
    const auto a = select_top_k(z, 5);
    for (double shift : {-700.0, -3.0, 11.0, 650.0}) {
        std::vector<double> s = z;
        for (double &v : s) v += shift;
        const auto b = select_top_k(s, 5);
        EXPECT_EQ(a.indices, b.indices);
        for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(a.weights[k], b.weights[k], 1e-12);
    }
}

TEST(TopK, MatchesSortOracleOnThousandVectors) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint32_t L = 1 + std::uint32_t(rng() % 64);
        const std::uint32_t K = 1 + std::uint32_t(rng() % L);
        std::vector<double> z(L);
        for (double &v : z) v = trial % 7 == 0 ? std::round(nd(rng)) : nd(rng);
        std::vector<std::uint32_t> order(L);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return z[a] > z[b]; });
        order.resize(K);
        std::sort(order.begin(), order.end());
        long double kept = 0;
        for (auto i : order) kept += std::exp((long double)z[i]);
        const auto top = select_top_k(z, K);
        ASSERT_EQ(top.indices, order) << "trial " << trial;
        double sum = 0;
        for (std::size_t k = 0; k < K; ++k) {
            EXPECT_NEAR(top.weights[k], double(std::exp((long double)z[order[k]]) / kept), 1e-12);
            sum += top.weights[k];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        const auto c = normalize_coefficients(std::span<const double>(z), K);
        EXPECT_NO_THROW(c.validate(L, K));
    }
}

TEST(TopK, RejectsBadArguments) {
    const std::vector<double> z{1, 2, 3};
    EXPECT_THROW(select_top_k(z, 0), ValidationError);
    EXPECT_THROW(select_top_k(z, 4), ValidationError);
    const std::vector<double> bad{1, NAN, 3};
    EXPECT_THROW(select_top_k(bad, 1), ValidationError);
}

struct Problem {
    Scene scene;
    TrainingBatch batch;
};

Problem small_problem(std::uint64_t seed, std::uint32_t size = 16) {
    Problem p;
    p.scene = testing::random_scene(seed, {.gaussians = 40, .config = {2, 8, 3, 6}, .scale_min = 0.1f,
                                           .scale_max = 0.4f});
    p.batch = testing::random_batch(p.scene.config, testing::test_camera(size, size), seed + 1);
    return p;
}

FieldParams random_params(const Scene &scene, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto params = field_params_from_scene(scene);
    for (double &v : params.logits.values) v = nd(rng);
    for (auto &cb : params.codebooks)
        for (double &v : cb) v = nd(rng);
    return params;
}

TEST(Loss, MatchesRenderedFeatureOracle) {
    auto p = small_problem(500, 24);
    const auto params = random_params(p.scene, 501);
    const auto prepared = prepare_batch(p.scene, p.batch);
    const double loss = forward_loss(params, prepared);

    const auto learned = apply_field(p.scene, params);
    double sum = 0;
    for (std::uint32_t l = 0; l < 2; ++l) {
        const auto F = render_dense(learned, p.batch.camera, ChannelSource::features(l));
        for (std::size_t i = 0; i < F.data.size(); ++i) {
            const double r = double(F.data[i]) - p.batch.targets[l].data[i];
            sum += r * r;
        }
    }
    const double oracle = sum / (24.0 * 24.0 * 2);
    EXPECT_NEAR(loss, oracle, 1e-5 * oracle);
}

TEST(Loss, MaskRestrictsSupervision) {
    auto p = small_problem(510);
    const auto params = random_params(p.scene, 511);
    p.batch.mask = std::vector<std::uint8_t>(16 * 16, 0);
    const auto empty = prepare_batch(p.scene, p.batch);
    EXPECT_EQ(forward_loss(params, empty), 0.0);
    (*p.batch.mask)[5] = 1;
    const auto one = prepare_batch(p.scene, p.batch);
    EXPECT_EQ(one.valid_pixels, 1u);
    EXPECT_GT(forward_loss(params, one), 0.0);
}

TEST(Loss, ZeroAtGroundTruth) {
    const auto scene = testing::random_scene(520, {.gaussians = 60, .config = {2, 8, 3, 6}});
    TrainingBatch b;
    b.camera = testing::test_camera(20, 20);
    b.targets = render_targets(scene, b.camera);
    const auto prepared = prepare_batch(scene, b);
    ForwardCache cache;
    const double loss = forward_loss(field_params_from_scene(scene), prepared, {}, &cache);
    EXPECT_LT(loss, 1e-10);
    EXPECT_LT(backward(field_params_from_scene(scene), cache).norm(), 1e-5);
}

// Central differences over every parameter whose perturbation keeps top-K
// membership unchanged.
void check_gradients(double cosine_weight, std::uint64_t seed) {
    auto p = small_problem(seed);
    auto params = random_params(p.scene, seed + 7);
    const auto prepared = prepare_batch(p.scene, p.batch);
    const LossConfig cfg{cosine_weight};
    ForwardCache cache;
    forward_loss(params, prepared, cfg, &cache);
    const auto grads = backward(params, cache);
    const double h = 1e-6;

    auto fd = [&](double &x) {
        const double saved = x;
        x = saved + h;
        ForwardCache c1;
        const double up = forward_loss(params, prepared, cfg, &c1);
        x = saved - h;
        ForwardCache c2;
        const double down = forward_loss(params, prepared, cfg, &c2);
        x = saved;
        for (std::size_t l = 0; l < cache.selection.size(); ++l)
            for (std::size_t g = 0; g < cache.selection[l].size(); ++g)
                if (c1.selection[l][g].indices != cache.selection[l][g].indices ||
                    c2.selection[l][g].indices != cache.selection[l][g].indices)
                    return std::optional<double>();
        return std::optional<double>((up - down) / (2 * h));
    };
    int checked = 0;
    for (std::size_t i = 0; i < params.logits.values.size(); ++i) {
        const auto numeric = fd(params.logits.values[i]);
        if (!numeric) continue;
        ++checked;
        EXPECT_NEAR(grads.logits[i], *numeric, 1e-6 + 1e-5 * std::abs(*numeric)) << "logit " << i;
    }
    for (std::size_t l = 0; l < params.codebooks.size(); ++l) {
        for (std::size_t i = 0; i < params.codebooks[l].size(); ++i) {
            const auto numeric = fd(params.codebooks[l][i]);
            ASSERT_TRUE(numeric.has_value());
            ++checked;
            EXPECT_NEAR(grads.codebooks[l][i], *numeric, 1e-6 + 1e-5 * std::abs(*numeric)) << "atom entry " << i;
        }
    }
    EXPECT_GT(checked, int(params.logits.values.size() / 2));
}

TEST(Gradients, MatchFiniteDifferences) { check_gradients(0.0, 530); }

TEST(Gradients, MatchFiniteDifferencesWithCosineTerm) { check_gradients(0.5, 540); }

TEST(Gradients, UnselectedLogitsAndUnusedAtomsGetNone) {
    auto p = small_problem(550);
    auto params = random_params(p.scene, 551);
    // Atom 7 is never in anyone's top-3 at level 0.
    for (std::uint32_t g = 0; g < params.logits.num_gaussians; ++g) params.logits.row(g, 0)[7] = -50.0;
    const auto prepared = prepare_batch(p.scene, p.batch);
    ForwardCache cache;
    forward_loss(params, prepared, {}, &cache);
    const auto grads = backward(params, cache);
    for (std::uint32_t d = 0; d < params.D; ++d) EXPECT_EQ(grads.codebooks[0][7 * params.D + d], 0.0);
    for (std::uint32_t g = 0; g < params.logits.num_gaussians; ++g) {
        const auto &sel = cache.selection[1][g].indices;
        for (std::uint32_t l = 0; l < params.logits.L; ++l) {
            if (std::find(sel.begin(), sel.end(), l) == sel.end()) {
                EXPECT_EQ(grads.logits[(std::size_t(g) * 2 + 1) * 8 + l], 0.0);
            }
        }
    }
}

TEST(Optimizer, FirstStepMovesByLearningRate) {
    FieldParams params;
    params.K = 1;
    params.D = 1;
    params.logits = CoefficientLogits(1, 1, 2);
    params.logits.values = {0.5, -0.5};
    params.codebooks = {{1.0, 2.0}};
    FieldGradients g;
    g.logits = {3.0, -0.25};
    g.codebooks = {{0.0, 10.0}};
    OptimState opt;
    opt.step(params, g);
    // Bias-corrected first step: lr · g / (|g| + ε).
    auto moved = [](double lr, double grad) { return lr * grad / (std::abs(grad) + 1e-8); };
    EXPECT_NEAR(params.logits.values[0], 0.5 - moved(5e-3, 3.0), 1e-14);
    EXPECT_NEAR(params.logits.values[1], -0.5 - moved(5e-3, -0.25), 1e-14);
    EXPECT_EQ(params.codebooks[0][0], 1.0);
    EXPECT_NEAR(params.codebooks[0][1], 2.0 - moved(1e-3, 10.0), 1e-14);
    EXPECT_EQ(opt.iteration, 1);
}

TEST(Training, FieldParamsRoundTripThroughScene) {
    const auto scene = testing::random_scene(560, {.gaussians = 30});
    const auto back = apply_field(scene, field_params_from_scene(scene));
    for (std::size_t g = 0; g < scene.gaussians.size(); ++g) {
        for (std::size_t l = 0; l < scene.config.num_levels; ++l) {
            const auto &a = scene.gaussians[g].coeffs[l];
            const auto &b = back.gaussians[g].coeffs[l];
            EXPECT_EQ(a.indices, b.indices);
            for (std::size_t k = 0; k < a.values.size(); ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-6);
        }
    }
    EXPECT_EQ(back.codebooks, scene.codebooks);
}

SyntheticBundle tiny_bundle() {
    SyntheticSpec spec;
    spec.seed = 3;
    spec.num_gaussians = 144;
    spec.num_classes = 3;
    spec.width = 24;
    spec.height = 24;
    spec.config = {2, 8, 2, 8};
    spec.train_views = 2;
    return generate_synthetic(spec);
}

std::vector<TrainingBatch> batches_for(const SyntheticBundle &b) {
    std::vector<TrainingBatch> out;
    for (std::size_t v = 0; v < b.cameras.size(); ++v) {
        if (v == b.heldout_view) continue;
        out.push_back({b.cameras[v], render_targets(b.scene, b.cameras[v]), std::nullopt});
    }
    return out;
}

TEST(Training, DeterministicAndGeometryFrozen) {
    const auto bundle = tiny_bundle();
    const auto batches = batches_for(bundle);
    TrainConfig cfg;
    cfg.iterations = 40;
    cfg.seed = 9;
    const auto a = train_field(bundle.scene, batches, cfg);
    const auto b = train_field(bundle.scene, batches, cfg);
    EXPECT_EQ(encode_scene(a.scene), encode_scene(b.scene));
    ASSERT_EQ(a.curve.size(), 40u);
    for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].loss, b.curve[i].loss);
    EXPECT_EQ(a.init_method, "kmeans-seeded");
    for (std::size_t g = 0; g < bundle.scene.gaussians.size(); ++g) {
        const auto &x = bundle.scene.gaussians[g];
        const auto &y = a.scene.gaussians[g];
        EXPECT_EQ(x.id, y.id);
        EXPECT_EQ(x.position, y.position);
        EXPECT_EQ(x.rotation, y.rotation);
        EXPECT_EQ(x.scale, y.scale);
        EXPECT_EQ(x.opacity, y.opacity);
        EXPECT_EQ(x.color, y.color);
    }
    EXPECT_NO_THROW(a.scene.validate());
}

TEST(Training, LossDecreasesAndHeldoutIsScored) {
    const auto bundle = tiny_bundle();
    const auto batches = batches_for(bundle);
    const TrainingBatch held{bundle.cameras[bundle.heldout_view],
                             render_targets(bundle.scene, bundle.cameras[bundle.heldout_view]), std::nullopt};
    TrainConfig cfg;
    cfg.iterations = 300;
    std::uint32_t calls = 0;
    cfg.on_iteration = [&](std::uint32_t, double) { ++calls; };
    const auto r = train_field(bundle.scene, batches, cfg, &held);
    EXPECT_EQ(calls, 300u);
    ASSERT_TRUE(r.heldout_initial && r.heldout_final);
    EXPECT_LT(*r.heldout_final, *r.heldout_initial);
    EXPECT_LT(r.curve.back().loss, r.curve.front().loss);
}

TEST(Training, ZeroIterationsReturnsSceneUnchanged) {
    const auto bundle = tiny_bundle();
    TrainConfig cfg;
    cfg.iterations = 0;
    const auto r = train_field(bundle.scene, {}, cfg);
    EXPECT_EQ(r.scene, bundle.scene);
    EXPECT_TRUE(r.curve.empty());
    EXPECT_EQ(loss_curve_csv(r.curve), "iter,loss,grad_norm\n");
}

TEST(Training, DivergenceGuardRaises) {
    const auto bundle = tiny_bundle();
    const auto batches = batches_for(bundle);
    TrainConfig cfg;
    cfg.iterations = 50;
    cfg.divergence_factor = 1e-9;
    cfg.divergence_patience = 3;
    try {
        train_field(bundle.scene, batches, cfg);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError &e) {
        EXPECT_EQ(e.iteration(), 2);
    }
}

TEST(Training, RejectsMismatchedBatches) {
    const auto bundle = tiny_bundle();
    auto batches = batches_for(bundle);
    batches[0].targets.pop_back();
    TrainConfig cfg;
    cfg.iterations = 1;
    EXPECT_THROW(train_field(bundle.scene, batches, cfg), ValidationError);
    EXPECT_THROW(train_field(bundle.scene, {}, cfg), ValidationError);
}

TEST(Training, LossCurveCsvRows) {
    const std::vector<LossRecord> curve{{0, 1.5, 0.25}, {1, 0.75, 0.125}};
    EXPECT_EQ(loss_curve_csv(curve), "iter,loss,grad_norm\n0,1.5,0.25\n1,0.75,0.125\n");
}

} // namespace
} // namespace ssplat
