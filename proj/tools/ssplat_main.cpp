// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

// ssplat: command-line front end (synth | train | query | bench | serve).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ssplat/bench.hpp"
#include "ssplat/errors.hpp"
#include "ssplat/image.hpp"
#include "ssplat/io.hpp"
#include "ssplat/parallel.hpp"
#include "ssplat/server.hpp"
#include "ssplat/sparse_splat.hpp"
#include "ssplat/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssplat;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFailure = 1;

/// Bad flags or inputs that the user can fix.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json(const fs::path &path) {
    const auto bytes = read_file(path);
    json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw LoadError(LoadErrorKind::Corrupt, "invalid JSON in " + path.string());
    return j;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    fs::path out = "synthetic";
    std::uint64_t seed = 0;
    std::uint32_t gaussians = 1024;
    std::int64_t classes = 8;
    std::string layout = "grid";
    std::uint32_t width = 64, height = 64;
    std::uint32_t levels = 3, L = 64, K = 4, D = 32;
    std::uint32_t views = 4;
    float atom_scale = SyntheticSpec{}.atom_scale;
};

Framebuffer mask_framebuffer(const std::vector<std::uint8_t> &mask, std::uint32_t w, std::uint32_t h) {
    Framebuffer fb(w, h, 1, ChannelTag::Scalar);
    for (std::size_t i = 0; i < mask.size(); ++i) fb.data[i] = mask[i] ? 1.0f : 0.0f;
    return fb;
}

int cmd_synth(const SynthArgs &a) {
    if (a.classes < 2) throw UsageError("--classes must be at least 2");
    SyntheticSpec spec;
    spec.seed = a.seed;
    spec.num_gaussians = a.gaussians;
    spec.num_classes = std::uint32_t(a.classes);
    spec.layout = a.layout == "clustered" ? SyntheticLayout::Clustered : SyntheticLayout::Grid;
    spec.width = a.width;
    spec.height = a.height;
    spec.config = SceneConfig{a.levels, a.L, a.K, a.D};
    spec.train_views = a.views;
    spec.atom_scale = a.atom_scale;
    try {
        spec.validate();
    } catch (const ValidationError &e) {
        throw UsageError(e.what());
    }
    const auto bundle = generate_synthetic(spec);

    fs::create_directories(a.out / "targets");
    fs::create_directories(a.out / "masks");
    save_scene(a.out / "scene.lsv2", bundle.scene);

    json cams = json::array();
    for (const auto &c : bundle.cameras) cams.push_back(camera_to_json(c));
    write_text(a.out / "cameras.json", json{{"cameras", cams}, {"heldout_view", bundle.heldout_view}}.dump(1));

    json targets = json::array(), masks = json::array();
    for (std::size_t v = 0; v < bundle.cameras.size(); ++v) {
        json per_level = json::array();
        const auto maps = render_targets(bundle.scene, bundle.cameras[v]);
        for (std::size_t l = 0; l < maps.size(); ++l) {
            const auto rel = "targets/view" + std::to_string(v) + "_level" + std::to_string(l) + ".lsfb";
            dump_framebuffer(a.out / rel, maps[l]);
            per_level.push_back(rel);
        }
        targets.push_back(per_level);
        json per_class = json::array();
        for (std::size_t c = 0; c < bundle.masks[v].size(); ++c) {
            const auto rel = "masks/view" + std::to_string(v) + "_class" + std::to_string(c) + ".lsfb";
            dump_framebuffer(a.out / rel, mask_framebuffer(bundle.masks[v][c], spec.width, spec.height));
            per_class.push_back(rel);
        }
        masks.push_back(per_class);
    }

    QuerySet queries = bundle.queries;
    for (std::size_t c = 0; c < queries.queries.size(); ++c) {
        queries.queries[c].gt_mask_path = masks[bundle.heldout_view][c].get<std::string>();
    }
    save_query_set(a.out / "queries.json", queries);

    json manifest{{"seed", spec.seed},
                  {"gaussians", spec.num_gaussians},
                  {"classes", spec.num_classes},
                  {"layout", a.layout},
                  {"width", spec.width},
                  {"height", spec.height},
                  {"config", {{"levels", a.levels}, {"L", a.L}, {"K", a.K}, {"D", a.D}}},
                  {"scene", "scene.lsv2"},
                  {"queries", "queries.json"},
                  {"cameras", "cameras.json"},
                  {"heldout_view", bundle.heldout_view},
                  {"targets", targets},
                  {"masks", masks}};
    write_text(a.out / "bundle.json", manifest.dump(1));
    for (const char *f : {"scene.lsv2", "queries.json", "cameras.json", "bundle.json"})
        std::cout << (a.out / f).string() << "\n";
    return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    fs::path scene;
    fs::path bundle;
    fs::path out = "trained.lsv2";
    fs::path loss_csv = "loss.csv";
    std::uint32_t iters = 2000;
    std::uint64_t seed = 0;
    double cosine_weight = 0.0;
};

int cmd_train(const TrainArgs &a) {
    if (a.bundle.empty() || !fs::exists(a.bundle)) throw UsageError("training targets not found: --bundle is required");
    const Scene scene = load_scene(a.scene);
    const json manifest = read_json(a.bundle);
    const fs::path root = a.bundle.parent_path();
    if (!manifest.contains("targets") || manifest["targets"].empty()) throw UsageError("bundle lists no targets");

    const json cams = read_json(root / manifest.at("cameras").get<std::string>());
    const auto heldout = cams.at("heldout_view").get<std::size_t>();
    std::vector<TrainingBatch> batches;
    std::optional<TrainingBatch> held;
    for (std::size_t v = 0; v < manifest["targets"].size(); ++v) {
        TrainingBatch b;
        b.camera = camera_from_json(cams.at("cameras").at(v));
        for (const auto &rel : manifest["targets"][v]) {
            const fs::path p = root / rel.get<std::string>();
            if (!fs::exists(p)) throw UsageError("missing target " + p.string());
            b.targets.push_back(load_framebuffer(p, ChannelTag::DenseFeature));
        }
        (v == heldout ? held.emplace(std::move(b)) : batches.emplace_back(std::move(b)));
    }
    if (batches.empty()) throw UsageError("bundle has no training views");

    TrainConfig cfg;
    cfg.iterations = a.iters;
    cfg.seed = a.seed;
    cfg.loss.cosine_weight = a.cosine_weight;
    const auto result = train_field(scene, batches, cfg, held ? &*held : nullptr);
    save_scene(a.out, result.scene);
    write_text(a.loss_csv, loss_curve_csv(result.curve));
    std::cout << "init: " << (result.init_method.empty() ? "unchanged" : result.init_method) << "\n";
    if (!result.curve.empty()) std::cout << "final loss: " << result.curve.back().loss << "\n";
    if (result.heldout_initial && result.heldout_final) {
        std::cout << "held-out loss: " << *result.heldout_initial << " -> " << *result.heldout_final << "\n";
    }
    std::cout << a.out.string() << "\n" << a.loss_csv.string() << "\n";
    return 0;
}

// --- query -----------------------------------------------------------------

struct QueryArgs {
    fs::path scene;
    fs::path queries;
    std::string name;
    fs::path vector_file;
    bool list = false;
    fs::path cameras;
    std::optional<std::size_t> view;
    std::vector<double> position{0.0, 0.0, -2.5}, look_at{0.0, 0.0, 0.0}, up{0.0, 1.0, 0.0};
    double vfov = 50.0;
    std::uint32_t width = 64, height = 64;
    std::string level = "auto";
    std::uint32_t window = kDefaultFilterWindow;
    double threshold = kDefaultSegmentThreshold;
    fs::path out;
    fs::path overlay;
};

Camera query_camera(const QueryArgs &a) {
    if (!a.cameras.empty()) {
        const json cams = read_json(a.cameras);
        const auto v = a.view.value_or(cams.value("heldout_view", std::size_t(0)));
        if (v >= cams.at("cameras").size()) throw UsageError("--view out of range");
        return camera_from_json(cams.at("cameras").at(v));
    }
    const json pose{{"position", a.position}, {"look_at", a.look_at}, {"up", a.up}, {"vfov", a.vfov}};
    try {
        return camera_from_pose(pose, a.width, a.height);
    } catch (const ValidationError &e) {
        throw UsageError(e.what());
    }
}

int cmd_query(const QueryArgs &a) {
    const QuerySet set = load_query_set(a.queries);
    if (a.list) {
        for (const auto &n : set.names()) std::cout << n << "\n";
        return 0;
    }
    const Scene scene = load_scene(a.scene);
    QueryEmbedding embedding;
    const QueryEntry *entry = nullptr;
    if (!a.vector_file.empty()) {
        const json j = read_json(a.vector_file);
        embedding.name = a.vector_file.stem().string();
        embedding.vector = (j.is_array() ? j : j.at("vector")).get<std::vector<float>>();
    } else if (!a.name.empty()) {
        entry = set.find(a.name);
        if (!entry) {
            std::string names;
            for (const auto &n : set.names()) names += "\n  " + n;
            throw UsageError("unknown query '" + a.name + "'; available queries:" + names);
        }
        embedding = entry->embedding;
    } else {
        throw UsageError("give --name, --vector-file or --list-queries");
    }
    if (embedding.vector.size() != scene.config.D) throw UsageError("query dimension does not match scene D");

    QuerySettings settings;
    settings.window = a.window;
    settings.threshold = a.threshold;
    if (a.level != "auto") {
        try {
            settings.level = std::uint32_t(std::stoul(a.level));
        } catch (const std::exception &) {
            throw UsageError("--level must be auto or a level index");
        }
    }
    const Camera cam = query_camera(a);
    const auto result = query_pipeline(scene, cam, embedding, set.canonicals, settings);
    const auto &map = result.level_maps[result.chosen_level];
    const auto seg = segment(map, settings.threshold);
    const auto peak = localize(map);
    const auto stats = score_stats(map);

    json out;
    out["query"] = embedding.name;
    out["level_mode"] = a.level;
    out["chosen_level"] = result.chosen_level;
    out["width"] = cam.width;
    out["height"] = cam.height;
    out["timings"] = {{"render_ms", result.timings.render_ms},
                      {"decode_ms", result.timings.decode_ms},
                      {"post_ms", result.timings.post_ms},
                      {"total_ms", result.timings.total_ms()}};
    out["score_stats"] = {{"min", stats.min}, {"max", stats.max}, {"mean", stats.mean}};
    out["localization"] = {{"row", peak.row}, {"col", peak.col}};
    std::size_t selected = 0;
    for (auto m : seg.mask) selected += m;
    out["segmentation"] = {{"threshold", seg.threshold},
                           {"degenerate", seg.degenerate},
                           {"selected_pixels", selected},
                           {"rle", mask_rle(seg.mask)}};
    if (entry && entry->gt_mask_path) {
        const fs::path p = a.queries.parent_path() / *entry->gt_mask_path;
        const auto gt = load_framebuffer(p, ChannelTag::Scalar);
        if (gt.width == cam.width && gt.height == cam.height) {
            std::vector<std::uint8_t> gmask(gt.data.size());
            for (std::size_t i = 0; i < gt.data.size(); ++i) gmask[i] = gt.data[i] > 0.5f;
            out["iou"] = iou(seg.mask, gmask);
        }
    }
    const std::string text = out.dump(1);
    if (a.out.empty()) std::cout << text << "\n";
    else write_text(a.out, text + "\n");
    if (!a.overlay.empty()) {
        const auto base = to_rgb8(render_dense(scene, cam, ChannelSource::color()));
        const auto png = encode_png(overlay_relevancy(base, map));
        write_text(a.overlay, png);
    }
    return 0;
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
    fs::path csv = "bench.csv";
    fs::path svg = "bench.svg";
    std::vector<std::uint32_t> L{16, 64, 256};
    std::vector<std::uint32_t> K{4};
    std::vector<std::string> sizes{"64x64"};
    std::vector<std::string> methods{"dense", "sparse"};
    std::uint32_t reps = 31, warmup = 10, levels = 3;
    std::uint32_t gaussians = BenchSceneSpec{}.num_gaussians;
    std::uint32_t D = 512;
    std::size_t max_elements = std::size_t(1) << 28;
    bool render_only = false;
};

int cmd_bench(const BenchArgs &a) {
    BenchPlan plan;
    plan.L_values = a.L;
    plan.K_values = a.K;
    plan.levels = a.levels;
    plan.repetitions = a.reps;
    plan.warmup = a.warmup;
    plan.max_elements = a.max_elements;
    plan.render_only = a.render_only;
    plan.scene.num_gaussians = a.gaussians;
    plan.scene.D = a.D;
    plan.image_sizes.clear();
    for (const auto &s : a.sizes) {
        unsigned h = 0, w = 0;
        if (std::sscanf(s.c_str(), "%ux%u", &h, &w) != 2) throw UsageError("--size must look like HxW: " + s);
        plan.image_sizes.emplace_back(h, w);
    }
    plan.methods.clear();
    for (const auto &m : a.methods) {
        if (m == "dense") plan.methods.push_back(BenchMethod::Dense);
        else if (m == "sparse") plan.methods.push_back(BenchMethod::Sparse);
        else throw UsageError("unknown method " + m);
    }
    try {
        plan.validate();
    } catch (const ValidationError &e) {
        throw UsageError(e.what());
    }
    const auto records = run_benchmark(plan, [](const BenchRecord &r) {
        if (r.oom) {
            std::fprintf(stderr, "%-6s L=%-4u K=%-3u %ux%u  OOM\n", to_string(r.method), r.L, r.K, r.H, r.W);
        } else {
            std::fprintf(stderr, "%-6s L=%-4u K=%-3u %ux%u  render %.3f ms  decode %.3f ms  post %.3f ms\n",
                         to_string(r.method), r.L, r.K, r.H, r.W, r.median.render_ms, r.median.decode_ms,
                         r.median.post_ms);
        }
    });
    write_text(a.csv, bench_csv(records));
    write_text(a.svg, bench_svg(records));
    try {
        std::cout << verify_speedup(records).message << "\n";
    } catch (const ValidationError &e) {
        std::cout << "speedup not checked: " << e.what() << "\n";
    }
    std::cout << a.csv.string() << "\n" << a.svg.string() << "\n";
    return 0;
}

// --- serve -----------------------------------------------------------------

struct ServeArgs {
    fs::path scene;
    fs::path queries;
    std::string host = "127.0.0.1";
    std::optional<int> port;
    std::uint64_t max_pixels = ServeOptions{}.max_pixels;
};

int cmd_serve(const ServeArgs &a) {
    ServeOptions opts;
    opts.host = a.host;
    opts.max_pixels = a.max_pixels;
    try {
        opts = apply_env_overrides(opts);
    } catch (const ValidationError &e) {
        throw UsageError(e.what());
    }
    if (a.port) opts.port = *a.port;
    QuerySet set;
    if (!a.queries.empty()) set = load_query_set(a.queries);
    ServeSession session(load_scene(a.scene), std::move(set), opts);
    HttpService service(session);
    const int port = service.bind(opts.host, opts.port);
    std::cout << "listening on http://" << opts.host << ":" << port << std::endl;
    service.listen();
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Sparse coefficient splatting for open-vocabulary 3D queries"};
    app.require_subcommand(1);
    std::optional<std::size_t> threads;
    app.add_option("--threads", threads, "Worker threads (default: SSPLAT_THREADS or all cores)");

    SynthArgs synth;
    auto *s = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
    s->add_option("--out", synth.out, "Output directory");
    s->add_option("--seed", synth.seed);
    s->add_option("--gaussians", synth.gaussians);
    s->add_option("--classes", synth.classes);
    s->add_option("--layout", synth.layout)->check(CLI::IsMember({"grid", "clustered"}));
    s->add_option("--width", synth.width);
    s->add_option("--height", synth.height);
    s->add_option("--levels", synth.levels);
    s->add_option("--L", synth.L, "Codebook size");
    s->add_option("--K", synth.K, "Stored coefficients per Gaussian");
    s->add_option("--D", synth.D, "Feature dimension");
    s->add_option("--views", synth.views, "Training views (one extra held-out view is added)");
    s->add_option("--atom-scale", synth.atom_scale, "Norm of every ground-truth atom");

    TrainArgs train;
    auto *t = app.add_subcommand("train", "Learn coefficients and codebooks with geometry frozen");
    t->add_option("--scene", train.scene)->required()->check(CLI::ExistingFile);
    t->add_option("--bundle", train.bundle, "bundle.json written by synth");
    t->add_option("--out", train.out, "Checkpoint scene file");
    t->add_option("--loss-csv", train.loss_csv);
    t->add_option("--iters", train.iters);
    t->add_option("--seed", train.seed);
    t->add_option("--cosine-weight", train.cosine_weight);

    QueryArgs query;
    auto *q = app.add_subcommand("query", "Run an open-vocabulary query");
    q->add_option("--queries", query.queries)->required()->check(CLI::ExistingFile);
    q->add_option("--scene", query.scene)->check(CLI::ExistingFile);
    q->add_option("--name", query.name);
    q->add_option("--vector-file", query.vector_file)->check(CLI::ExistingFile);
    q->add_flag("--list-queries", query.list);
    q->add_option("--cameras", query.cameras, "cameras.json; uses --view or the held-out view");
    q->add_option("--view", query.view);
    q->add_option("--position", query.position)->expected(3);
    q->add_option("--look-at", query.look_at)->expected(3);
    q->add_option("--up", query.up)->expected(3);
    q->add_option("--vfov", query.vfov);
    q->add_option("--width", query.width);
    q->add_option("--height", query.height);
    q->add_option("--level", query.level, "auto or a level index");
    q->add_option("--window", query.window);
    q->add_option("--threshold", query.threshold);
    q->add_option("--out", query.out, "Result JSON (stdout when omitted)");
    q->add_option("--overlay", query.overlay, "PNG heat map overlay");

    BenchArgs bench;
    auto *b = app.add_subcommand("bench", "Time dense and sparse query paths");
    b->add_option("--csv", bench.csv);
    b->add_option("--svg", bench.svg);
    b->add_option("--L", bench.L)->delimiter(',');
    b->add_option("--K", bench.K)->delimiter(',');
    b->add_option("--size", bench.sizes, "HxW")->delimiter(',');
    b->add_option("--methods", bench.methods)->delimiter(',');
    b->add_option("--reps", bench.reps);
    b->add_option("--warmup", bench.warmup);
    b->add_option("--levels", bench.levels);
    b->add_option("--gaussians", bench.gaussians);
    b->add_option("--D", bench.D);
    b->add_option("--max-elements", bench.max_elements, "Working-set cap in floats");
    b->add_flag("--render-only", bench.render_only);

    ServeArgs serve;
    auto *v = app.add_subcommand("serve", "HTTP service for the interactive viewer");
    v->add_option("--scene", serve.scene)->required()->check(CLI::ExistingFile);
    v->add_option("--queries", serve.queries)->check(CLI::ExistingFile);
    v->add_option("--host", serve.host);
    v->add_option("--port", serve.port, "Default 7878 or SSPLAT_PORT");
    v->add_option("--max-pixels", serve.max_pixels);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (threads) set_thread_count(*threads);
        if (*s) return cmd_synth(synth);
        if (*t) return cmd_train(train);
        if (*q) {
            if (!query.list && query.scene.empty()) throw UsageError("--scene is required");
            return cmd_query(query);
        }
        if (*b) return cmd_bench(bench);
        if (*v) return cmd_serve(serve);
    } catch (const UsageError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
