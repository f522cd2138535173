// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the built `ssplat` binary end to end.

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ssplat/image.hpp"
#include "ssplat/io.hpp"

namespace ssplat {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ssplat-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Outcome run(const std::string &args) const {
        const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd = std::string(SSPLAT_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                                err.string();
        const int status = std::system(cmd.c_str());
        Outcome r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    // Small synthetic bundle under dir_/name.
    fs::path synth(const std::string &name, const std::string &extra = "") const {
        const auto out = dir_ / name;
        const auto r = run("synth --out " + out.string() +
                           " --seed 5 --gaussians 256 --classes 3 --width 32 --height 32 --levels 2 --L 8 --K 2 "
                           "--D 8 --views 2 " +
                           extra);
        EXPECT_EQ(r.code, 0) << r.err;
        return out;
    }

    fs::path dir_;
};

TEST_F(Cli, SynthIsDeterministic) {
    const auto a = synth("a"), b = synth("b");
    EXPECT_EQ(slurp(a / "scene.lsv2"), slurp(b / "scene.lsv2"));
    EXPECT_EQ(slurp(a / "queries.json"), slurp(b / "queries.json"));
    EXPECT_EQ(slurp(a / "targets/view1_level1.lsfb"), slurp(b / "targets/view1_level1.lsfb"));
    const auto manifest = json::parse(slurp(a / "bundle.json"));
    EXPECT_EQ(manifest["heldout_view"], 2);
    EXPECT_EQ(manifest["targets"].size(), 3u);
    EXPECT_EQ(manifest["masks"][2].size(), 3u);
    const auto scene = load_scene(a / "scene.lsv2");
    EXPECT_EQ(scene.config, (SceneConfig{2, 8, 2, 8}));
    const auto qs = load_query_set(a / "queries.json");
    EXPECT_EQ(qs.queries[1].gt_mask_path, "masks/view2_class1.lsfb");
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run("synth --out " + (dir_ / "x").string() + " --classes 0").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("bench --size 64by64").code, 2);
    const auto b = synth("b");
    const auto r = run("train --scene " + (b / "scene.lsv2").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--bundle"), std::string::npos);
}

TEST_F(Cli, TrainWithZeroIterationsKeepsScene) {
    const auto b = synth("b");
    const auto out = dir_ / "t.lsv2", csv = dir_ / "loss.csv";
    const auto r = run("train --scene " + (b / "scene.lsv2").string() + " --bundle " + (b / "bundle.json").string() +
                       " --iters 0 --out " + out.string() + " --loss-csv " + csv.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(out), slurp(b / "scene.lsv2"));
    EXPECT_EQ(slurp(csv), "iter,loss,grad_norm\n");
}

TEST_F(Cli, TrainWritesCheckpointAndCurve) {
    const auto b = synth("b");
    const auto out = dir_ / "t.lsv2", csv = dir_ / "loss.csv";
    const auto r = run("train --scene " + (b / "scene.lsv2").string() + " --bundle " + (b / "bundle.json").string() +
                       " --iters 25 --out " + out.string() + " --loss-csv " + csv.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("held-out loss"), std::string::npos);
    const auto trained = load_scene(out);
    EXPECT_NO_THROW(trained.validate());
    const auto text = slurp(csv);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 26);
}

TEST_F(Cli, QueryListsRunsAndReportsIou) {
    const auto b = synth("b");
    const auto list = run("query --queries " + (b / "queries.json").string() + " --list-queries");
    ASSERT_EQ(list.code, 0) << list.err;
    EXPECT_EQ(list.out, "class_0\nclass_1\nclass_2\n");

    const auto unknown = run("query --queries " + (b / "queries.json").string() + " --scene " +
                             (b / "scene.lsv2").string() + " --name sofa");
    EXPECT_EQ(unknown.code, 2);
    EXPECT_NE(unknown.err.find("class_2"), std::string::npos);

    const auto overlay = dir_ / "o.png";
    const auto r = run("query --queries " + (b / "queries.json").string() + " --scene " +
                       (b / "scene.lsv2").string() + " --cameras " + (b / "cameras.json").string() +
                       " --name class_1 --overlay " + overlay.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["query"], "class_1");
    EXPECT_EQ(j["width"], 32);
    EXPECT_TRUE(j.contains("iou"));
    EXPECT_GE(j["iou"].get<double>(), 0.0);
    EXPECT_GT(j["segmentation"]["selected_pixels"].get<int>(), 0);
    EXPECT_TRUE(j["timings"].contains("total_ms"));
    const auto png = slurp(overlay);
    const auto img = decode_png(std::vector<std::uint8_t>(png.begin(), png.end()));
    EXPECT_EQ(img.width, 32u);

    const auto bad_level = run("query --queries " + (b / "queries.json").string() + " --scene " +
                               (b / "scene.lsv2").string() + " --name class_1 --level top");
    EXPECT_EQ(bad_level.code, 2);
}

TEST_F(Cli, BenchRecordsOutOfMemoryCells) {
    const auto csv = dir_ / "b.csv", svg = dir_ / "b.svg";
    const auto r = run("bench --csv " + csv.string() + " --svg " + svg.string() +
                       " --L 64 --K 4 --reps 5 --warmup 1 --gaussians 100 --D 16 --max-elements 790000");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto text = slurp(csv);
    EXPECT_NE(text.find("dense,64,4,3,64,64,OOM,OOM,OOM,OOM"), std::string::npos);
    EXPECT_NE(text.find("sparse,64,4,3,64,64,"), std::string::npos);
    EXPECT_NE(r.out.find("pass"), std::string::npos);
    EXPECT_EQ(slurp(svg).rfind("<svg", 0), 0u);
}

} // namespace
} // namespace ssplat
