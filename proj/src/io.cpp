// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ssplat/errors.hpp"

namespace ssplat {

namespace {

constexpr char kSceneMagic[4] = {'L', 'S', 'V', '2'};
constexpr char kFramebufferMagic[4] = {'L', 'S', 'F', 'B'};

class ByteWriter {
public:
    void magic(const char (&m)[4]) { bytes_.insert(bytes_.end(), m, m + 4); }

    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, const char *what) : bytes_(bytes), what_(what) {}

    void magic(const char (&m)[4]) {
        need(4);
        if (std::memcmp(bytes_.data(), m, 4) != 0) {
            throw LoadError(LoadErrorKind::BadMagic, std::string(what_) + ": unrecognized file signature", 0);
        }
        pos_ += 4;
    }

    template <class T>
    T get() {
        need(sizeof(T));
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        T v;
        std::memcpy(&v, raw, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw LoadError(LoadErrorKind::Truncated,
                            std::string(what_) + ": file ends after " + std::to_string(bytes_.size()) +
                                " bytes, needed " + std::to_string(n) + " more",
                            std::int64_t(pos_));
        }
    }

    std::span<const std::uint8_t> bytes_;
    const char *what_;
    std::size_t pos_ = 0;
};

std::vector<float> json_floats(const nlohmann::json &j, std::size_t expected, const std::string &what) {
    if (!j.is_array()) throw LoadError(LoadErrorKind::Corrupt, what + ": expected an array");
    if (j.size() != expected) {
        throw LoadError(LoadErrorKind::Corrupt, what + ": expected " + std::to_string(expected) + " values, got " +
                                                    std::to_string(j.size()));
    }
    std::vector<float> out;
    out.reserve(expected);
    for (const auto &v : j) {
        if (!v.is_number()) throw LoadError(LoadErrorKind::Corrupt, what + ": non-numeric entry");
        out.push_back(v.get<float>());
    }
    return out;
}

} // namespace

std::vector<std::uint8_t> encode_scene(const Scene &scene) {
    scene.validate();
    const auto &cfg = scene.config;
    ByteWriter w;
    w.magic(kSceneMagic);
    w.put<std::uint32_t>(kSceneFormatVersion);
    w.put<std::uint32_t>(std::uint32_t(scene.gaussians.size()));
    w.put<std::uint32_t>(cfg.num_levels);
    w.put<std::uint32_t>(cfg.L);
    w.put<std::uint32_t>(cfg.K);
    w.put<std::uint32_t>(cfg.D);
    for (const auto &g : scene.gaussians) {
        w.put<std::uint32_t>(g.id);
        for (float v : g.position) w.put(v);
        w.put(g.rotation.w);
        w.put(g.rotation.x);
        w.put(g.rotation.y);
        w.put(g.rotation.z);
        for (float v : g.scale) w.put(v);
        w.put(g.opacity);
        for (float v : g.color) w.put(v);
        for (const auto &c : g.coeffs) {
            for (auto i : c.indices) w.put<std::uint16_t>(std::uint16_t(i));
            for (float v : c.values) w.put(v);
        }
    }
    for (const auto &cb : scene.codebooks)
        for (float v : cb.data()) w.put(v);
    return w.take();
}

Scene decode_scene(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "scene");
    r.magic(kSceneMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kSceneFormatVersion) {
        throw LoadError(LoadErrorKind::VersionMismatch,
                        "scene: format version " + std::to_string(version) + ", expected " +
                            std::to_string(kSceneFormatVersion),
                        4);
    }
    const auto count = r.get<std::uint32_t>();
    Scene scene;
    auto &cfg = scene.config;
    cfg.num_levels = r.get<std::uint32_t>();
    cfg.L = r.get<std::uint32_t>();
    cfg.K = r.get<std::uint32_t>();
    cfg.D = r.get<std::uint32_t>();
    try {
        cfg.validate();
    } catch (const ValidationError &e) {
        throw LoadError(LoadErrorKind::Corrupt, std::string("scene header: ") + e.what(), 8);
    }
    const std::size_t record = 4 * (1 + 3 + 4 + 3 + 1 + 3) + std::size_t(cfg.num_levels) * cfg.K * 6;
    // Each record is checked against the remaining bytes before anything is
    // allocated, so a corrupt count or level field cannot force a huge allocation.
    scene.gaussians.reserve(std::min<std::size_t>(count, r.remaining() / record));
    for (std::uint32_t n = 0; n < count; ++n) {
        if (r.remaining() < record) {
            throw LoadError(LoadErrorKind::Truncated,
                            "scene: Gaussian " + std::to_string(n) + " of " + std::to_string(count) +
                                " needs " + std::to_string(record) + " bytes, " + std::to_string(r.remaining()) +
                                " remain",
                            std::int64_t(r.pos()));
        }
        Gaussian g;
        g.id = r.get<std::uint32_t>();
        for (float &v : g.position) v = r.get<float>();
        g.rotation.w = r.get<float>();
        g.rotation.x = r.get<float>();
        g.rotation.y = r.get<float>();
        g.rotation.z = r.get<float>();
        for (float &v : g.scale) v = r.get<float>();
        g.opacity = r.get<float>();
        for (float &v : g.color) v = r.get<float>();
        g.coeffs.resize(cfg.num_levels);
        for (auto &c : g.coeffs) {
            c.indices.resize(cfg.K);
            c.values.resize(cfg.K);
            for (auto &i : c.indices) i = r.get<std::uint16_t>();
            for (float &v : c.values) v = r.get<float>();
        }
        scene.gaussians.push_back(std::move(g));
    }
    const std::size_t atoms_per_level = std::size_t(cfg.L) * cfg.D;
    if (r.remaining() / 4 / cfg.num_levels < atoms_per_level) {
        throw LoadError(LoadErrorKind::Truncated,
                        "scene: codebooks need " + std::to_string(atoms_per_level * cfg.num_levels * 4) +
                            " bytes, " + std::to_string(r.remaining()) + " remain",
                        std::int64_t(r.pos()));
    }
    for (std::uint32_t l = 0; l < cfg.num_levels; ++l) {
        std::vector<float> atoms(atoms_per_level);
        for (float &v : atoms) v = r.get<float>();
        scene.codebooks.emplace_back(l, cfg.L, cfg.D, std::move(atoms));
    }
    if (r.remaining() != 0) {
        throw LoadError(LoadErrorKind::Corrupt, "scene: " + std::to_string(r.remaining()) + " trailing bytes",
                        std::int64_t(r.pos()));
    }
    try {
        scene.validate();
    } catch (const ValidationError &e) {
        throw LoadError(LoadErrorKind::Corrupt, std::string("scene content: ") + e.what());
    }
    return scene;
}

void save_scene(const std::filesystem::path &path, const Scene &scene) { write_file(path, encode_scene(scene)); }

Scene load_scene(const std::filesystem::path &path) { return decode_scene(read_file(path)); }

std::vector<std::uint8_t> encode_framebuffer(const Framebuffer &fb) {
    if (fb.data.size() != fb.pixel_count() * fb.channels) {
        throw ValidationError("framebuffer: data size does not match dimensions");
    }
    ByteWriter w;
    w.magic(kFramebufferMagic);
    w.put<std::uint32_t>(kFramebufferFormatVersion);
    w.put<std::uint32_t>(fb.width);
    w.put<std::uint32_t>(fb.height);
    w.put<std::uint32_t>(fb.channels);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(fb.tag));
    for (float v : fb.data) w.put(v);
    return w.take();
}

Framebuffer decode_framebuffer(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "framebuffer");
    r.magic(kFramebufferMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kFramebufferFormatVersion) {
        throw LoadError(LoadErrorKind::VersionMismatch, "framebuffer: format version " + std::to_string(version), 4);
    }
    Framebuffer fb;
    fb.width = r.get<std::uint32_t>();
    fb.height = r.get<std::uint32_t>();
    fb.channels = r.get<std::uint32_t>();
    const auto tag = r.get<std::uint32_t>();
    if (tag > static_cast<std::uint32_t>(ChannelTag::Scalar)) {
        throw LoadError(LoadErrorKind::Corrupt, "framebuffer: unknown channel tag " + std::to_string(tag), 20);
    }
    fb.tag = static_cast<ChannelTag>(tag);
    const std::size_t n = fb.pixel_count() * fb.channels;
    if (r.remaining() / 4 < n) {
        throw LoadError(LoadErrorKind::Truncated,
                        "framebuffer: payload holds " + std::to_string(r.remaining()) + " bytes, header promises " +
                            std::to_string(n * 4),
                        std::int64_t(r.pos() + (r.remaining() / 4) * 4));
    }
    fb.data.resize(n);
    for (float &v : fb.data) v = r.get<float>();
    if (r.remaining() != 0) {
        throw LoadError(LoadErrorKind::Corrupt, "framebuffer: trailing bytes", std::int64_t(r.pos()));
    }
    return fb;
}

void dump_framebuffer(const std::filesystem::path &path, const Framebuffer &fb) {
    write_file(path, encode_framebuffer(fb));
}

Framebuffer load_framebuffer(const std::filesystem::path &path, std::optional<ChannelTag> expected) {
    auto fb = decode_framebuffer(read_file(path));
    if (expected && fb.tag != *expected) {
        throw LoadError(LoadErrorKind::WrongTag, "framebuffer " + path.string() + ": tag is " + to_string(fb.tag) +
                                                     ", expected " + to_string(*expected));
    }
    return fb;
}

void load_framebuffer_into(const std::filesystem::path &path, Framebuffer &dst) {
    auto fb = load_framebuffer(path, dst.tag);
    if (fb.width != dst.width || fb.height != dst.height || fb.channels != dst.channels) {
        throw LoadError(LoadErrorKind::DimensionMismatch,
                        "framebuffer " + path.string() + ": " + std::to_string(fb.width) + "x" +
                            std::to_string(fb.height) + "x" + std::to_string(fb.channels) + " does not fit " +
                            std::to_string(dst.width) + "x" + std::to_string(dst.height) + "x" +
                            std::to_string(dst.channels));
    }
    dst.data = std::move(fb.data);
}

const QueryEntry *QuerySet::find(const std::string &name) const {
    for (const auto &q : queries)
        if (q.embedding.name == name) return &q;
    return nullptr;
}

std::vector<std::string> QuerySet::names() const {
    std::vector<std::string> out;
    for (const auto &q : queries) out.push_back(q.embedding.name);
    return out;
}

nlohmann::json query_set_to_json(const QuerySet &set) {
    nlohmann::json j;
    j["D"] = set.D;
    j["canonicals"] = set.canonicals;
    auto queries = nlohmann::json::array();
    for (const auto &q : set.queries) {
        nlohmann::json e;
        e["name"] = q.embedding.name;
        e["vector"] = q.embedding.vector;
        if (q.gt_mask_path) e["gt_mask_path"] = *q.gt_mask_path;
        queries.push_back(std::move(e));
    }
    j["queries"] = std::move(queries);
    return j;
}

QuerySet query_set_from_json(const nlohmann::json &j) {
    try {
        QuerySet set;
        if (!j.is_object() || !j.contains("D") || !j.contains("canonicals") || !j.contains("queries")) {
            throw LoadError(LoadErrorKind::Corrupt, "query set: expected keys D, canonicals, queries");
        }
        set.D = j.at("D").get<std::uint32_t>();
        if (set.D == 0) throw LoadError(LoadErrorKind::Corrupt, "query set: D must be positive");
        for (const auto &c : j.at("canonicals")) set.canonicals.push_back(json_floats(c, set.D, "query set canonical"));
        for (const auto &q : j.at("queries")) {
            QueryEntry e;
            e.embedding.name = q.at("name").get<std::string>();
            e.embedding.vector = json_floats(q.at("vector"), set.D, "query '" + e.embedding.name + "'");
            if (q.contains("gt_mask_path")) e.gt_mask_path = q.at("gt_mask_path").get<std::string>();
            set.queries.push_back(std::move(e));
        }
        return set;
    } catch (const nlohmann::json::exception &e) {
        throw LoadError(LoadErrorKind::Corrupt, std::string("query set: ") + e.what());
    }
}

void save_query_set(const std::filesystem::path &path, const QuerySet &set) {
    write_text(path, query_set_to_json(set).dump(1) + "\n");
}

QuerySet load_query_set(const std::filesystem::path &path) {
    const auto bytes = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error &e) {
        throw LoadError(LoadErrorKind::Corrupt, "query set " + path.string() + ": " + e.what(),
                        std::int64_t(e.byte));
    }
    return query_set_from_json(j);
}

nlohmann::json camera_to_json(const Camera &cam) {
    nlohmann::json j;
    std::vector<double> R(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) R[r * 3 + c] = cam.rotation(r, c);
    j["rotation"] = R;
    j["translation"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["near"] = cam.near_plane;
    return j;
}

Camera camera_from_json(const nlohmann::json &j) {
    try {
        Camera cam;
        const auto R = j.at("rotation").get<std::vector<double>>();
        const auto t = j.at("translation").get<std::vector<double>>();
        if (R.size() != 9 || t.size() != 3) throw LoadError(LoadErrorKind::Corrupt, "camera: bad pose arrays");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cam.rotation(r, c) = R[r * 3 + c];
        cam.translation = Eigen::Vector3d(t[0], t[1], t[2]);
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<std::uint32_t>();
        cam.height = j.at("height").get<std::uint32_t>();
        cam.near_plane = j.at("near").get<double>();
        cam.validate();
        return cam;
    } catch (const nlohmann::json::exception &e) {
        throw LoadError(LoadErrorKind::Corrupt, std::string("camera: ") + e.what());
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(LoadErrorKind::Io, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

} // namespace ssplat
