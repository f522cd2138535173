// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/server.hpp"

#include <cstdlib>
#include <cstdio>

#include <Eigen/Geometry>
#include <httplib.h>

#include "ssplat/errors.hpp"
#include "ssplat/image.hpp"
#include "ssplat/sparse_splat.hpp"

namespace ssplat {

using nlohmann::json;

namespace {

/// Request rejected before any rendering; carries the HTTP status.
struct RequestError {
    int status;
    std::string message;
};

HttpResult error_result(int status, const std::string &message, const std::string &request_id) {
    HttpResult r;
    r.status = status;
    r.request_id = request_id;
    r.body = json{{"request_id", request_id}, {"error", message}}.dump();
    return r;
}

Eigen::Vector3d vec3(const json &j, const char *key) {
    const auto &v = j.at(key);
    if (!v.is_array() || v.size() != 3) throw ValidationError(std::string("'") + key + "' must be a 3-vector");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

json parse_body(std::string_view body, std::size_t cap) {
    if (body.size() > cap) throw RequestError{413, "request body exceeds " + std::to_string(cap) + " bytes"};
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw RequestError{400, "malformed JSON body"};
    if (!j.is_object()) throw RequestError{400, "request body must be a JSON object"};
    return j;
}

Camera request_camera(const json &req, const ServeOptions &opts) {
    if (!req.contains("camera")) throw RequestError{400, "missing 'camera'"};
    const auto w = req.value("width", std::int64_t(opts.default_width));
    const auto h = req.value("height", std::int64_t(opts.default_height));
    if (w < 1 || h < 1) throw RequestError{400, "width and height must be positive"};
    if (std::uint64_t(w) * std::uint64_t(h) > opts.max_pixels) {
        throw RequestError{413, "image of " + std::to_string(w) + "x" + std::to_string(h) + " exceeds the cap of " +
                                    std::to_string(opts.max_pixels) + " pixels"};
    }
    return camera_from_pose(req.at("camera"), std::uint32_t(w), std::uint32_t(h));
}

RgbImage color_image(const Scene &scene, const Camera &cam) {
    return to_rgb8(render_dense(scene, cam, ChannelSource::color()));
}

template <class Fn>
HttpResult guarded(const std::string &request_id, Fn &&fn) {
    try {
        return fn();
    } catch (const RequestError &e) {
        return error_result(e.status, e.message, request_id);
    } catch (const json::exception &e) {
        return error_result(400, std::string("bad request field: ") + e.what(), request_id);
    } catch (const ValidationError &e) {
        return error_result(400, e.what(), request_id);
    } catch (const ResourceError &e) {
        return error_result(413, e.what(), request_id);
    } catch (const std::exception &e) {
        return error_result(500, e.what(), request_id);
    }
}

} // namespace

ServeOptions apply_env_overrides(ServeOptions options) {
    if (const char *port = std::getenv("SSPLAT_PORT"); port && *port) {
        char *end = nullptr;
        const long p = std::strtol(port, &end, 10);
        if (*end != '\0' || p < 0 || p > 65535) throw ValidationError(std::string("SSPLAT_PORT is invalid: ") + port);
        options.port = int(p);
    }
    return options;
}

Camera camera_from_pose(const json &pose, std::uint32_t width, std::uint32_t height) {
    if (!pose.is_object()) throw ValidationError("'camera' must be an object");
    const Eigen::Vector3d eye = vec3(pose, "position");
    const Eigen::Vector3d target = vec3(pose, "look_at");
    const Eigen::Vector3d up = pose.contains("up") ? vec3(pose, "up") : Eigen::Vector3d(0, 1, 0);
    const double vfov = pose.value("vfov", 50.0);
    const double near_plane = pose.value("near", 0.01);
    if (!(vfov > 0.0 && vfov < 180.0)) throw ValidationError("'vfov' must be in (0, 180) degrees");
    const Eigen::Vector3d forward = target - eye;
    if (!(forward.norm() > 0.0)) throw ValidationError("'position' and 'look_at' coincide");
    if (!(forward.normalized().cross(up).norm() > 1e-9)) throw ValidationError("'up' is parallel to the view");
    return Camera::look_at(eye, target, up, vfov, width, height, near_plane);
}

ServeSession::ServeSession(Scene scene, QuerySet queries, ServeOptions options)
    : scene_(std::move(scene)), queries_(std::move(queries)), options_(std::move(options)) {
    scene_.validate();
    if (queries_.D != 0 && queries_.D != scene_.config.D) {
        throw ValidationError("serve: query set dimension " + std::to_string(queries_.D) +
                              " does not match scene D=" + std::to_string(scene_.config.D));
    }
}

std::string ServeSession::next_request_id() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "req-%06llu", static_cast<unsigned long long>(++counter_));
    return buf;
}

HttpResult ServeSession::meta(const std::string &request_id) const {
    json j;
    j["request_id"] = request_id;
    j["gaussians"] = scene_.gaussians.size();
    j["L"] = scene_.config.L;
    j["K"] = scene_.config.K;
    j["levels"] = scene_.config.num_levels;
    j["D"] = scene_.config.D;
    j["queries"] = queries_.names();
    j["max_pixels"] = options_.max_pixels;
    j["default_width"] = options_.default_width;
    j["default_height"] = options_.default_height;
    HttpResult r;
    r.request_id = request_id;
    r.body = j.dump();
    return r;
}

HttpResult ServeSession::render(std::string_view body, const std::string &request_id) const {
    return guarded(request_id, [&] {
        const json req = parse_body(body, options_.max_body_bytes);
        const Camera cam = request_camera(req, options_);
        HttpResult r;
        r.request_id = request_id;
        r.content_type = "image/png";
        r.body = encode_png(color_image(scene_, cam));
        return r;
    });
}

HttpResult ServeSession::query(std::string_view body, const std::string &request_id) const {
    return guarded(request_id, [&] {
        const json req = parse_body(body, options_.max_body_bytes);
        const Camera cam = request_camera(req, options_);

        if (!req.contains("query")) throw RequestError{400, "missing 'query'"};
        QueryEmbedding embedding;
        const auto &q = req.at("query");
        if (q.is_string()) {
            const auto *entry = queries_.find(q.get<std::string>());
            if (!entry) {
                std::string names;
                for (const auto &n : queries_.names()) names += (names.empty() ? "" : ", ") + n;
                throw RequestError{404, "unknown query '" + q.get<std::string>() + "'; available: " + names};
            }
            embedding = entry->embedding;
        } else if (q.is_array()) {
            embedding.name = "<vector>";
            embedding.vector = q.get<std::vector<float>>();
            if (embedding.vector.size() != scene_.config.D) {
                throw RequestError{400, "query vector has " + std::to_string(embedding.vector.size()) +
                                            " entries, expected D=" + std::to_string(scene_.config.D)};
            }
        } else {
            throw RequestError{400, "'query' must be a name or a vector"};
        }
        if (queries_.canonicals.empty()) throw RequestError{400, "scene has no canonical phrases"};

        QuerySettings settings;
        std::string level_mode = "auto";
        if (req.contains("level")) {
            const auto &lv = req.at("level");
            if (lv.is_string()) {
                if (lv.get<std::string>() != "auto") throw RequestError{400, "'level' must be \"auto\" or an integer"};
            } else if (lv.is_number_integer()) {
                const auto l = lv.get<std::int64_t>();
                if (l < 0 || l >= std::int64_t(scene_.config.num_levels)) {
                    throw RequestError{400, "'level' out of range"};
                }
                settings.level = std::uint32_t(l);
                level_mode = std::to_string(l);
            } else {
                throw RequestError{400, "'level' must be \"auto\" or an integer"};
            }
        }
        const auto window = req.value("window", std::int64_t(kDefaultFilterWindow));
        if (window < 1 || window % 2 == 0) throw RequestError{400, "'window' must be a positive odd integer"};
        settings.window = std::uint32_t(window);

        const auto result = query_pipeline(scene_, cam, embedding, queries_.canonicals, settings);
        const auto &map = result.level_maps[result.chosen_level];
        const auto stats = score_stats(map);
        const auto peak = localize(map);
        const auto overlay = overlay_relevancy(color_image(scene_, cam), map);

        json j;
        j["request_id"] = request_id;
        j["query"] = embedding.name;
        j["level_mode"] = level_mode;
        j["chosen_level"] = result.chosen_level;
        j["window"] = settings.window;
        j["width"] = cam.width;
        j["height"] = cam.height;
        j["timings"] = {{"render_ms", result.timings.render_ms},
                        {"decode_ms", result.timings.decode_ms},
                        {"post_ms", result.timings.post_ms},
                        {"total_ms", result.timings.total_ms()}};
        j["score_stats"] = {{"min", stats.min}, {"max", stats.max}, {"mean", stats.mean}};
        j["localization"] = {{"row", peak.row}, {"col", peak.col}, {"score", map.at(peak.row, peak.col)}};
        j["overlay_png"] = httplib::detail::base64_encode(encode_png(overlay));
        HttpResult r;
        r.request_id = request_id;
        r.body = j.dump();
        return r;
    });
}

struct HttpService::Impl {
    explicit Impl(ServeSession &s) : session(s) {}
    ServeSession &session;
    httplib::Server server;
};

HttpService::HttpService(ServeSession &session) : impl_(std::make_unique<Impl>(session)) {
    auto &srv = impl_->server;
    // Oversized bodies still reach the handler so the 413 carries a request id.
    srv.set_payload_max_length(std::size_t(64) << 20);
    auto respond = [](httplib::Response &res, const HttpResult &r) {
        res.status = r.status;
        res.set_header("X-Request-Id", r.request_id);
        res.set_content(r.body, r.content_type.c_str());
    };
    auto id_for = [this](const httplib::Request &req) {
        const auto given = req.get_header_value("X-Request-Id");
        return given.empty() ? impl_->session.next_request_id() : given;
    };
    srv.Get("/meta", [=, this](const httplib::Request &req, httplib::Response &res) {
        respond(res, impl_->session.meta(id_for(req)));
    });
    srv.Post("/render", [=, this](const httplib::Request &req, httplib::Response &res) {
        respond(res, impl_->session.render(req.body, id_for(req)));
    });
    srv.Post("/query", [=, this](const httplib::Request &req, httplib::Response &res) {
        respond(res, impl_->session.query(req.body, id_for(req)));
    });
    srv.set_error_handler([=, this](const httplib::Request &req, httplib::Response &res) {
        if (!res.body.empty()) return;
        const auto r = error_result(res.status, "no such endpoint", id_for(req));
        res.set_header("X-Request-Id", r.request_id);
        res.set_content(r.body, "application/json");
    });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string &host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw ResourceError("serve: cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw ResourceError("serve: cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
    if (impl_) impl_->server.stop();
}

} // namespace ssplat
