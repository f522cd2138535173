// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ssplat/core.hpp"
#include "ssplat/io.hpp"
#include "ssplat/projection.hpp"

namespace ssplat {

inline constexpr int kDefaultPort = 7878;

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = kDefaultPort;
    /// Largest accepted width·height.
    std::uint64_t max_pixels = 1024 * 1024;
    std::size_t max_body_bytes = 1 << 20;
    std::uint32_t default_width = 256;
    std::uint32_t default_height = 256;
};

/// Applies SSPLAT_PORT when set; throws ValidationError on a bad value.
ServeOptions apply_env_overrides(ServeOptions options);

struct HttpResult {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::string request_id;
};

/// Camera from a request pose object:
///   {"position": [x,y,z], "look_at": [x,y,z], "up": [x,y,z] (default +y),
///    "vfov": degrees (default 50), "near": (default 0.01)}
Camera camera_from_pose(const nlohmann::json &pose, std::uint32_t width, std::uint32_t height);

/// Immutable scene plus query palette; handlers never mutate it and may run
/// concurrently.
class ServeSession {
public:
    ServeSession(Scene scene, QuerySet queries, ServeOptions options = {});

    const Scene &scene() const noexcept { return scene_; }
    const QuerySet &queries() const noexcept { return queries_; }
    const ServeOptions &options() const noexcept { return options_; }

    /// GET /meta
    HttpResult meta(const std::string &request_id) const;
    /// POST /render: {"camera": pose, "width": W, "height": H} → PNG.
    HttpResult render(std::string_view body, const std::string &request_id) const;
    /// POST /query: {"camera": pose, "width", "height", "query": name | [D floats],
    /// "level": "auto" | n, "window": odd n} → JSON with a base64 PNG overlay.
    HttpResult query(std::string_view body, const std::string &request_id) const;

    std::string next_request_id();

private:
    const Scene scene_;
    const QuerySet queries_;
    const ServeOptions options_;
    std::atomic<std::uint64_t> counter_{0};
};

/// Socket front end over a session.
class HttpService {
public:
    explicit HttpService(ServeSession &session);
    ~HttpService();
    HttpService(const HttpService &) = delete;
    HttpService &operator=(const HttpService &) = delete;

    /// Binds to host:port (port 0 picks a free one) and returns the port.
    int bind(const std::string &host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ssplat
