// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

#include "ssplat/errors.hpp"

namespace ssplat {

RgbImage to_rgb8(const Framebuffer &color) {
    if (color.channels != 3) throw ValidationError("to_rgb8: expected a 3-channel buffer");
    RgbImage img{color.width, color.height, std::vector<std::uint8_t>(color.data.size())};
    for (std::size_t i = 0; i < color.data.size(); ++i) {
        const float v = std::clamp(color.data[i], 0.0f, 1.0f);
        img.pixels[i] = std::uint8_t(std::lround(v * 255.0f));
    }
    return img;
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t size) {
    auto *out = static_cast<std::string *>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char *>(data), size);
}

void png_flush(png_structp) {}

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

void png_consume(png_structp png, png_bytep data, png_size_t size) {
    auto *cur = static_cast<ReadCursor *>(png_get_io_ptr(png));
    if (cur->pos + size > cur->bytes.size()) png_error(png, "truncated");
    std::memcpy(data, cur->bytes.data() + cur->pos, size);
    cur->pos += size;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    *static_cast<std::string *>(png_get_error_ptr(png)) = msg;
    png_longjmp(png, 1);
}

} // namespace

std::string encode_png(const RgbImage &image) {
    if (image.width == 0 || image.height == 0 ||
        image.pixels.size() != std::size_t(image.width) * image.height * 3) {
        throw ValidationError("encode_png: image dimensions do not match pixel data");
    }
    std::string out, error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ResourceError("encode_png: libpng allocation failed");
    }
    std::vector<png_const_bytep> rows(image.height);
    for (std::uint32_t y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + std::size_t(y) * image.width * 3;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ValidationError("encode_png: " + error);
    }
    png_set_write_fn(png, &out, png_append, png_flush);
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw LoadError(LoadErrorKind::BadMagic, "decode_png: missing PNG signature", 0);
    }
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ResourceError("decode_png: libpng allocation failed");
    }
    ReadCursor cursor{bytes, 0};
    RgbImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError(LoadErrorKind::Corrupt, "decode_png: " + error);
    }
    png_set_read_fn(png, &cursor, png_consume);
    png_read_info(png, info);
    if (png_get_bit_depth(png, info) != 8 || png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB) {
        png_error(png, "expected 8-bit RGB");
    }
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.pixels.resize(std::size_t(img.width) * img.height * 3);
    rows.resize(img.height);
    for (std::uint32_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + std::size_t(y) * img.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::array<float, 3> turbo(float t) {
    // Polynomial approximation of the Turbo colormap (A. Mikhailov, 2019).
    const double x = std::clamp(double(t), 0.0, 1.0);
    const double x2 = x * x, x3 = x2 * x, x4 = x3 * x, x5 = x4 * x;
    const double r = 0.13572138 + 4.61539260 * x - 42.66032258 * x2 + 132.13108234 * x3 - 152.94239396 * x4 +
                     59.28637943 * x5;
    const double g = 0.09140261 + 2.19418839 * x + 4.84296658 * x2 - 14.18503333 * x3 + 4.27729857 * x4 +
                     2.82956604 * x5;
    const double b = 0.10667330 + 12.64194608 * x - 60.58204836 * x2 + 110.36276771 * x3 - 89.90310912 * x4 +
                     27.34824973 * x5;
    return {float(std::clamp(r, 0.0, 1.0)), float(std::clamp(g, 0.0, 1.0)), float(std::clamp(b, 0.0, 1.0))};
}

RgbImage overlay_relevancy(const RgbImage &base, const RelevancyMap &map) {
    if (base.width != map.width || base.height != map.height) {
        throw ValidationError("overlay_relevancy: map and image sizes differ");
    }
    RgbImage out = base;
    const auto stats = score_stats(map);
    const double range = stats.max - stats.min;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < map.scores.size(); ++i) {
        const float n = float((map.scores[i] - stats.min) / range);
        const float a = kOverlayMaxAlpha * n;
        const auto c = turbo(n);
        for (int ch = 0; ch < 3; ++ch) {
            const float v = (1.0f - a) * float(base.pixels[i * 3 + ch]) + a * c[ch] * 255.0f;
            out.pixels[i * 3 + ch] = std::uint8_t(std::lround(std::clamp(v, 0.0f, 255.0f)));
        }
    }
    return out;
}

} // namespace ssplat
