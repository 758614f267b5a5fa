#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "skydmd/core.hpp"

namespace skydmd {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw data_error("cannot open file: " + path.string());
    return f;
}

// Reads one whitespace/comment-delimited token from a PGM header.
inline std::string pgm_token(std::FILE* f) {
    std::string tok;
    int c = std::fgetc(f);
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
        } else if (!std::isspace(c)) {
            break;
        }
        c = std::fgetc(f);
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = std::fgetc(f);
    }
    if (c == '#') std::ungetc(c, f);
    if (tok.empty()) throw data_error("truncated PGM header");
    return tok;
}

inline long pgm_int(std::FILE* f) {
    const std::string tok = pgm_token(f);
    try {
        std::size_t pos = 0;
        const long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw data_error("malformed PGM header field: " + tok);
    }
}

}  // namespace detail

/// Reads a binary (P5) PGM with 8- or 16-bit samples, scaled to [0,1].
inline Image read_pgm(const std::filesystem::path& path) {
    detail::FilePtr f = detail::open_file(path, "rb");
    if (detail::pgm_token(f.get()) != "P5")
        throw data_error("not a binary PGM (P5) file: " + path.string());
    const long w = detail::pgm_int(f.get());
    const long h = detail::pgm_int(f.get());
    const long maxval = detail::pgm_int(f.get());
    if (w < 1 || h < 1) throw data_error("PGM has empty dimensions: " + path.string());
    if (maxval < 1 || maxval > 65535)
        throw data_error("PGM maxval out of range: " + path.string());
    // The header terminates with exactly one whitespace byte (already
    // consumed by the tokenizer).
    const bool wide = maxval > 255;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<std::uint8_t> raw(n * (wide ? 2 : 1));
    if (std::fread(raw.data(), 1, raw.size(), f.get()) != raw.size())
        throw data_error("truncated PGM pixel data: " + path.string());

    Image img(h, w);
    const double scale = 1.0 / static_cast<double>(maxval);
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                                  static_cast<std::size_t>(c);
            const unsigned value = wide ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                        : raw[i];
            img(r, c) = value * scale;
        }
    }
    return img;
}

/// Writes a 16-bit binary (P5) PGM; values are clamped to [0,1] first.
inline void write_pgm(const Image& img, const std::filesystem::path& path) {
    detail::FilePtr f = detail::open_file(path, "wb");
    const long h = img.rows(), w = img.cols();
    std::fprintf(f.get(), "P5\n%ld %ld\n65535\n", w, h);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 2);
    std::size_t i = 0;
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            const unsigned value =
                static_cast<unsigned>(std::lround(clamp01(img(r, c)) * 65535.0));
            raw[i++] = static_cast<std::uint8_t>(value >> 8);
            raw[i++] = static_cast<std::uint8_t>(value & 0xff);
        }
    }
    if (std::fwrite(raw.data(), 1, raw.size(), f.get()) != raw.size())
        throw data_error("short write to PGM file: " + path.string());
}

/// Reads an 8- or 16-bit grayscale PNG, scaled to [0,1].
inline Image read_png(const std::filesystem::path& path) {
    detail::FilePtr f = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw data_error("libpng allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw data_error("libpng allocation failed");
    }
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("failed to decode PNG: " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("unsupported PNG format (grayscale required): " + path.string());
    }
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const int depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    raw.resize(stride * h);
    rows.resize(h);
    for (png_uint_32 r = 0; r < h; ++r) rows[r] = raw.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<long>(h), static_cast<long>(w));
    const double scale = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (png_uint_32 r = 0; r < h; ++r) {
        const std::uint8_t* row = raw.data() + r * stride;
        for (png_uint_32 c = 0; c < w; ++c) {
            const unsigned value = depth == 16
                                       ? (static_cast<unsigned>(row[2 * c]) << 8) | row[2 * c + 1]
                                       : row[c];
            img(static_cast<long>(r), static_cast<long>(c)) = value * scale;
        }
    }
    return img;
}

/// Writes a 16-bit grayscale PNG; values are clamped to [0,1] first.
inline void write_png(const Image& img, const std::filesystem::path& path) {
    detail::FilePtr f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw data_error("libpng allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw data_error("libpng allocation failed");
    }
    const long h = img.rows(), w = img.cols();
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 2);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw data_error("failed to encode PNG: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::size_t i = 0;
    for (long r = 0; r < h; ++r) {
        rows[static_cast<std::size_t>(r)] = raw.data() + i;
        for (long c = 0; c < w; ++c) {
            const unsigned value =
                static_cast<unsigned>(std::lround(clamp01(img(r, c)) * 65535.0));
            raw[i++] = static_cast<std::uint8_t>(value >> 8);
            raw[i++] = static_cast<std::uint8_t>(value & 0xff);
        }
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads a frame by extension: .pgm -> PGM, .png -> PNG.
inline Image read_image(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw data_error("unsupported image extension: " + path.string());
}

}  // namespace skydmd
