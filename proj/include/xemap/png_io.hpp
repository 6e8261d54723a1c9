#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include <png.h>

#include "xemap/errors.hpp"

namespace xemap {

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0; // 1 = grayscale, 3 = RGB
    std::vector<std::uint8_t> pixels; // row-major, interleaved
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
    // Recorded message is rethrown after libpng unwinds via longjmp.
    *static_cast<std::string*>(png_get_error_ptr(png)) = msg ? msg : "libpng error";
    longjmp(png_jmpbuf(png), 1);
}

inline void png_warn_fn(png_structp, png_const_charp) {}

} // namespace detail

/// Read an 8-bit grayscale or RGB PNG. Palette images are expanded, 16-bit
/// depth is stripped to 8, alpha is dropped.
inline PngImage read_png(const std::filesystem::path& path) {
    detail::FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f)
        throw IoError("cannot open " + path.string());

    std::uint8_t sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw BadMagic(path.string() + " is not a PNG file");

    std::string errmsg;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &errmsg,
                                             detail::png_error_fn, detail::png_warn_fn);
    if (!png)
        throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": " + errmsg);
    }

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16)
        png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    PngImage img;
    img.width = int(png_get_image_width(png, info));
    img.height = int(png_get_image_height(png, info));
    img.channels = int(png_get_channels(png, info));
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw SchemaError(path.string() + ": only 8-bit grayscale/RGB PNGs are supported");
    }

    img.pixels.resize(std::size_t(img.width) * img.height * img.channels);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.pixels.data() + std::size_t(y) * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Write an 8-bit PNG with fixed, deterministic encoder settings.
inline void write_png(const std::filesystem::path& path, const PngImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw SchemaError("write_png supports 1 or 3 channels");
    if (img.pixels.size() != std::size_t(img.width) * img.height * img.channels)
        throw DimensionMismatch("pixel buffer does not match dimensions");

    detail::FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f)
        throw WriteFailure("cannot open " + path.string() + " for writing");

    std::string errmsg;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &errmsg,
                                              detail::png_error_fn, detail::png_warn_fn);
    if (!png)
        throw WriteFailure("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw WriteFailure("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw WriteFailure(path.string() + ": " + errmsg);
    }

    png_init_io(png, f.get());
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(
                               img.pixels.data() + std::size_t(y) * img.width * img.channels));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

inline void write_png_gray(const std::filesystem::path& path, int width, int height,
                           std::vector<std::uint8_t> pixels) {
    PngImage img;
    img.width = width;
    img.height = height;
    img.channels = 1;
    img.pixels = std::move(pixels);
    write_png(path, img);
}

} // namespace xemap
