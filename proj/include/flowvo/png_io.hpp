#pragma once

#include "flowvo/flow_io.hpp"
#include "flowvo/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowvo {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};

using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

} // namespace detail

/// 8-bit RGB raster used for rendered diagnostics.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data; // row-major interleaved r, g, b

    RgbImage() = default;
    RgbImage(int h, int w)
        : height(h), width(w),
          data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, 0) {}

    std::uint8_t& at(int r, int c, int channel) {
        return data[(static_cast<std::size_t>(r) * width + c) * 3 + channel];
    }
    std::uint8_t at(int r, int c, int channel) const {
        return data[(static_cast<std::size_t>(r) * width + c) * 3 + channel];
    }
};

/// Binary masks are stored as 8-bit grayscale PNG with values 0 and 255.
inline void write_mask_png(const std::string& path, const MaskMap& mask) {
    if (mask.empty())
        throw std::invalid_argument("write_mask_png: empty mask");
    detail::FileHandle fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw FormatError("write_mask_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw FormatError("write_mask_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw FormatError("write_mask_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("write_mask_png: libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width()),
                 static_cast<png_uint_32>(mask.height()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(mask.width()));
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c)
            row[static_cast<std::size_t>(c)] = mask(r, c) ? 255 : 0;
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

inline MaskMap read_mask_png(const std::string& path) {
    detail::FileHandle fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw FormatError("read_mask_png: cannot open " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError("read_mask_png: bad PNG signature at byte offset 0 in " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw FormatError("read_mask_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw FormatError("read_mask_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("read_mask_png: libpng error reading " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    // Normalize any input layout to 8-bit grayscale.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color & PNG_COLOR_MASK_COLOR)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    MaskMap mask(h, w);
    std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
    for (int r = 0; r < h; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < w; ++c)
            mask(r, c) = row[static_cast<std::size_t>(c)] >= 128 ? 1 : 0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return mask;
}

inline void write_rgb_png(const std::string& path, const RgbImage& image) {
    if (image.height == 0 || image.width == 0)
        throw std::invalid_argument("write_rgb_png: empty image");
    detail::FileHandle fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw FormatError("write_rgb_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw FormatError("write_rgb_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw FormatError("write_rgb_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("write_rgb_png: libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < image.height; ++r)
        png_write_row(png,
                      const_cast<png_bytep>(&image.data[static_cast<std::size_t>(r) *
                                                        static_cast<std::size_t>(image.width) * 3]));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

} // namespace flowvo
