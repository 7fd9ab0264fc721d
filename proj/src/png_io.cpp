#include "nightseg/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace nightseg {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_png(const std::string& path, const uint8_t* data, int h, int w, int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(data + static_cast<size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::pair<Tensor<uint8_t>, int> read_png(const std::string& path, int want_channels) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open for reading: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (want_channels == 3) {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        png_set_strip_alpha(png);
    } else {
        if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    Tensor<uint8_t> raw({h, w * want_channels});
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = raw.ptr() + static_cast<size_t>(y) * w * want_channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return {std::move(raw), w};
}

}  // namespace

void write_png_rgb8(const std::string& path, const Tensor<uint8_t>& img) {
    require(img.shape.size() == 3 && img.shape[0] == 3, "write_png_rgb8: expected [3,H,W]");
    const int h = img.shape[1], w = img.shape[2];
    std::vector<uint8_t> interleaved(static_cast<size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                interleaved[(static_cast<size_t>(y) * w + x) * 3 + c] = img.at(c, y, x);
    write_png(path, interleaved.data(), h, w, 3);
}

void write_png_rgb(const std::string& path, const Image<float>& img) {
    require(img.shape.size() == 3 && img.shape[0] == 3, "write_png_rgb: expected [3,H,W]");
    Tensor<uint8_t> q(img.shape);
    for (int64_t i = 0; i < img.numel(); ++i) {
        float v = std::min(std::max(img[i], 0.0f), 1.0f);
        q[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    write_png_rgb8(path, q);
}

void write_png_gray(const std::string& path, const Tensor<uint8_t>& img) {
    require(img.shape.size() == 2, "write_png_gray: expected [H,W]");
    write_png(path, img.ptr(), img.shape[0], img.shape[1], 1);
}

Image<float> read_png_rgb(const std::string& path) {
    auto [raw, w] = read_png(path, 3);
    const int h = raw.shape[0];
    Image<float> img({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) =
                    static_cast<float>(raw.data[(static_cast<size_t>(y) * w + x) * 3 + c]) / 255.0f;
    return img;
}

Tensor<uint8_t> read_png_gray(const std::string& path) {
    auto [raw, w] = read_png(path, 1);
    Tensor<uint8_t> out({raw.shape[0], w});
    out.data = std::move(raw.data);
    return out;
}

}  // namespace nightseg
