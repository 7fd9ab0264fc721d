#pragma once

#include <string>

#include "nightseg/tensor.hpp"

namespace nightseg {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// 8-bit PNG round trips. Float images are clamped to [0,1] and quantized
// with round(v*255) on write.
void write_png_rgb(const std::string& path, const Image<float>& img);
void write_png_rgb8(const std::string& path, const Tensor<uint8_t>& img);  // [3,H,W]
void write_png_gray(const std::string& path, const Tensor<uint8_t>& img);  // [H,W]

Image<float> read_png_rgb(const std::string& path);
Tensor<uint8_t> read_png_gray(const std::string& path);

}  // namespace nightseg
