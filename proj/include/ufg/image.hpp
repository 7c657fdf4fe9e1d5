#pragma once

#include <string>

#include "ufg/tensor.hpp"

namespace ufg {

// Images are Tensors of shape {C,H,W}, C in {1,3}, intensities in [0,1].
using ImageTensor = Tensor;

bool is_image_shape(const Tensor& t);
void require_image(const Tensor& t, const char* op);

// 8-bit PNG. Load divides by 255; save multiplies by 255, round half up.
ImageTensor load_png(const std::string& path);
void save_png(const std::string& path, const ImageTensor& img);

ImageTensor clamp01_image(const ImageTensor& img);

// Separable Gaussian blur with replicate padding, kernel radius ceil(3*sigma).
Tensor gaussian_blur(const Tensor& img, double sigma);

}  // namespace ufg
