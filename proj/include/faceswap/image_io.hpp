#ifndef FACESWAP_IMAGE_IO_HPP
#define FACESWAP_IMAGE_IO_HPP

#include <string>

#include "faceswap/tensor.hpp"

namespace faceswap {

// Binary PPM (P6) for {3,H,W} images in [-1,1]; binary PGM (P5) for
// {1,H,W} masks in [0,1]. 8 bits per sample, lossless for masks and
// uniformly quantized for images.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Tensor& mask);
Tensor read_pgm(const std::string& path);

}  // namespace faceswap

#endif
