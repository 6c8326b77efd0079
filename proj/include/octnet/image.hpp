#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "octnet/rng.hpp"
#include "octnet/tensor.hpp"

namespace octnet {

// Decoded 8-bit image, row-major, interleaved channels.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1, 3, or 4
  std::vector<uint8_t> data;
};

// Decodes a JPEG or PNG file (sniffed by magic bytes, not extension).
ImageU8 decode_image_file(const std::string& path);

void write_png_gray(const std::string& path, int width, int height, const std::vector<uint8_t>& pixels);
void write_jpeg_gray(const std::string& path, int width, int height, const std::vector<uint8_t>& pixels,
                     int quality = 92);

// [H,W,3] float tensor in [0,1]: /255, grayscale replicated, alpha dropped.
Tensor<float> to_float_tensor(const ImageU8& img);

// Bilinear resize with half-pixel sample centers; exact identity when the
// target equals the source size.
Tensor<float> resize_bilinear(const Tensor<float>& img, int out_h, int out_w);

// decode -> float [0,1] -> replicate channels -> resize to target.
Tensor<float> load_image(const std::string& path, int target_h = 150, int target_w = 150);

struct AugmentConfig {
  bool enabled = true;
  double rotation_deg = 15.0;  // sampled in [-r, r]
  double shift_frac = 0.10;    // of width/height, sampled per axis
  double shear_deg = 10.0;     // sampled in [-s, s]
  double flip_prob = 0.5;      // horizontal flip

  void validate() const {
    if (rotation_deg < 0 || shift_frac < 0 || shear_deg < 0) {
      throw ParamError("augmentation ranges must be >= 0");
    }
    if (flip_prob < 0 || flip_prob > 1) {
      throw ParamError("flip probability must be in [0,1], got " + std::to_string(flip_prob));
    }
  }
};

struct AugmentParams {
  double theta_deg = 0.0;
  double dx = 0.0;  // fraction of width
  double dy = 0.0;  // fraction of height
  double shear_deg = 0.0;
  bool flip = false;
};

AugmentParams sample_augment(const AugmentConfig& cfg, Rng& rng);

// Affine warp about the image center (flip, then shear, then rotation, then
// shift), inverse-mapped with bilinear sampling and zero fill outside bounds.
Tensor<float> apply_augment(const Tensor<float>& img, const AugmentParams& params);

// Deterministic augmentation: params drawn from Rng(seed).
Tensor<float> augment(const Tensor<float>& img, const AugmentConfig& cfg, uint64_t seed);

}  // namespace octnet
