#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peddet/bbox.hpp"
#include "peddet/tensor.hpp"

namespace peddet {

/// Interleaved 8-bit RGB raster.
struct ImageU8 {
  int w = 0;
  int h = 0;
  std::vector<uint8_t> rgb;

  uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (y * w + x); }
  const uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (y * w + x);
  }
};

/// Binary PPM (P6), 8-bit maxval only.
ImageU8 read_ppm(const std::string& path);
void write_ppm(const ImageU8& img, const std::string& path);

/// (1, 3, h, w) float tensor scaled by 1/255.
TensorF image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const TensorF& t);

ImageU8 resize_bilinear(const ImageU8& img, int out_w, int out_h);

/// Draws a box outline (normalized coordinates) of the given thickness.
void draw_box_outline(ImageU8& img, const BBox& box, int thickness,
                      uint8_t r, uint8_t g, uint8_t b);

}  // namespace peddet
