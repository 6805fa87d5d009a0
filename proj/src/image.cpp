#include "peddet/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "peddet/error.hpp"

namespace peddet {

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += static_cast<char>(ch);
  }
  if (tok.empty()) throw ParseError("truncated PPM header in " + path);
  return tok;
}

int header_int(std::istream& in, const std::string& path) {
  const std::string tok = next_token(in, path);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw ParseError("bad PPM header value '" + tok + "' in " + path);
  }
}

}  // namespace

ImageU8 read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  if (next_token(in, path) != "P6") {
    throw ParseError("not a binary PPM (P6): " + path);
  }
  ImageU8 img;
  img.w = header_int(in, path);
  img.h = header_int(in, path);
  const int maxval = header_int(in, path);
  if (img.w < 1 || img.h < 1) throw ParseError("bad PPM extents in " + path);
  if (maxval != 255) {
    throw ParseError("unsupported PPM maxval " + std::to_string(maxval) +
                     " in " + path + " (only 255)");
  }
  img.rgb.resize(static_cast<size_t>(img.w) * img.h * 3);
  if (!in.read(reinterpret_cast<char*>(img.rgb.data()),
               static_cast<std::streamsize>(img.rgb.size()))) {
    throw ParseError("truncated PPM pixel data in " + path);
  }
  return img;
}

void write_ppm(const ImageU8& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw IoError("failed writing image: " + path);
}

TensorF image_to_tensor(const ImageU8& img) {
  TensorF t(1, 3, img.h, img.w);
  for (int c = 0; c < 3; ++c) {
    float* plane = t.plane(0, c);
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x) {
        plane[y * img.w + x] = img.rgb[3 * (y * img.w + x) + c] / 255.0f;
      }
    }
  }
  return t;
}

ImageU8 tensor_to_image(const TensorF& t) {
  if (t.n() != 1 || t.c() != 3) {
    throw ShapeError("tensor_to_image: want 1x3xHxW, got " + t.shape_string());
  }
  ImageU8 img;
  img.w = t.w();
  img.h = t.h();
  img.rgb.resize(static_cast<size_t>(img.w) * img.h * 3);
  for (int c = 0; c < 3; ++c) {
    const float* plane = t.plane(0, c);
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x) {
        const float v = std::clamp(plane[y * img.w + x], 0.0f, 1.0f);
        img.rgb[3 * (y * img.w + x) + c] =
            static_cast<uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return img;
}

ImageU8 resize_bilinear(const ImageU8& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ShapeError("resize: bad target extents");
  ImageU8 out;
  out.w = out_w;
  out.h = out_h;
  out.rgb.resize(static_cast<size_t>(out_w) * out_h * 3);
  const float sx = static_cast<float>(img.w) / out_w;
  const float sy = static_cast<float>(img.h) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const float fy = std::clamp((y + 0.5f) * sy - 0.5f, 0.0f,
                                static_cast<float>(img.h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.h - 1);
    const float wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const float fx = std::clamp((x + 0.5f) * sx - 0.5f, 0.0f,
                                  static_cast<float>(img.w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.w - 1);
      const float wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const float v00 = img.pixel(x0, y0)[c];
        const float v10 = img.pixel(x1, y0)[c];
        const float v01 = img.pixel(x0, y1)[c];
        const float v11 = img.pixel(x1, y1)[c];
        const float v = (1 - wy) * ((1 - wx) * v00 + wx * v10) +
                        wy * ((1 - wx) * v01 + wx * v11);
        out.pixel(x, y)[c] = static_cast<uint8_t>(std::lround(v));
      }
    }
  }
  return out;
}

void draw_box_outline(ImageU8& img, const BBox& box, int thickness,
                      uint8_t r, uint8_t g, uint8_t b) {
  const int x0 = std::clamp(static_cast<int>(std::lround(box.x_min() * img.w)), 0, img.w - 1);
  const int x1 = std::clamp(static_cast<int>(std::lround(box.x_max() * img.w)), 0, img.w - 1);
  const int y0 = std::clamp(static_cast<int>(std::lround(box.y_min() * img.h)), 0, img.h - 1);
  const int y1 = std::clamp(static_cast<int>(std::lround(box.y_max() * img.h)), 0, img.h - 1);
  auto paint = [&](int x, int y) {
    uint8_t* p = img.pixel(std::clamp(x, 0, img.w - 1), std::clamp(y, 0, img.h - 1));
    p[0] = r;
    p[1] = g;
    p[2] = b;
  };
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      paint(x, y0 + t);
      paint(x, y1 - t);
    }
    for (int y = y0; y <= y1; ++y) {
      paint(x0 + t, y);
      paint(x1 - t, y);
    }
  }
}

}  // namespace peddet
