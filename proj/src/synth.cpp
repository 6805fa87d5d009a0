#include "peddet/synth.hpp"

#include <algorithm>
#include <cmath>

#include "peddet/rng.hpp"

namespace peddet {

namespace {

// Coarse dark blocks plus per-pixel noise: enough texture that the
// detector cannot key on a flat background value, while keeping the
// background well separated from the bright rectangles.
ImageU8 noise_background(int size, Rng& rng) {
  ImageU8 img;
  img.w = img.h = size;
  img.rgb.resize(static_cast<size_t>(size) * size * 3);
  const int block = 16;
  const int nb = (size + block - 1) / block;
  std::vector<float> levels(static_cast<size_t>(nb) * nb);
  for (auto& v : levels) v = static_cast<float>(rng.uniform(0.05, 0.22));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const float base = levels[static_cast<size_t>(y / block) * nb + x / block];
      const float v = std::clamp(
          base + static_cast<float>(rng.uniform(-0.05, 0.05)), 0.0f, 1.0f);
      const auto byte = static_cast<uint8_t>(std::lround(v * 255.0f));
      uint8_t* p = img.pixel(x, y);
      p[0] = p[1] = p[2] = byte;
    }
  }
  return img;
}

void fill_rect(ImageU8& img, const BBox& box, float brightness, Rng& rng) {
  const int x0 = std::clamp(static_cast<int>(box.x_min() * img.w), 0, img.w - 1);
  const int x1 = std::clamp(static_cast<int>(box.x_max() * img.w), 0, img.w - 1);
  const int y0 = std::clamp(static_cast<int>(box.y_min() * img.h), 0, img.h - 1);
  const int y1 = std::clamp(static_cast<int>(box.y_max() * img.h), 0, img.h - 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const float v = std::clamp(
          brightness + static_cast<float>(rng.uniform(-0.02, 0.02)), 0.0f, 1.0f);
      const auto byte = static_cast<uint8_t>(std::lround(v * 255.0f));
      uint8_t* p = img.pixel(x, y);
      p[0] = p[1] = p[2] = byte;
    }
  }
}

}  // namespace

std::vector<SynthScene> make_synthetic_scenes(const SynthConfig& cfg,
                                              uint64_t seed) {
  Rng rng(seed);
  std::vector<SynthScene> scenes;
  scenes.reserve(static_cast<size_t>(cfg.count));
  for (int s = 0; s < cfg.count; ++s) {
    SynthScene scene;
    scene.image = noise_background(cfg.size, rng);
    const int n_rects = rng.uniform_int(cfg.min_rects, cfg.max_rects);
    for (int r = 0; r < n_rects; ++r) {
      BBox box;
      bool placed = false;
      for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
        const double a = rng.uniform(cfg.sqrt_area_lo, cfg.sqrt_area_hi);
        const double aspect = std::exp(rng.uniform(-0.3, 0.3));
        double w = std::min(a * std::sqrt(aspect), 0.96);
        double h = std::min(a * a / w, 0.96);
        w = a * a / h;  // keep w*h = a^2 after clamping
        box.w = static_cast<float>(w);
        box.h = static_cast<float>(h);
        box.cx = static_cast<float>(rng.uniform(w / 2, 1.0 - w / 2));
        box.cy = static_cast<float>(rng.uniform(h / 2, 1.0 - h / 2));
        placed = true;
        for (const BBox& other : scene.boxes) {
          if (iou(box, other) > cfg.max_overlap_iou) {
            placed = false;
            break;
          }
        }
      }
      if (!placed) continue;  // crowded scene, settle for fewer rectangles
      fill_rect(scene.image, box, static_cast<float>(rng.uniform(0.8, 1.0)),
                rng);
      scene.boxes.push_back(box);
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace peddet
