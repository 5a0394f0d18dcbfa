#include "patchdepth/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchdepth/rng.hpp"

namespace patchdepth {

GradientMap gradient_map(const Image& img) {
  img.validate();
  if (img.width < 3 || img.height < 3) {
    throw ValidationError("gradient_map: need at least 3x3 pixels, got " +
                          std::to_string(img.width) + "x" +
                          std::to_string(img.height));
  }
  const int w = img.width, h = img.height;
  GradientMap g;
  g.width = w;
  g.height = h;
  g.gx.resize(static_cast<std::size_t>(w) * h);
  g.gy.resize(g.gx.size());
  g.magnitude.resize(g.gx.size());

  // luminance once, then differences
  std::vector<double> lum(g.gx.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      lum[g.index(x, y)] = img.luminance(x, y);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = g.index(x, y);
      double dx, dy;
      if (x == 0) {
        dx = lum[g.index(1, y)] - lum[g.index(0, y)];
      } else if (x == w - 1) {
        dx = lum[g.index(w - 1, y)] - lum[g.index(w - 2, y)];
      } else {
        dx = 0.5 * (lum[g.index(x + 1, y)] - lum[g.index(x - 1, y)]);
      }
      if (y == 0) {
        dy = lum[g.index(x, 1)] - lum[g.index(x, 0)];
      } else if (y == h - 1) {
        dy = lum[g.index(x, h - 1)] - lum[g.index(x, h - 2)];
      } else {
        dy = 0.5 * (lum[g.index(x, y + 1)] - lum[g.index(x, y - 1)]);
      }
      g.gx[i] = dx;
      g.gy[i] = dy;
      g.magnitude[i] = std::hypot(dx, dy);
    }
  }
  return g;
}

void KeypointParams::validate() const {
  if (count < 1) throw ValidationError("keypoint count must be >= 1");
  if (block_size < 1) throw ValidationError("block size must be >= 1");
  if (margin < 0) throw ValidationError("margin must be >= 0");
  if (!(grad_threshold >= 0.0) || !std::isfinite(grad_threshold)) {
    throw ValidationError("gradient threshold must be finite and >= 0");
  }
}

KeypointSet select_keypoints(const GradientMap& grad,
                             const KeypointParams& params,
                             std::uint64_t seed) {
  params.validate();
  const int w = grad.width, h = grad.height;
  const int m = params.margin;
  const int iw = w - 2 * m, ih = h - 2 * m;
  if (iw <= 0 || ih <= 0 ||
      static_cast<long long>(iw) * ih < params.count) {
    throw CapacityError(
        "select_keypoints: interior " + std::to_string(iw) + "x" +
        std::to_string(ih) + " cannot hold " + std::to_string(params.count) +
        " points");
  }

  KeypointSet out;
  out.seed = seed;
  out.points.reserve(params.count);
  std::vector<std::uint8_t> taken(static_cast<std::size_t>(w) * h, 0);

  // Stage one: per-cell gradient maxima. Cells tile the interior row-major;
  // the last cell in a row or column may be narrower.
  std::vector<double> cell;
  for (int cy = m; cy < h - m; cy += params.block_size) {
    const int y1 = std::min(cy + params.block_size, h - m);
    for (int cx = m; cx < w - m; cx += params.block_size) {
      const int x1 = std::min(cx + params.block_size, w - m);
      cell.clear();
      double best = -1.0;
      int bx = -1, by = -1;
      for (int y = cy; y < y1; ++y) {
        for (int x = cx; x < x1; ++x) {
          const double mag = grad.magnitude[grad.index(x, y)];
          cell.push_back(mag);
          if (mag > best) {  // strict, so ties keep the first in scan order
            best = mag;
            bx = x;
            by = y;
          }
        }
      }
      // Upper median: element count/2 of the sorted cell. Strictly above
      // median + threshold keeps flat cells (all equal values) out even at
      // threshold zero.
      auto mid = cell.begin() + cell.size() / 2;
      std::nth_element(cell.begin(), mid, cell.end());
      if (best > *mid + params.grad_threshold) {
        if (static_cast<int>(out.points.size()) < params.count) {
          out.points.push_back({bx, by, KeypointOrigin::kGradient});
          taken[grad.index(bx, by)] = 1;
        }
      }
    }
  }

  // Stage two: seeded uniform fill over the interior, skipping occupied
  // pixels, until the budget is exact.
  SplitMix64 rng(seed);
  while (static_cast<int>(out.points.size()) < params.count) {
    const int x = m + static_cast<int>(rng.next_below(iw));
    const int y = m + static_cast<int>(rng.next_below(ih));
    auto& slot = taken[grad.index(x, y)];
    if (slot) continue;
    slot = 1;
    out.points.push_back({x, y, KeypointOrigin::kRandom});
  }
  return out;
}

}  // namespace patchdepth
