#pragma once

#include <utility>
#include <vector>

#include "patchdepth/types.hpp"

namespace patchdepth {

// Dense segmentation result. Labels are contiguous ids in [0, num_segments),
// assigned in row-major order of first appearance, and every segment is a
// 4-connected pixel set.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  int num_segments = 0;

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  int at(int x, int y) const { return labels[index(x, y)]; }

  void validate() const;
};

struct Superpixel {
  int id = -1;
  std::vector<std::pair<int, int>> pixels;  // (x, y), row-major scan order

  int area() const { return static_cast<int>(pixels.size()); }
};

struct FelzParams {
  // Color deltas live in [0, 1]; the classic 8-bit defaults divide through
  // by 255.
  double k = 300.0 / 255.0;
  double sigma = 0.8;
  int min_size = 100;

  void validate() const;
};

// Graph-based segmentation: Gaussian pre-smooth, 8-neighbor RGB edges sorted
// ascending, region merge under the adaptive threshold k/|C|, then a
// small-region sweep. A final pass splits into 4-connected components and
// folds fragments below min_size into their most similar neighbor, so the
// output satisfies the LabelMap contract. Throws ValidationError on an empty
// image.
LabelMap felzenszwalb_segment(const Image& img, const FelzParams& params);

// Segments with strictly more than min_area pixels, largest first (ties by
// ascending id).
std::vector<Superpixel> large_regions(const LabelMap& labels, int min_area);

}  // namespace patchdepth
