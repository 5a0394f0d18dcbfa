#include "patchdepth/superpixels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace patchdepth {

void LabelMap::validate() const {
  if (width <= 0 || height <= 0) {
    throw ValidationError("label map has empty extent");
  }
  if (labels.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("label buffer size does not match dimensions");
  }
  for (int l : labels) {
    if (l < 0 || l >= num_segments) {
      throw ValidationError("label " + std::to_string(l) +
                            " outside [0, " + std::to_string(num_segments) +
                            ")");
    }
  }
}

void FelzParams::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw ValidationError("felzenszwalb k must be positive");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("felzenszwalb sigma must be >= 0");
  }
  if (min_size < 1) {
    throw ValidationError("felzenszwalb min_size must be >= 1");
  }
}

namespace {

// Replicate-border separable Gaussian. sigma == 0 keeps the input untouched.
Image gaussian_smooth(const Image& img, double sigma) {
  if (sigma < 1e-12) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& v : kernel) v /= sum;

  const int w = img.width, h = img.height, c = img.channels;
  Image tmp(w, h, c), out(w, h, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xi = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + radius] * img.at(xi, y, ch);
        }
        tmp.at(x, y, ch) = acc;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yi = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + radius] * tmp.at(x, yi, ch);
        }
        out.at(x, y, ch) = acc;
      }
    }
  }
  return out;
}

double color_dist(const Image& img, std::size_t a, std::size_t b) {
  const int c = img.channels;
  double d2 = 0.0;
  for (int ch = 0; ch < c; ++ch) {
    const double d = img.data[a * c + ch] - img.data[b * c + ch];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

struct Edge {
  double w;
  int a, b;
};

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  int join(int a, int b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }
  int size(int a) const { return size_[a]; }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<int> size_;
};

}  // namespace

LabelMap felzenszwalb_segment(const Image& img, const FelzParams& params) {
  params.validate();
  img.validate();
  const int w = img.width, h = img.height;
  const Image smooth = gaussian_smooth(img, params.sigma);
  const std::size_t n = static_cast<std::size_t>(w) * h;

  // 8-neighborhood edges, each pair once.
  std::vector<Edge> edges;
  edges.reserve(4 * n);
  auto idx = [w](int x, int y) {
    return static_cast<std::size_t>(y) * w + x;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t a = idx(x, y);
      if (x + 1 < w) {
        edges.push_back({color_dist(smooth, a, idx(x + 1, y)),
                         static_cast<int>(a), static_cast<int>(idx(x + 1, y))});
      }
      if (y + 1 < h) {
        edges.push_back({color_dist(smooth, a, idx(x, y + 1)),
                         static_cast<int>(a), static_cast<int>(idx(x, y + 1))});
      }
      if (x + 1 < w && y + 1 < h) {
        edges.push_back({color_dist(smooth, a, idx(x + 1, y + 1)),
                         static_cast<int>(a),
                         static_cast<int>(idx(x + 1, y + 1))});
      }
      if (x + 1 < w && y > 0) {
        edges.push_back({color_dist(smooth, a, idx(x + 1, y - 1)),
                         static_cast<int>(a),
                         static_cast<int>(idx(x + 1, y - 1))});
      }
    }
  }
  // Ties broken by construction order so the segmentation is a pure
  // function of the input.
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.w < b.w; });

  DisjointSet ds(static_cast<int>(n));
  std::vector<double> threshold(n, params.k);  // k / |C| with |C| = 1
  for (const Edge& e : edges) {
    const int ra = ds.find(e.a);
    const int rb = ds.find(e.b);
    if (ra == rb) continue;
    if (e.w <= threshold[ra] && e.w <= threshold[rb]) {
      const int r = ds.join(ra, rb);
      threshold[r] = e.w + params.k / ds.size(r);
    }
  }
  // Small-region sweep in the same edge order.
  for (const Edge& e : edges) {
    const int ra = ds.find(e.a);
    const int rb = ds.find(e.b);
    if (ra == rb) continue;
    if (ds.size(ra) < params.min_size || ds.size(rb) < params.min_size) {
      ds.join(ra, rb);
    }
  }

  // The merge graph was 8-connected, so a root's pixel set may fall apart
  // under 4-connectivity. Relabel into 4-connected components first.
  LabelMap out;
  out.width = w;
  out.height = h;
  out.labels.assign(n, -1);
  std::vector<int> stack;
  int next_label = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (out.labels[start] != -1) continue;
    const int root = ds.find(static_cast<int>(start));
    const int label = next_label++;
    out.labels[start] = label;
    stack.assign(1, static_cast<int>(start));
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      const int nb[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1,
                         y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
      for (int q : nb) {
        if (q < 0 || out.labels[q] != -1) continue;
        if (ds.find(q) != root) continue;
        out.labels[q] = label;
        stack.push_back(q);
      }
    }
  }
  out.num_segments = next_label;

  // Components that became small in the split are folded into the
  // 4-adjacent neighbor with the closest mean color, one at a time so each
  // merge sees up-to-date means.
  const int c = img.channels;
  for (;;) {
    std::vector<int> area(out.num_segments, 0);
    std::vector<double> mean(static_cast<std::size_t>(out.num_segments) * c,
                             0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int l = out.labels[i];
      ++area[l];
      for (int ch = 0; ch < c; ++ch) {
        mean[static_cast<std::size_t>(l) * c + ch] += smooth.data[i * c + ch];
      }
    }
    for (int l = 0; l < out.num_segments; ++l) {
      for (int ch = 0; ch < c; ++ch) {
        mean[static_cast<std::size_t>(l) * c + ch] /= area[l];
      }
    }

    int victim = -1;
    for (int l = 0; l < out.num_segments; ++l) {
      if (area[l] < params.min_size &&
          (victim == -1 || area[l] < area[victim])) {
        victim = l;
      }
    }
    if (victim == -1 || out.num_segments == 1) break;

    // closest 4-adjacent neighbor by mean color, ties to the smaller id
    double best_d = std::numeric_limits<double>::infinity();
    int best_l = -1;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (out.at(x, y) != victim) continue;
        const int p = static_cast<int>(idx(x, y));
        const int nb[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1,
                           y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
        for (int q : nb) {
          if (q < 0) continue;
          const int l = out.labels[q];
          if (l == victim) continue;
          double d2 = 0.0;
          for (int ch = 0; ch < c; ++ch) {
            const double d = mean[static_cast<std::size_t>(victim) * c + ch] -
                             mean[static_cast<std::size_t>(l) * c + ch];
            d2 += d * d;
          }
          if (d2 < best_d || (d2 == best_d && l < best_l)) {
            best_d = d2;
            best_l = l;
          }
        }
      }
    }
    // victim has a neighbor unless it is the whole image, handled above
    for (std::size_t i = 0; i < n; ++i) {
      if (out.labels[i] == victim) out.labels[i] = best_l;
    }
    // compact ids, preserving first-appearance order
    std::vector<int> remap(out.num_segments, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int& l = out.labels[i];
      if (remap[l] == -1) remap[l] = next++;
      l = remap[l];
    }
    out.num_segments = next;
  }

  // Normalize ids to row-major first appearance (the fragment folding may
  // have disturbed it; cheap and makes outputs canonical).
  {
    std::vector<int> remap(out.num_segments, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int& l = out.labels[i];
      if (remap[l] == -1) remap[l] = next++;
      l = remap[l];
    }
    out.num_segments = next;
  }
  return out;
}

std::vector<Superpixel> large_regions(const LabelMap& labels, int min_area) {
  labels.validate();
  if (min_area < 0) throw ValidationError("min_area must be >= 0");
  std::vector<Superpixel> regions(labels.num_segments);
  for (int l = 0; l < labels.num_segments; ++l) regions[l].id = l;
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      regions[labels.at(x, y)].pixels.push_back({x, y});
    }
  }
  std::erase_if(regions, [min_area](const Superpixel& s) {
    return s.area() <= min_area;
  });
  std::sort(regions.begin(), regions.end(),
            [](const Superpixel& a, const Superpixel& b) {
              if (a.area() != b.area()) return a.area() > b.area();
              return a.id < b.id;
            });
  return regions;
}

}  // namespace patchdepth
