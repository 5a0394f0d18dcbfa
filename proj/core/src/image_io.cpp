#include "patchdepth/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "patchdepth/errors.hpp"
#include "patchdepth/rng.hpp"

namespace patchdepth {

namespace {

std::string lower_ext(const std::string& path) {
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw ValidationError("cannot open '" + path + "'");
  }
  return f;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError("'" + path + "': " + what);
}

// ---- PNG ----

// Raw 16-bit rows; image / label decoding shares this.
struct PngPixels {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> data;  // interleaved, one entry per sample
};

PngPixels read_png(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, f.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0) {
    fail(path, "not a PNG file");
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                             nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "png decoder setup failed");
  }

  PngPixels out;
  std::vector<png_bytep> rows;
  std::vector<png_byte> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "corrupt PNG data");
  }

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_expand(png);        // palette to rgb, gray < 8 bit to 8 bit
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) {
    rows[static_cast<std::size_t>(y)] = raw.data() + rowbytes * y;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t samples =
      static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.data.resize(samples);
  if (out.bit_depth == 16) {
    // PNG stores 16-bit samples big-endian
    for (std::size_t i = 0; i < samples; ++i) {
      out.data[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) |
                                               raw[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < samples; ++i) out.data[i] = raw[i];
  }
  return out;
}

void write_png(const std::string& path, int width, int height, int channels,
               int bit_depth, const std::vector<std::uint16_t>& data) {
  FilePtr f = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                              nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(path, "png encoder setup failed");
  }

  std::vector<png_bytep> rows;
  std::vector<png_byte> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "png write failed");
  }

  png_init_io(png, f.get());
  const int color =
      channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t samples =
      static_cast<std::size_t>(width) * height * channels;
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  raw.resize(samples * bytes_per_sample);
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < samples; ++i) {
      raw[2 * i] = static_cast<png_byte>(data[i] >> 8);
      raw[2 * i + 1] = static_cast<png_byte>(data[i] & 0xff);
    }
  } else {
    for (std::size_t i = 0; i < samples; ++i) {
      raw[i] = static_cast<png_byte>(data[i]);
    }
  }
  const std::size_t rowbytes =
      static_cast<std::size_t>(width) * channels * bytes_per_sample;
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] = raw.data() + rowbytes * y;
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- PPM / PGM ----

int pnm_token(std::FILE* f, const std::string& path) {
  // whitespace-separated decimal, '#' comments to end of line
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (std::isspace(c)) {
      c = std::fgetc(f);
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) fail(path, "malformed header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > 1 << 30) fail(path, "header value out of range");
    c = std::fgetc(f);
  }
  return value;
}

Image read_pnm(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  const int magic0 = std::fgetc(f.get());
  const int magic1 = std::fgetc(f.get());
  if (magic0 != 'P' || (magic1 != '5' && magic1 != '6')) {
    fail(path, "only binary P5/P6 maps are supported");
  }
  const int channels = magic1 == '6' ? 3 : 1;
  const int width = pnm_token(f.get(), path);
  const int height = pnm_token(f.get(), path);
  const int maxval = pnm_token(f.get(), path);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    fail(path, "bad dimensions or sample range");
  }
  // single whitespace after maxval, already consumed by the tokenizer

  Image img(width, height, channels);
  const std::size_t samples = img.data.size();
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(samples * bytes_per_sample);
  if (std::fread(raw.data(), 1, raw.size(), f.get()) != raw.size()) {
    fail(path, "truncated pixel data");
  }
  if (maxval > 255) {
    // netpbm stores 16-bit samples big-endian
    for (std::size_t i = 0; i < samples; ++i) {
      img.data[i] = ((raw[2 * i] << 8) | raw[2 * i + 1]) /
                    static_cast<double>(maxval);
    }
  } else {
    for (std::size_t i = 0; i < samples; ++i) {
      img.data[i] = raw[i] / static_cast<double>(maxval);
    }
  }
  return img;
}

void write_pnm(const std::string& path, const Image& img, int channels) {
  if (img.channels != channels) {
    fail(path, channels == 1 ? "pgm needs a 1-channel image"
                             : "ppm needs a 3-channel image");
  }
  FilePtr f = open_file(path, "wb");
  std::fprintf(f.get(), "P%c\n%d %d\n255\n", channels == 1 ? '5' : '6',
               img.width, img.height);
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(
        std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  }
  if (std::fwrite(raw.data(), 1, raw.size(), f.get()) != raw.size()) {
    fail(path, "short write");
  }
}

// turbo-style anchors, sampled across the ramp
constexpr std::array<std::array<double, 3>, 9> kRampAnchors = {{
    {0.190, 0.072, 0.232},
    {0.275, 0.408, 0.882},
    {0.212, 0.718, 0.961},
    {0.087, 0.940, 0.706},
    {0.473, 0.999, 0.365},
    {0.830, 0.884, 0.216},
    {0.996, 0.620, 0.144},
    {0.889, 0.275, 0.077},
    {0.480, 0.016, 0.011},
}};

std::array<double, 3> ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0) * (kRampAnchors.size() - 1);
  const std::size_t lo = std::min(static_cast<std::size_t>(t),
                                  kRampAnchors.size() - 2);
  const double f = t - static_cast<double>(lo);
  std::array<double, 3> c{};
  for (int i = 0; i < 3; ++i) {
    c[static_cast<std::size_t>(i)] =
        (1.0 - f) * kRampAnchors[lo][static_cast<std::size_t>(i)] +
        f * kRampAnchors[lo + 1][static_cast<std::size_t>(i)];
  }
  return c;
}

Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, 0);
    }
  }
  return out;
}

void draw_cross(Image& img, int cx, int cy, const std::array<double, 3>& rgb) {
  for (int d = -2; d <= 2; ++d) {
    for (auto [x, y] : {std::pair{cx + d, cy}, std::pair{cx, cy + d}}) {
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = rgb[static_cast<std::size_t>(c)];
      }
    }
  }
}

}  // namespace

Image read_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "ppm" || ext == "pgm") return read_pnm(path);
  if (ext != "png") fail(path, "unsupported image format");

  const PngPixels px = read_png(path);
  if (px.channels != 1 && px.channels != 3) {
    fail(path, "expected grayscale or rgb after alpha stripping");
  }
  Image img(px.width, px.height, px.channels);
  const double maxval = px.bit_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t i = 0; i < px.data.size(); ++i) {
    img.data[i] = px.data[i] / maxval;
  }
  return img;
}

void write_image(const std::string& path, const Image& img) {
  img.validate();
  const std::string ext = lower_ext(path);
  if (ext == "ppm") return write_pnm(path, img, 3);
  if (ext == "pgm") return write_pnm(path, img, 1);
  if (ext != "png") fail(path, "unsupported image format");

  std::vector<std::uint16_t> data(img.data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<std::uint16_t>(
        std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  }
  write_png(path, img.width, img.height, img.channels, 8, data);
}

DepthMap read_depth_pfm(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  char magic[3] = {};
  if (std::fscanf(f.get(), "%2s", magic) != 1 ||
      std::strcmp(magic, "Pf") != 0) {
    fail(path, "not a grayscale PFM");
  }
  int width = 0, height = 0;
  double scale = 0.0;
  if (std::fscanf(f.get(), "%d %d %lf", &width, &height, &scale) != 3 ||
      width < 1 || height < 1 || scale >= 0.0) {
    fail(path, "bad PFM header (positive-scale big-endian is unsupported)");
  }
  if (std::fgetc(f.get()) != '\n') fail(path, "bad PFM header terminator");

  static_assert(std::endian::native == std::endian::little,
                "PFM loader assumes a little-endian host");
  DepthMap out(width, height);
  std::vector<float> row(static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {  // PFM rows run bottom-up
    if (std::fread(row.data(), sizeof(float), row.size(), f.get()) !=
        row.size()) {
      fail(path, "truncated pixel data");
    }
    for (int x = 0; x < width; ++x) {
      const double d = row[static_cast<std::size_t>(x)];
      if (std::isfinite(d) && d > 0.0) {
        out.data[out.index(x, y)] = d;
      } else {
        out.set_valid(x, y, false);
        out.data[out.index(x, y)] = 1.0;  // placeholder behind the mask
      }
    }
  }
  return out;
}

void write_depth_pfm(const std::string& path, const DepthMap& depth) {
  depth.validate();
  FilePtr f = open_file(path, "wb");
  std::fprintf(f.get(), "Pf\n%d %d\n-1.0\n", depth.width, depth.height);
  std::vector<float> row(static_cast<std::size_t>(depth.width));
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      row[static_cast<std::size_t>(x)] =
          depth.valid_at(x, y)
              ? static_cast<float>(depth.data[depth.index(x, y)])
              : 0.0f;
    }
    if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) !=
        row.size()) {
      fail(path, "short write");
    }
  }
}

LabelMap read_labels_png(const std::string& path) {
  const PngPixels px = read_png(path);
  if (px.channels != 1) fail(path, "label maps are grayscale");
  LabelMap out;
  out.width = px.width;
  out.height = px.height;
  out.labels.resize(px.data.size());
  int max_id = -1;
  for (std::size_t i = 0; i < px.data.size(); ++i) {
    out.labels[i] = px.data[i];
    max_id = std::max(max_id, out.labels[i]);
  }
  out.num_segments = max_id + 1;
  out.validate();
  return out;
}

void write_labels_png(const std::string& path, const LabelMap& labels) {
  labels.validate();
  if (labels.num_segments > 65536) {
    fail(path, "more segment ids than 16-bit samples can hold");
  }
  std::vector<std::uint16_t> data(labels.labels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<std::uint16_t>(labels.labels[i]);
  }
  write_png(path, labels.width, labels.height, 1, 16, data);
}

Image depth_preview(const DepthMap& depth, double dmin, double dmax) {
  if (!(dmax > dmin)) throw ValidationError("preview range is empty");
  Image out(depth.width, depth.height, 3);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.valid_at(x, y)) continue;  // leave invalid pixels black
      const double t =
          (depth.data[depth.index(x, y)] - dmin) / (dmax - dmin);
      const std::array<double, 3> c = ramp_color(t);
      for (int ch = 0; ch < 3; ++ch) {
        out.at(x, y, ch) = c[static_cast<std::size_t>(ch)];
      }
    }
  }
  return out;
}

Image depth_preview(const DepthMap& depth) {
  double dmin = 0.0, dmax = 0.0;
  bool any = false;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.valid_at(x, y)) continue;
      const double d = depth.data[depth.index(x, y)];
      dmin = any ? std::min(dmin, d) : d;
      dmax = any ? std::max(dmax, d) : d;
      any = true;
    }
  }
  if (!any || dmax == dmin) {
    dmin -= 0.5;
    dmax += 0.5;
  }
  return depth_preview(depth, dmin, dmax);
}

Image keypoint_overlay(const Image& img, const KeypointSet& keypoints) {
  Image out = to_rgb(img);
  constexpr std::array<double, 3> kGradientColor = {0.95, 0.12, 0.12};
  constexpr std::array<double, 3> kRandomColor = {0.10, 0.85, 0.20};
  for (const Keypoint& p : keypoints.points) {
    draw_cross(out, p.x, p.y,
               p.origin == KeypointOrigin::kGradient ? kGradientColor
                                                     : kRandomColor);
  }
  return out;
}

Image region_overlay(const Image& img, const LabelMap& labels) {
  labels.validate();
  if (img.width != labels.width || img.height != labels.height) {
    throw ValidationError("overlay inputs must match in size");
  }
  Image out = to_rgb(img);
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      const int id = labels.labels[labels.index(x, y)];
      const bool boundary =
          (x + 1 < labels.width &&
           labels.labels[labels.index(x + 1, y)] != id) ||
          (y + 1 < labels.height &&
           labels.labels[labels.index(x, y + 1)] != id);
      if (boundary) {
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = 0.0;
        continue;
      }
      SplitMix64 hash(0x7065ab1e ^ static_cast<std::uint64_t>(id));
      for (int c = 0; c < 3; ++c) {
        const double tint = 0.25 + 0.7 * hash.next_double();
        out.at(x, y, c) = 0.45 * out.at(x, y, c) + 0.55 * tint;
      }
    }
  }
  return out;
}

}  // namespace patchdepth
