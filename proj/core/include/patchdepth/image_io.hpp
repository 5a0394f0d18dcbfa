#pragma once

#include <cstdint>
#include <string>

#include "patchdepth/keypoints.hpp"
#include "patchdepth/superpixels.hpp"
#include "patchdepth/types.hpp"

namespace patchdepth {

// File formats are chosen by extension (case-insensitive): .png (8- or
// 16-bit, palette and alpha handled on load), .ppm / .pgm (binary, 8- or
// 16-bit). Samples normalize to [0, 1] on load. Failures throw
// ValidationError naming the path.
Image read_image(const std::string& path);

// Writes 8-bit output. PGM requires a 1-channel image, PPM a 3-channel one;
// PNG takes either. Values are clamped to [0, 1] and rounded.
void write_image(const std::string& path, const Image& img);

// Depth maps as little-endian 32-bit float grayscale PFM (negative-scale
// header, rows bottom-up). Invalid pixels store as 0; nonpositive or
// non-finite samples load as invalid.
DepthMap read_depth_pfm(const std::string& path);
void write_depth_pfm(const std::string& path, const DepthMap& depth);

// Label maps as 16-bit grayscale PNG of segment ids. Ids must fit 16 bits;
// loaded maps are validated against the LabelMap contract.
LabelMap read_labels_png(const std::string& path);
void write_labels_png(const std::string& path, const LabelMap& labels);

// Cosmetic renderings for CLI artifacts.
// Depth on a turbo-style color ramp over [dmin, dmax]; invalid pixels black.
Image depth_preview(const DepthMap& depth, double dmin, double dmax);
// Same with the range taken from the valid depths (full ramp if flat).
Image depth_preview(const DepthMap& depth);
// Crosses on the selected points: red for gradient picks, green for seeded
// fill.
Image keypoint_overlay(const Image& img, const KeypointSet& keypoints);
// Segments tinted with ids hashed to colors, boundaries darkened.
Image region_overlay(const Image& img, const LabelMap& labels);

}  // namespace patchdepth
