#pragma once

#include <filesystem>

#include "splatmesh/image.hpp"

namespace splatmesh {

// 8-bit PNG. Gray and gray+alpha load as 1 channel, everything else as RGB.
RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image<std::uint8_t>& image);

// Masks are stored as 1-bit grayscale PNG; any nonzero sample reads back as 1.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// Single-channel little-endian PFM ("Pf", scale -1.0), rows bottom to top.
FloatImage read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const FloatImage& image);

GrayImage to_gray(const RgbImage& rgb);

}  // namespace splatmesh
