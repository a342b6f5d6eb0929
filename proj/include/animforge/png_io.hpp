#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "animforge/image.hpp"

namespace animforge::png {

// 8-bit RGB PNG, fixed zlib settings so equal images encode to equal bytes.
std::vector<std::uint8_t> encode(const Image& image);
Image decode(std::span<const std::uint8_t> bytes);

// Grayscale 0/255 PNG for segmentation masks on the wire.
std::vector<std::uint8_t> encode_mask(const SegmentationMask& mask);
SegmentationMask decode_mask(std::span<const std::uint8_t> bytes, std::string label);

Image read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Image& image);

}  // namespace animforge::png
