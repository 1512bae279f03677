#pragma once

#include "nucgrade/core_types.hpp"

#include <string>

namespace nucgrade {

// Lossless PNG I/O for the dataset directory format. All functions throw
// DataError on unreadable or malformed files.

ImagePatch read_rgb_png(const std::string& path);
void write_rgb_png(const std::string& path, const ImagePatch& image);

// 16-bit single-channel (instance ids).
Plane<std::uint16_t> read_gray16_png(const std::string& path);
void write_gray16_png(const std::string& path, const Plane<std::uint16_t>& plane);

// 8-bit single-channel (class codes).
Plane<std::uint8_t> read_gray8_png(const std::string& path);
void write_gray8_png(const std::string& path, const Plane<std::uint8_t>& plane);

}  // namespace nucgrade
