#pragma once

#include <string>

#include "ppwarp/warp.hpp"

namespace ppw {

// Reads an 8-bit PNG into a planar float image with intensities in [0, 1]
// (sample / 255). Grayscale stays single-channel; palette, 16-bit, and
// alpha inputs are reduced to plain 8-bit gray or RGB on load. A missing or
// unreadable file raises IoError; a file that is not a valid PNG raises
// ValidationError.
Image read_png(const std::string& path);

// Writes a 1- or 3-channel image as 8-bit grayscale or RGB PNG. Intensities
// are mapped with round-half-up: sample = floor(v * 255 + 0.5), clamped to
// [0, 255]. Fixed encoder settings keep the byte stream reproducible.
void write_png(const std::string& path, const Image& img);

}  // namespace ppw
