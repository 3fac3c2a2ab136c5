#pragma once

#include <filesystem>

#include "spectrapad/spectral_data.hpp"

namespace spectrapad {

/// Reads an 8- or 16-bit grayscale PGM (P5) or PNG and scales to [0,1].
BandImage read_image(const std::filesystem::path& path);

/// 16-bit binary PGM; pixels are clamped to [0,1] and rounded to 1/65535.
void write_pgm16(const std::filesystem::path& path, const BandImage& image);

/// 16-bit grayscale PNG with the same quantization as write_pgm16.
void write_png16(const std::filesystem::path& path, const BandImage& image);

}  // namespace spectrapad
