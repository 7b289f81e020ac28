#ifndef POLARSEG_PGM_HPP
#define POLARSEG_PGM_HPP

#include <string>

#include "polarseg/image.hpp"

namespace polarseg {

// 16-bit big-endian P5. Pixel values are mapped affinely so the image range
// fills [0, 65535]; the inverse mapping (v = raw * scale + offset) is written
// to `sidecar_path` as key=value lines. Constant images map to raw 0.
void write_pgm16(const std::string& path, const std::string& sidecar_path,
                 const Image2D& img);

// 8-bit P5 with foreground 255, background 0.
void write_pgm8(const std::string& path, const Mask2D& mask);

// Reads an 8-bit or 16-bit P5 file back into floats (raw values, unmapped).
Image2D read_pgm(const std::string& path);

}  // namespace polarseg

#endif  // POLARSEG_PGM_HPP
