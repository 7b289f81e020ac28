#include "polarseg/pgm.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "polarseg/errors.hpp"

namespace polarseg {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

}  // namespace

void write_pgm16(const std::string& path, const std::string& sidecar_path,
                 const Image2D& img) {
  img.validate();

  float lo = img.data[0], hi = img.data[0];
  for (float v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // raw = (v - lo) / span * 65535; inverse v = raw * scale + offset.
  const double span = static_cast<double>(hi) - lo;
  const double scale = span > 0.0 ? span / 65535.0 : 0.0;
  const double offset = lo;

  auto f = open_out(path);
  f << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 2);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      std::uint16_t raw = 0;
      if (span > 0.0) {
        const double t = (img.at(r, c) - offset) / scale;
        raw = static_cast<std::uint16_t>(
            std::clamp(t + 0.5, 0.0, 65535.0));
      }
      row[static_cast<std::size_t>(c) * 2] =
          static_cast<unsigned char>(raw >> 8);
      row[static_cast<std::size_t>(c) * 2 + 1] =
          static_cast<unsigned char>(raw & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw IoError("short write: " + path);

  auto side = open_out(sidecar_path);
  std::ostringstream kv;
  kv.precision(17);
  kv << "format=pgm16be\n"
     << "height=" << img.height << "\n"
     << "width=" << img.width << "\n"
     << "scale=" << scale << "\n"
     << "offset=" << offset << "\n";
  side << kv.str();
  if (!side) throw IoError("short write: " + sidecar_path);
}

void write_pgm8(const std::string& path, const Mask2D& mask) {
  mask.validate();
  auto f = open_out(path);
  f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(mask.width));
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c)
      row[static_cast<std::size_t>(c)] = mask.at(r, c) ? 255 : 0;
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw IoError("short write: " + path);
}

Image2D read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);

  std::string magic;
  f >> magic;
  if (magic != "P5") throw ParseError("not a P5 file", "magic", 0);

  auto next_token = [&]() -> long {
    // Skips whitespace and # comment lines, as the format allows.
    for (;;) {
      int ch = f.peek();
      if (ch == '#') {
        std::string line;
        std::getline(f, line);
        continue;
      }
      if (std::isspace(ch)) {
        f.get();
        continue;
      }
      break;
    }
    long v = -1;
    f >> v;
    return v;
  };

  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (!f || w < 1 || h < 1) throw ParseError("bad dimensions", "header", 0);
  if (maxval != 255 && maxval != 65535)
    throw ParseError("unsupported maxval", "maxval", 0);
  f.get();  // single whitespace byte after maxval

  Image2D img(static_cast<int>(h), static_cast<int>(w));
  const int bytes = maxval == 65535 ? 2 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * bytes);
  for (long r = 0; r < h; ++r) {
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
    if (!f) throw ParseError("truncated pixel data", "pixels", 0);
    for (long c = 0; c < w; ++c) {
      const unsigned raw =
          bytes == 2 ? (static_cast<unsigned>(buf[c * 2]) << 8) | buf[c * 2 + 1]
                     : buf[c];
      img.at(static_cast<int>(r), static_cast<int>(c)) =
          static_cast<float>(raw);
    }
  }
  return img;
}

}  // namespace polarseg
