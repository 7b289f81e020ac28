#include "polarseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "polarseg/errors.hpp"
#include "polarseg/rng.hpp"

namespace polarseg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

// Half-up rounding to the nearest pixel index.
int snap(double x) { return static_cast<int>(std::floor(x + 0.5)); }

}  // namespace

Image2D::Image2D(int h, int w, float fill)
    : height(h),
      width(w),
      data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
  require(h >= 1 && w >= 1, "Image2D: height and width must be >= 1");
}

void Image2D::validate() const {
  require(height >= 1 && width >= 1, "Image2D: height and width must be >= 1");
  require(data.size() == static_cast<std::size_t>(height) * width,
          "Image2D: data length != height * width");
  for (float v : data)
    require(std::isfinite(v), "Image2D: non-finite value");
}

Mask2D::Mask2D(int h, int w, bool fill)
    : height(h),
      width(w),
      data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
           fill ? 1 : 0) {
  require(h >= 1 && w >= 1, "Mask2D: height and width must be >= 1");
}

std::int64_t Mask2D::foreground_count() const {
  std::int64_t n = 0;
  for (std::uint8_t v : data) n += (v != 0);
  return n;
}

void Mask2D::validate() const {
  require(height >= 1 && width >= 1, "Mask2D: height and width must be >= 1");
  require(data.size() == static_cast<std::size_t>(height) * width,
          "Mask2D: data length != height * width");
}

void PolarGeometry::validate() const {
  require(radial_bins >= 2, "PolarGeometry: radial_bins must be >= 2");
  require(angular_bins >= 2, "PolarGeometry: angular_bins must be >= 2");
  require(std::isfinite(max_radius) && max_radius > 0.0,
          "PolarGeometry: max_radius must be > 0");
  require(std::isfinite(origin_row) && std::isfinite(origin_col),
          "PolarGeometry: origin must be finite");
}

PolarGeometry default_geometry(double origin_row, double origin_col,
                               int image_h, int image_w, int radial_bins,
                               int angular_bins) {
  require(image_h >= 1 && image_w >= 1, "default_geometry: empty image");
  double far = 0.0;
  for (int r : {0, image_h - 1}) {
    for (int c : {0, image_w - 1}) {
      const double dr = r - origin_row;
      const double dc = c - origin_col;
      far = std::max(far, std::sqrt(dr * dr + dc * dc));
    }
  }
  PolarGeometry geom;
  geom.origin_row = origin_row;
  geom.origin_col = origin_col;
  geom.radial_bins = radial_bins;
  geom.angular_bins = angular_bins;
  geom.max_radius = far > 0.0 ? far : 1.0;
  return geom;
}

float sample_bilinear(const Image2D& img, double row, double col, float pad) {
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double rf = row - r0;
  const double cf = col - c0;

  auto pick = [&](int r, int c) -> double {
    if (r < 0 || r >= img.height || c < 0 || c >= img.width) return pad;
    return img.at(r, c);
  };

  const double top = (1.0 - cf) * pick(r0, c0) + cf * pick(r0, c0 + 1);
  const double bot = (1.0 - cf) * pick(r0 + 1, c0) + cf * pick(r0 + 1, c0 + 1);
  return static_cast<float>((1.0 - rf) * top + rf * bot);
}

Image2D cart_to_polar(const Image2D& img, const PolarGeometry& geom,
                      float pad) {
  img.validate();
  geom.validate();
  Image2D out(geom.radial_bins, geom.angular_bins);

  const double radial_step = geom.max_radius / (geom.radial_bins - 1);
  const double angular_step = 2.0 * kPi / geom.angular_bins;
  std::vector<double> sin_t(geom.angular_bins), cos_t(geom.angular_bins);
  for (int a = 0; a < geom.angular_bins; ++a) {
    sin_t[a] = std::sin(a * angular_step);
    cos_t[a] = std::cos(a * angular_step);
  }

  for (int ri = 0; ri < geom.radial_bins; ++ri) {
    const double radius = ri * radial_step;
    for (int ai = 0; ai < geom.angular_bins; ++ai) {
      const double row = geom.origin_row + radius * sin_t[ai];
      const double col = geom.origin_col + radius * cos_t[ai];
      out.at(ri, ai) = sample_bilinear(img, row, col, pad);
    }
  }
  return out;
}

Mask2D cart_to_polar_mask(const Mask2D& mask, const PolarGeometry& geom) {
  mask.validate();
  geom.validate();
  Mask2D out(geom.radial_bins, geom.angular_bins);

  const double radial_step = geom.max_radius / (geom.radial_bins - 1);
  const double angular_step = 2.0 * kPi / geom.angular_bins;
  std::vector<double> sin_t(geom.angular_bins), cos_t(geom.angular_bins);
  for (int a = 0; a < geom.angular_bins; ++a) {
    sin_t[a] = std::sin(a * angular_step);
    cos_t[a] = std::cos(a * angular_step);
  }

  for (int ri = 0; ri < geom.radial_bins; ++ri) {
    const double radius = ri * radial_step;
    for (int ai = 0; ai < geom.angular_bins; ++ai) {
      const int row = snap(geom.origin_row + radius * sin_t[ai]);
      const int col = snap(geom.origin_col + radius * cos_t[ai]);
      if (row < 0 || row >= mask.height || col < 0 || col >= mask.width)
        continue;
      out.at(ri, ai) = mask.at(row, col);
    }
  }
  return out;
}

Image2D polar_to_cart(const Image2D& polar, const PolarGeometry& geom,
                      int out_h, int out_w, float pad) {
  polar.validate();
  geom.validate();
  require(polar.height == geom.radial_bins && polar.width == geom.angular_bins,
          "polar_to_cart: polar raster shape must match geometry bins");
  require(out_h >= 1 && out_w >= 1, "polar_to_cart: empty output shape");

  Image2D out(out_h, out_w);
  const double radial_scale = (geom.radial_bins - 1) / geom.max_radius;
  const double angular_scale = geom.angular_bins / (2.0 * kPi);
  const int rmax = geom.radial_bins - 1;

  for (int y = 0; y < out_h; ++y) {
    const double dy = y - geom.origin_row;
    for (int x = 0; x < out_w; ++x) {
      const double dx = x - geom.origin_col;
      const double radius = std::sqrt(dx * dx + dy * dy);
      if (radius > geom.max_radius) {
        out.at(y, x) = pad;
        continue;
      }
      double theta = std::atan2(dy, dx);
      if (theta < 0.0) theta += 2.0 * kPi;

      const double pr = std::min(radius * radial_scale,
                                 static_cast<double>(rmax));
      double pa = theta * angular_scale;
      if (pa >= geom.angular_bins) pa -= geom.angular_bins;

      const int r0 = static_cast<int>(pr);
      const double rf = pr - r0;
      const int r1 = std::min(r0 + 1, rmax);
      const int a0 = static_cast<int>(pa) % geom.angular_bins;
      const double af = pa - static_cast<int>(pa);
      const int a1 = (a0 + 1) % geom.angular_bins;

      const double top =
          (1.0 - af) * polar.at(r0, a0) + af * polar.at(r0, a1);
      const double bot =
          (1.0 - af) * polar.at(r1, a0) + af * polar.at(r1, a1);
      out.at(y, x) = static_cast<float>((1.0 - rf) * top + rf * bot);
    }
  }
  return out;
}

Image2D resize(const Image2D& img, int out_h, int out_w, Interp mode) {
  img.validate();
  require(out_h >= 1 && out_w >= 1, "resize: output shape must be >= 1x1");

  Image2D out(out_h, out_w);
  const double sh = static_cast<double>(img.height) / out_h;
  const double sw = static_cast<double>(img.width) / out_w;

  if (mode == Interp::Nearest) {
    for (int r = 0; r < out_h; ++r) {
      const int sr = std::clamp(
          static_cast<int>(std::floor((r + 0.5) * sh)), 0, img.height - 1);
      for (int c = 0; c < out_w; ++c) {
        const int sc = std::clamp(
            static_cast<int>(std::floor((c + 0.5) * sw)), 0, img.width - 1);
        out.at(r, c) = img.at(sr, sc);
      }
    }
    return out;
  }

  for (int r = 0; r < out_h; ++r) {
    const double src_r =
        std::clamp((r + 0.5) * sh - 0.5, 0.0, img.height - 1.0);
    const int r0 = static_cast<int>(src_r);
    const int r1 = std::min(r0 + 1, img.height - 1);
    const double rf = src_r - r0;
    for (int c = 0; c < out_w; ++c) {
      const double src_c =
          std::clamp((c + 0.5) * sw - 0.5, 0.0, img.width - 1.0);
      const int c0 = static_cast<int>(src_c);
      const int c1 = std::min(c0 + 1, img.width - 1);
      const double cf = src_c - c0;
      const double top = (1.0 - cf) * img.at(r0, c0) + cf * img.at(r0, c1);
      const double bot = (1.0 - cf) * img.at(r1, c0) + cf * img.at(r1, c1);
      out.at(r, c) = static_cast<float>((1.0 - rf) * top + rf * bot);
    }
  }
  return out;
}

Mask2D resize_mask(const Mask2D& mask, int out_h, int out_w) {
  mask.validate();
  require(out_h >= 1 && out_w >= 1, "resize_mask: output shape must be >= 1x1");

  Mask2D out(out_h, out_w);
  const double sh = static_cast<double>(mask.height) / out_h;
  const double sw = static_cast<double>(mask.width) / out_w;
  for (int r = 0; r < out_h; ++r) {
    const int sr = std::clamp(static_cast<int>(std::floor((r + 0.5) * sh)), 0,
                              mask.height - 1);
    for (int c = 0; c < out_w; ++c) {
      const int sc = std::clamp(static_cast<int>(std::floor((c + 0.5) * sw)),
                                0, mask.width - 1);
      out.at(r, c) = mask.at(sr, sc);
    }
  }
  return out;
}

Mask2D binarize(const Image2D& img, double threshold) {
  img.validate();
  Mask2D out(img.height, img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = img.data[i] >= threshold ? 1 : 0;
  return out;
}

Image2D mask_to_image(const Mask2D& mask) {
  mask.validate();
  Image2D out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    out.data[i] = mask.data[i] ? 1.0f : 0.0f;
  return out;
}

void clamp01(Image2D& img) {
  for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace polarseg
