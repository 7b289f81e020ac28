#ifndef POLARSEG_IMAGE_HPP
#define POLARSEG_IMAGE_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace polarseg {

/// Single-channel floating-point raster, row-major. Carrier of CT slices,
/// probability maps and polar images. Values are dimensionless after
/// preprocessing, HU before.
struct Image2D {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image2D() = default;
  Image2D(int h, int w, float fill = 0.0f);

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + c;
  }
  float& at(int r, int c) { return data[index(r, c)]; }
  const float& at(int r, int c) const { return data[index(r, c)]; }

  bool same_shape(const Image2D& other) const {
    return height == other.height && width == other.width;
  }

  /// Throws ContractError if shape metadata and payload disagree or any value
  /// is non-finite.
  void validate() const;
};

/// Binary raster, row-major. Ground-truth labels and final segmentations.
struct Mask2D {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // 0 or 1

  Mask2D() = default;
  Mask2D(int h, int w, bool fill = false);

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + c;
  }
  std::uint8_t& at(int r, int c) { return data[index(r, c)]; }
  std::uint8_t at(int r, int c) const { return data[index(r, c)]; }

  bool same_shape(const Mask2D& other) const {
    return height == other.height && width == other.width;
  }

  std::int64_t foreground_count() const;

  void validate() const;
};

/// Descriptor of the bijection between a cartesian sampling frame and a polar
/// raster. Rows of the polar raster are radii (row 0 at the origin, last row
/// at max_radius); columns are angles. theta = 0 points along +col and grows
/// toward +row, one full turn over the column range. The origin may lie
/// anywhere, including outside the source image.
struct PolarGeometry {
  double origin_row = 0.0;
  double origin_col = 0.0;
  int radial_bins = 256;
  int angular_bins = 256;
  double max_radius = 0.0;

  void validate() const;
};

/// Geometry covering the whole image: max_radius is the distance from the
/// origin to the farthest image corner.
PolarGeometry default_geometry(double origin_row, double origin_col,
                               int image_h, int image_w, int radial_bins = 256,
                               int angular_bins = 256);

/// Bilinear interpolation at (row, col); any of the four neighbors outside
/// the image contributes `pad`. Total function.
float sample_bilinear(const Image2D& img, double row, double col, float pad);

/// Resamples onto the polar grid described by `geom`. Output is
/// radial_bins x angular_bins. Bilinear sampling with `pad` outside bounds.
Image2D cart_to_polar(const Image2D& img, const PolarGeometry& geom, float pad);

/// Nearest-neighbor polar resampling of a binary mask; out-of-bounds samples
/// are background.
Mask2D cart_to_polar_mask(const Mask2D& mask, const PolarGeometry& geom);

/// Inverse polar resampling onto an out_h x out_w cartesian frame. Bilinear
/// on the polar raster; the angular coordinate wraps modulo angular_bins so
/// interpolation blends across the theta = 0 seam. Points farther than
/// max_radius from the origin get `pad`.
Image2D polar_to_cart(const Image2D& polar, const PolarGeometry& geom,
                      int out_h, int out_w, float pad);

enum class Interp { Bilinear, Nearest };

/// align-corners = false grid resampling. Nearest mode must be used for masks
/// so values stay in {0, 1}.
Image2D resize(const Image2D& img, int out_h, int out_w, Interp mode);

Mask2D resize_mask(const Mask2D& mask, int out_h, int out_w);

/// v >= threshold is foreground; ties resolve to foreground.
Mask2D binarize(const Image2D& img, double threshold);

Image2D mask_to_image(const Mask2D& mask);

void clamp01(Image2D& img);

}  // namespace polarseg

#endif  // POLARSEG_IMAGE_HPP
