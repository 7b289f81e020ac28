#include <cmath>
#include <vector>

#include "doctest.h"
#include "polarseg/errors.hpp"
#include "polarseg/image.hpp"
#include "polarseg/rng.hpp"
#include "test_util.hpp"

using namespace polarseg;

namespace {

Image2D grid_image(int h, int w) {
  Image2D img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) img.at(r, c) = static_cast<float>(r * w + c);
  return img;
}

}  // namespace

TEST_CASE("sample_bilinear hits exact values at grid points") {
  const Image2D img = grid_image(5, 7);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 7; ++c)
      CHECK(sample_bilinear(img, r, c, -1.0f) == doctest::Approx(r * 7 + c));
}

TEST_CASE("sample_bilinear returns pad far outside bounds") {
  const Image2D img = grid_image(4, 4);
  CHECK(sample_bilinear(img, -5.0, 2.0, 9.0f) == 9.0f);
  CHECK(sample_bilinear(img, 2.0, 100.0, 9.0f) == 9.0f);
  CHECK(sample_bilinear(img, -3.5, -3.5, 9.0f) == 9.0f);
}

TEST_CASE("sample_bilinear center of 2x2 cell averages four corners") {
  Image2D img(2, 2);
  img.at(0, 0) = 0.0f;
  img.at(0, 1) = 1.0f;
  img.at(1, 0) = 2.0f;
  img.at(1, 1) = 3.0f;
  CHECK(sample_bilinear(img, 0.5, 0.5, 0.0f) == doctest::Approx(1.5));
}

TEST_CASE("cart_to_polar row zero replicates the origin sample") {
  const Image2D img = grid_image(16, 16);
  PolarGeometry geom = default_geometry(7.0, 9.0, 16, 16, 32, 48);
  const Image2D polar = cart_to_polar(img, geom, 0.0f);
  REQUIRE(polar.height == 32);
  REQUIRE(polar.width == 48);
  const float origin_value = sample_bilinear(img, 7.0, 9.0, 0.0f);
  for (int a = 0; a < 48; ++a)
    CHECK(polar.at(0, a) == doctest::Approx(origin_value));
}

TEST_CASE("cart_to_polar of a centered disk fills a row prefix per column") {
  const int h = 64, w = 64;
  const double disk_r = 20.0;
  const Mask2D disk = testutil::make_disk(h, w, 31.5, 31.5, disk_r);
  const PolarGeometry geom = default_geometry(31.5, 31.5, h, w, 64, 64);
  const Image2D polar = cart_to_polar(mask_to_image(disk), geom, 0.0f);

  const int expected_last =
      static_cast<int>(disk_r * (geom.radial_bins - 1) / geom.max_radius);
  for (int a = 0; a < geom.angular_bins; ++a) {
    int last_fg = -1;
    bool prefix = true;
    for (int r = 0; r < geom.radial_bins; ++r) {
      const bool fg = polar.at(r, a) >= 0.5f;
      if (fg) {
        if (last_fg != r - 1) prefix = false;
        last_fg = r;
      }
    }
    CHECK(prefix);
    CHECK(std::abs(last_fg - expected_last) <= 1);
  }
}

TEST_CASE("cart_to_polar pad region matches the geometric out-of-bounds set") {
  const int h = 32, w = 32;
  Image2D img(h, w, 3.0f);
  const float pad = -7.0f;
  const PolarGeometry geom = default_geometry(15.5, 15.5, h, w, 64, 64);
  const Image2D polar = cart_to_polar(img, geom, pad);

  const double radial_step = geom.max_radius / (geom.radial_bins - 1);
  const double angular_step = 2.0 * kPi / geom.angular_bins;
  for (int ri = 0; ri < geom.radial_bins; ++ri) {
    for (int ai = 0; ai < geom.angular_bins; ++ai) {
      const double row = geom.origin_row + ri * radial_step *
                                               std::sin(ai * angular_step);
      const double col = geom.origin_col + ri * radial_step *
                                               std::cos(ai * angular_step);
      const float v = polar.at(ri, ai);
      if (row >= 0.0 && row <= h - 1 && col >= 0.0 && col <= w - 1) {
        // Interior sample: every neighbor in bounds away from the border.
        if (row >= 1.0 && row <= h - 2 && col >= 1.0 && col <= w - 2)
          CHECK(v == 3.0f);
        else
          CHECK((v >= pad && v <= 3.0f));
      } else if (row < -1.0 || row > h || col < -1.0 || col > w) {
        CHECK(v == pad);
      }
    }
  }
}

TEST_CASE("polar_to_cart of all-zero raster is all zero") {
  PolarGeometry geom = default_geometry(8.0, 8.0, 17, 17, 16, 16);
  const Image2D polar(16, 16, 0.0f);
  const Image2D cart = polar_to_cart(polar, geom, 17, 17, 0.0f);
  for (float v : cart.data) CHECK(v == 0.0f);
}

TEST_CASE("polar_to_cart of a row prefix reconstructs a disk") {
  PolarGeometry geom;
  geom.origin_row = 32.0;
  geom.origin_col = 32.0;
  geom.radial_bins = 64;
  geom.angular_bins = 128;
  geom.max_radius = 40.0;

  const int k = 24;
  Image2D polar(64, 128, 0.0f);
  for (int r = 0; r <= k; ++r)
    for (int a = 0; a < 128; ++a) polar.at(r, a) = 1.0f;

  const Image2D cart = polar_to_cart(polar, geom, 65, 65, 0.0f);
  const double disk_r = k * geom.max_radius / (geom.radial_bins - 1);
  for (int r = 0; r < 65; ++r) {
    for (int c = 0; c < 65; ++c) {
      const double d = std::hypot(r - 32.0, c - 32.0);
      const bool fg = cart.at(r, c) >= 0.5f;
      if (d <= disk_r - 1.0) CHECK(fg);
      if (d >= disk_r + 1.0) CHECK(!fg);
    }
  }
}

TEST_CASE("polar_to_cart blends across the angular seam") {
  // Four angular bins at theta = 0, pi/2, pi, 3pi/2. The lattice point
  // (7, 9) relative to origin (8, 8) sits at theta = 7pi/4, exactly halfway
  // between the last bin and bin 0, so its value must be their mean.
  PolarGeometry geom;
  geom.origin_row = 8.0;
  geom.origin_col = 8.0;
  geom.radial_bins = 16;
  geom.angular_bins = 4;
  geom.max_radius = 8.0;

  Image2D polar(16, 4, 0.0f);
  for (int r = 0; r < 16; ++r) polar.at(r, 0) = 1.0f;  // column 0 only

  const Image2D cart = polar_to_cart(polar, geom, 17, 17, 0.0f);
  CHECK(cart.at(7, 9) == doctest::Approx(0.5).epsilon(1e-9));
  // Same distance halfway between bins 0 and 1 (theta = pi/4).
  CHECK(cart.at(9, 9) == doctest::Approx(0.5).epsilon(1e-9));
  // On the theta = 0 axis: full weight on column 0.
  CHECK(cart.at(8, 10) == doctest::Approx(1.0).epsilon(1e-9));
  // On the theta = pi axis: no weight on column 0.
  CHECK(cart.at(8, 5) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("centered disk survives a polar round trip with dice >= 0.99") {
  const int n = 256;
  const Mask2D disk = testutil::make_disk(n, n, 127.5, 127.5, 60.0);
  const PolarGeometry geom = default_geometry(127.5, 127.5, n, n);
  const Image2D polar = cart_to_polar(mask_to_image(disk), geom, 0.0f);
  const Image2D back = polar_to_cart(polar, geom, n, n, 0.0f);
  const Mask2D rec = binarize(back, 0.5);
  CHECK(testutil::dice(rec, disk) >= 0.99);
}

TEST_CASE("rotating the image by 90 degrees shifts polar columns") {
  const int n = 33;  // odd, integer center
  const int oc = 16, orr = 16;
  Rng rng(11);
  Image2D img(n, n);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());

  // img90 is img rotated +90deg about the center: the sample at angle
  // theta + pi/2 equals the original sample at theta.
  Image2D img90(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const int src_r = orr - (c - oc);
      const int src_c = oc + (r - orr);
      img90.at(r, c) = (src_r >= 0 && src_r < n && src_c >= 0 && src_c < n)
                           ? img.at(src_r, src_c)
                           : 0.0f;
    }

  const int A = 32;
  PolarGeometry geom;
  geom.origin_row = orr;
  geom.origin_col = oc;
  geom.radial_bins = 24;
  geom.angular_bins = A;
  geom.max_radius = 14.0;  // full circle inside both frames

  const Image2D p0 = cart_to_polar(img, geom, 0.0f);
  const Image2D p90 = cart_to_polar(img90, geom, 0.0f);
  for (int r = 0; r < geom.radial_bins; ++r)
    for (int a = 0; a < A; ++a)
      CHECK(p90.at(r, a) ==
            doctest::Approx(p0.at(r, (a + A - A / 4) % A)).epsilon(1e-4));
}

TEST_CASE("resize to the same shape is the identity") {
  const Image2D img = grid_image(9, 5);
  const Image2D same = resize(img, 9, 5, Interp::Bilinear);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(same.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
  const Image2D same_n = resize(img, 9, 5, Interp::Nearest);
  CHECK(same_n.data == img.data);
}

TEST_CASE("nearest 2x upscale replicates each value in a 2x2 block") {
  Image2D img(2, 2);
  img.at(0, 0) = 0.0f;
  img.at(0, 1) = 1.0f;
  img.at(1, 0) = 2.0f;
  img.at(1, 1) = 3.0f;
  const Image2D up = resize(img, 4, 4, Interp::Nearest);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(up.at(r, c) == img.at(r / 2, c / 2));
}

TEST_CASE("resizing a constant image stays constant at any shape") {
  const Image2D img(7, 3, 4.25f);
  for (auto [h, w] : {std::pair{1, 1}, {13, 29}, {7, 3}, {2, 11}}) {
    const Image2D out = resize(img, h, w, Interp::Bilinear);
    for (float v : out.data) CHECK(v == doctest::Approx(4.25f));
  }
}

TEST_CASE("resize_mask keeps values binary") {
  Rng rng(5);
  const Mask2D m = testutil::random_mask(10, 14, 0.4, rng);
  const Mask2D out = resize_mask(m, 25, 7);
  for (auto v : out.data) CHECK((v == 0 || v == 1));
}

TEST_CASE("binarize sends ties to foreground") {
  Image2D img(1, 3);
  img.at(0, 0) = 0.4999f;
  img.at(0, 1) = 0.5f;
  img.at(0, 2) = 0.5001f;
  const Mask2D m = binarize(img, 0.5);
  CHECK(m.at(0, 0) == 0);
  CHECK(m.at(0, 1) == 1);
  CHECK(m.at(0, 2) == 1);
}

TEST_CASE("cart_to_polar_mask snaps half-coordinates upward") {
  // snap(1.5) = 2 and snap(-0.5) = 0: half-up, not round-half-away-from-zero.
  Mask2D m(4, 4);
  m.at(2, 2) = 1;
  PolarGeometry geom;
  geom.origin_row = 1.5;
  geom.origin_col = 2.0;
  geom.radial_bins = 2;
  geom.angular_bins = 4;
  geom.max_radius = 0.25;
  const Mask2D polar = cart_to_polar_mask(m, geom);
  CHECK(polar.at(0, 0) == 1);  // row 0 samples snap(1.5)=2, snap(2.0)=2

  Mask2D edge(2, 3);
  edge.at(0, 1) = 1;
  PolarGeometry g2;
  g2.origin_row = -0.5;
  g2.origin_col = 1.0;
  g2.radial_bins = 2;
  g2.angular_bins = 4;
  g2.max_radius = 0.25;
  const Mask2D polar2 = cart_to_polar_mask(edge, g2);
  CHECK(polar2.at(0, 0) == 1);  // snap(-0.5)=0 stays in bounds
}

TEST_CASE("default_geometry reaches the farthest corner") {
  const PolarGeometry g = default_geometry(0.0, 0.0, 4, 6);
  CHECK(g.max_radius == doctest::Approx(std::sqrt(34.0)));
  const PolarGeometry centered = default_geometry(2.0, 2.0, 5, 5);
  CHECK(centered.max_radius == doctest::Approx(std::sqrt(8.0)));
  const PolarGeometry degenerate = default_geometry(0.0, 0.0, 1, 1);
  CHECK(degenerate.max_radius == 1.0);
}

TEST_CASE("validate rejects malformed rasters and geometries") {
  Image2D img(2, 2);
  img.data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(img.validate(), ContractError);

  Image2D short_img(2, 2);
  short_img.data.pop_back();
  CHECK_THROWS_AS(short_img.validate(), ContractError);

  PolarGeometry geom;
  geom.max_radius = 0.0;
  CHECK_THROWS_AS(geom.validate(), ContractError);
  geom.max_radius = 5.0;
  geom.radial_bins = 1;
  CHECK_THROWS_AS(geom.validate(), ContractError);
}

TEST_CASE("clamp01 clips into the unit interval") {
  Image2D img(1, 4);
  img.at(0, 0) = -0.5f;
  img.at(0, 1) = 0.25f;
  img.at(0, 2) = 1.0f;
  img.at(0, 3) = 7.0f;
  clamp01(img);
  CHECK(img.at(0, 0) == 0.0f);
  CHECK(img.at(0, 1) == 0.25f);
  CHECK(img.at(0, 2) == 1.0f);
  CHECK(img.at(0, 3) == 1.0f);
}
