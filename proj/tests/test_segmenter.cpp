#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "polarseg/errors.hpp"
#include "polarseg/segmenter.hpp"
#include "test_util.hpp"

using namespace polarseg;

namespace {

ScanRecord known_scan() {
  ScanRecord scan;
  scan.scan_id = "k";
  Slice s;
  s.image = Image2D(16, 16, 0.0f);
  s.truth = testutil::make_disk(16, 16, 8.0, 8.0, 4.0);
  scan.slices.push_back(std::move(s));
  return scan;
}

BackendInput cart_input(const ScanRecord& scan, int slice) {
  BackendInput in;
  in.image = scan.slices[slice].image;
  in.ref = {scan.scan_id, slice};
  return in;
}

// Deliberately broken backend for contract tests.
class MisbehavingBackend : public SegmenterBackend {
 public:
  enum class Mode { OutOfRange, WrongShape, NonFinite };
  explicit MisbehavingBackend(Mode mode) : mode_(mode) {}
  std::string name() const override { return "misbehaving"; }
  InputSpace input_space() const override { return InputSpace::Cartesian; }
  bool thread_safe() const override { return true; }
  Image2D predict_one(const BackendInput& input) override {
    switch (mode_) {
      case Mode::OutOfRange:
        return Image2D(input.image.height, input.image.width, 1.5f);
      case Mode::WrongShape:
        return Image2D(input.image.height + 1, input.image.width, 0.5f);
      case Mode::NonFinite: {
        Image2D out(input.image.height, input.image.width, 0.5f);
        out.data[0] = std::numeric_limits<float>::quiet_NaN();
        return out;
      }
    }
    return Image2D(1, 1);
  }

 private:
  Mode mode_;
};

}  // namespace

TEST_CASE("cartesian oracle reproduces the stored truth exactly") {
  const ScanRecord scan = known_scan();
  OracleBackend oracle(InputSpace::Cartesian, {scan});
  const auto maps = predict(oracle, {cart_input(scan, 0)});
  REQUIRE(maps.size() == 1);
  const Mask2D& truth = *scan.slices[0].truth;
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c)
      CHECK(maps[0].at(r, c) == (truth.at(r, c) ? 1.0f : 0.0f));
}

TEST_CASE("polar oracle serves truth resampled with the request geometry") {
  const ScanRecord scan = known_scan();
  OracleBackend oracle(InputSpace::Polar, {scan});
  const PolarGeometry geom = default_geometry(8.0, 8.0, 16, 16, 24, 48);

  BackendInput in;
  in.image = cart_to_polar(scan.slices[0].image, geom, 0.0f);
  in.ref = {"k", 0};
  in.geometry = geom;
  const auto maps = predict(oracle, {in});
  REQUIRE(maps.size() == 1);

  const Mask2D want = cart_to_polar_mask(*scan.slices[0].truth, geom);
  for (int r = 0; r < 24; ++r)
    for (int a = 0; a < 48; ++a)
      CHECK(maps[0].at(r, a) == (want.at(r, a) ? 1.0f : 0.0f));
}

TEST_CASE("polar request without geometry is a configuration error") {
  const ScanRecord scan = known_scan();
  OracleBackend oracle(InputSpace::Polar, {scan});
  BackendInput in = cart_input(scan, 0);  // geometry left empty
  CHECK_THROWS_AS(predict(oracle, {in}), ConfigError);
}

TEST_CASE("oracle without truth for the requested slice faults") {
  const ScanRecord scan = known_scan();
  OracleBackend oracle(InputSpace::Cartesian, {scan});
  BackendInput in = cart_input(scan, 0);
  in.ref.scan_id = "unknown-scan";
  CHECK_THROWS_AS(predict(oracle, {in}), BackendError);
}

TEST_CASE("empty batch produces an empty result") {
  const ScanRecord scan = known_scan();
  OracleBackend oracle(InputSpace::Cartesian, {scan});
  CHECK(predict(oracle, {}).empty());
}

TEST_CASE("classical backend below the band returns all zero") {
  ClassicalParams params;
  params.intensity_low = 0.2;
  params.intensity_high = 0.8;
  ClassicalBackend backend(InputSpace::Cartesian, params);
  BackendInput in;
  in.image = Image2D(8, 8, 0.1f);
  const auto maps = predict(backend, {in});
  REQUIRE(maps.size() == 1);
  for (float v : maps[0].data) CHECK(v == 0.0f);
}

TEST_CASE("accept-all band with radius zero returns all one") {
  ClassicalParams params;
  params.intensity_low = -std::numeric_limits<double>::infinity();
  params.intensity_high = std::numeric_limits<double>::infinity();
  params.opening_radius = 0;
  Image2D img(5, 7);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<float>(i) - 10.0f;
  const Image2D out = classical_segment(img, params);
  for (float v : out.data) CHECK(v == 1.0f);
}

TEST_CASE("band threshold is inclusive at both edges") {
  ClassicalParams params;
  params.intensity_low = 0.25;
  params.intensity_high = 0.75;
  Image2D img(1, 4);
  img.at(0, 0) = 0.25f;
  img.at(0, 1) = 0.75f;
  img.at(0, 2) = 0.24f;
  img.at(0, 3) = 0.76f;
  const Image2D out = classical_segment(img, params);
  CHECK(out.at(0, 0) == 1.0f);
  CHECK(out.at(0, 1) == 1.0f);
  CHECK(out.at(0, 2) == 0.0f);
  CHECK(out.at(0, 3) == 0.0f);
}

TEST_CASE("opening erases blobs smaller than the structuring element") {
  ClassicalParams params;
  params.intensity_low = 0.5;
  params.intensity_high = 1.5;
  params.opening_radius = 2;

  Image2D img(32, 32, 0.0f);
  img.at(3, 3) = 1.0f;  // lone pixel: erased
  for (int r = 10; r < 22; ++r)
    for (int c = 10; c < 22; ++c) img.at(r, c) = 1.0f;  // 12x12 block: kept

  const Image2D out = classical_segment(img, params);
  CHECK(out.at(3, 3) == 0.0f);
  CHECK(out.at(15, 15) == 1.0f);
  // Opening never grows the foreground.
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      if (out.at(r, c) == 1.0f) CHECK(img.at(r, c) == 1.0f);
}

TEST_CASE("opening with a radius above blob size empties the map") {
  ClassicalParams params;
  params.intensity_low = 0.5;
  params.intensity_high = 1.5;
  params.opening_radius = 6;
  Image2D img(24, 24, 0.0f);
  for (int r = 8; r < 12; ++r)
    for (int c = 8; c < 12; ++c) img.at(r, c) = 1.0f;  // 4x4 blob
  const Image2D out = classical_segment(img, params);
  for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("backend contract violations are caught by predict") {
  const ScanRecord scan = known_scan();
  const BackendInput in = cart_input(scan, 0);

  MisbehavingBackend out_of_range(MisbehavingBackend::Mode::OutOfRange);
  CHECK_THROWS_AS(predict(out_of_range, {in}), BackendError);
  MisbehavingBackend wrong_shape(MisbehavingBackend::Mode::WrongShape);
  CHECK_THROWS_AS(predict(wrong_shape, {in}), BackendError);
  MisbehavingBackend non_finite(MisbehavingBackend::Mode::NonFinite);
  CHECK_THROWS_AS(predict(non_finite, {in}), BackendError);
}

TEST_CASE("make_backend parses the classical spec with parameters") {
  auto backend =
      make_backend("classical:0.2,0.8,0", InputSpace::Cartesian, nullptr);
  REQUIRE(backend != nullptr);
  CHECK(backend->name() == "classical");

  BackendInput in;
  in.image = Image2D(4, 4, 0.5f);
  in.image.at(0, 0) = 0.1f;
  const auto maps = predict(*backend, {in});
  CHECK(maps[0].at(0, 0) == 0.0f);
  CHECK(maps[0].at(1, 1) == 1.0f);
}

TEST_CASE("make_backend rejects bad specs") {
  CHECK_THROWS_AS(make_backend("oracle", InputSpace::Cartesian, nullptr),
                  ConfigError);
  CHECK_THROWS_AS(
      make_backend("classical:nonsense", InputSpace::Cartesian, nullptr),
      ConfigError);
  CHECK_THROWS_AS(make_backend("model:", InputSpace::Cartesian, nullptr),
                  ConfigError);
  CHECK_THROWS_AS(make_backend("banana", InputSpace::Cartesian, nullptr),
                  ConfigError);
}
