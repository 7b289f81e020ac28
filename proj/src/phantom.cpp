#include "polarseg/phantom.hpp"

#include <cmath>
#include <vector>

#include "polarseg/errors.hpp"
#include "polarseg/rng.hpp"

namespace polarseg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

struct Ellipse {
  double row, col;      // center
  double a, b;          // semi-axes, a along the rotated x axis
  double cos_t, sin_t;  // rotation

  bool contains(double r, double c) const {
    const double dr = r - row;
    const double dc = c - col;
    const double u = cos_t * dc + sin_t * dr;
    const double v = -sin_t * dc + cos_t * dr;
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }

  double bound() const { return std::max(a, b); }
};

Slice make_slice(const PhantomSpec& spec, std::uint64_t slice_seed) {
  Rng rng(slice_seed);
  const int k = static_cast<int>(
      rng.uniform_int(spec.min_components, spec.max_components));

  // Rejection placement: fully inside the frame, bounding circles 2 px
  // apart.
  constexpr int kAttemptCap = 1000;
  std::vector<Ellipse> placed;
  for (int i = 0; i < k; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < kAttemptCap && !ok; ++attempt) {
      Ellipse e;
      e.a = rng.uniform(spec.min_axis, spec.max_axis);
      e.b = rng.uniform(spec.min_axis, spec.max_axis);
      const double theta = rng.uniform(0.0, kPi);
      e.cos_t = std::cos(theta);
      e.sin_t = std::sin(theta);
      const double margin = e.bound() + 2.0;
      if (2.0 * margin >= spec.height || 2.0 * margin >= spec.width) continue;
      e.row = rng.uniform(margin, spec.height - 1 - margin);
      e.col = rng.uniform(margin, spec.width - 1 - margin);

      ok = true;
      for (const Ellipse& other : placed) {
        const double dr = e.row - other.row;
        const double dc = e.col - other.col;
        const double min_gap = e.bound() + other.bound() + 2.0;
        if (dr * dr + dc * dc < min_gap * min_gap) {
          ok = false;
          break;
        }
      }
      if (ok) placed.push_back(e);
    }
    if (!ok)
      throw ConfigError(
          "phantom spec infeasible: could not place ellipse " +
          std::to_string(i + 1) + " of " + std::to_string(k) + " after " +
          std::to_string(kAttemptCap) + " attempts");
  }

  Slice slice;
  slice.image = Image2D(spec.height, spec.width,
                        static_cast<float>(spec.outside_value));
  Mask2D truth(spec.height, spec.width);
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      for (const Ellipse& e : placed) {
        if (e.contains(r, c)) {
          truth.at(r, c) = 1;
          slice.image.at(r, c) = static_cast<float>(spec.inside_value);
          break;
        }
      }
    }
  }

  if (spec.noise_sd > 0.0) {
    // One draw per pixel in raster order, after placement, so the noise
    // field is fixed by the slice seed alone.
    for (float& v : slice.image.data)
      v = static_cast<float>(v + rng.normal(0.0, spec.noise_sd));
  }

  slice.truth = std::move(truth);
  return slice;
}

}  // namespace

void PhantomSpec::validate() const {
  require(height >= 1 && width >= 1, "PhantomSpec: empty frame");
  require(slice_count >= 1, "PhantomSpec: slice_count must be >= 1");
  require(min_components >= 0 && min_components <= max_components,
          "PhantomSpec: bad component count range");
  require(min_axis > 0.0 && min_axis <= max_axis,
          "PhantomSpec: bad axis range");
  require(noise_sd >= 0.0, "PhantomSpec: noise_sd must be >= 0");
  require(!scan_id.empty(), "PhantomSpec: empty scan_id");
}

ScanRecord generate_phantom(const PhantomSpec& spec) {
  spec.validate();

  ScanRecord scan;
  scan.scan_id = spec.scan_id;
  const std::uint64_t base =
      mix_seed(spec.seed, hash_string(spec.scan_id));
  scan.slices.reserve(static_cast<std::size_t>(spec.slice_count));
  for (int i = 0; i < spec.slice_count; ++i)
    scan.slices.push_back(
        make_slice(spec, mix_seed(base, static_cast<std::uint64_t>(i))));
  return scan;
}

}  // namespace polarseg
