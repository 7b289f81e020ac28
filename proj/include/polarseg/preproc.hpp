#ifndef POLARSEG_PREPROC_HPP
#define POLARSEG_PREPROC_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "polarseg/image.hpp"
#include "polarseg/rng.hpp"
#include "polarseg/scan.hpp"

namespace polarseg {

// HU windowing and range mapping. Output pixels live in
// [out_low - global_mean, out_high - global_mean].
struct PreprocessConfig {
  double hu_low = 200.0;
  double hu_high = 500.0;
  double out_low = -0.5;
  double out_high = 0.5;
  double global_mean = 0.0;
  int target_h = 256;
  int target_w = 256;

  void validate() const;
};

struct AugmentConfig {
  double affine_prob = 0.5;
  double max_shift_frac = 0.0625;
  double max_scale_frac = 0.10;
  double max_rot_deg = 15.0;
  double hflip_prob = 0.3;
  double jitter_prob = 0.3;
  int jitter_max_px = 3;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// One polar training sample: the polar-resampled slice, the polar-resampled
// full-slice label, and the geometry that produced both.
struct PolarSample {
  Image2D polar_image;
  Mask2D polar_label;
  PolarGeometry geometry;
  std::string source_scan;
  int source_slice = 0;
  int source_component = 0;
};

// Clamp to [hu_low, hu_high], map affinely onto [out_low, out_high],
// subtract global_mean. The window endpoints land exactly on the output
// endpoints minus the mean.
Image2D window_and_normalize(const Image2D& slice, const PreprocessConfig& cfg);

// Mean over all pixels of all slices. Inputs are expected to be already
// windowed and range-mapped (mean subtraction not yet applied).
double compute_global_mean(const std::vector<Image2D>& slices);

// Training-time augmentation: affine warp (scale, rotate, shift about the
// image center) with probability affine_prob, horizontal flip with
// probability hflip_prob. Image warps bilinearly, mask nearest, both pad 0.
std::pair<Image2D, Mask2D> augment_pair(const Image2D& img, const Mask2D& mask,
                                        const AugmentConfig& cfg, Rng& rng);

// With probability jitter_prob shifts each coordinate by an independent
// uniform integer in [-jitter_max_px, +jitter_max_px]. The origin is rounded
// half-up to integer pixels before the shift, so jittered origins are
// integral. jitter_max_px == 0 disables the shift entirely.
std::pair<double, double> jitter_origin(std::pair<double, double> origin,
                                        const AugmentConfig& cfg, Rng& rng);

// One sample per ground-truth connected component per slice. The sample
// origin is that component's centroid (jittered when enabled); the label is
// the full slice mask so neighboring components stay visible. Per-sample
// seeds derive from (cfg.rng_seed, scan, slice, component) so the output is
// independent of iteration or worker order.
std::vector<PolarSample> build_polar_dataset(
    const std::vector<ScanRecord>& scans, int radial_bins, int angular_bins,
    const AugmentConfig& cfg);

// Writes one directory per scan under `out_dir`:
//   <slice>_<component>.img.pgm   16-bit P5, affine mapping in a sidecar
//   <slice>_<component>.img.txt   the mapping: v = raw * scale + offset
//   <slice>_<component>.lbl.pgm   8-bit P5, values {0, 255}
// plus a top-level manifest.txt with one key=value block per sample.
void export_polar_dataset(const std::vector<PolarSample>& samples,
                          const std::string& out_dir);

}  // namespace polarseg

#endif  // POLARSEG_PREPROC_HPP
