#include "polarseg/preproc.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polarseg/ccomp.hpp"
#include "polarseg/errors.hpp"
#include "polarseg/pgm.hpp"

namespace polarseg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

int snap(double x) { return static_cast<int>(std::floor(x + 0.5)); }

bool valid_prob(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void PreprocessConfig::validate() const {
  require(hu_low < hu_high, "PreprocessConfig: hu_low must be < hu_high");
  require(out_low < out_high, "PreprocessConfig: out_low must be < out_high");
  require(target_h >= 1 && target_w >= 1,
          "PreprocessConfig: target shape must be >= 1x1");
}

void AugmentConfig::validate() const {
  require(valid_prob(affine_prob) && valid_prob(hflip_prob) &&
              valid_prob(jitter_prob),
          "AugmentConfig: probabilities must be in [0,1]");
  require(jitter_max_px >= 0, "AugmentConfig: jitter_max_px must be >= 0");
  require(max_shift_frac >= 0.0 && max_scale_frac >= 0.0 && max_scale_frac < 1.0,
          "AugmentConfig: shift/scale fractions out of range");
}

Image2D window_and_normalize(const Image2D& slice,
                             const PreprocessConfig& cfg) {
  slice.validate();
  cfg.validate();

  Image2D out(slice.height, slice.width);
  const double hu_span = cfg.hu_high - cfg.hu_low;
  const double out_span = cfg.out_high - cfg.out_low;
  for (std::size_t i = 0; i < slice.data.size(); ++i) {
    double v = slice.data[i];
    if (v < cfg.hu_low) v = cfg.hu_low;
    if (v > cfg.hu_high) v = cfg.hu_high;
    // Divide-first form keeps the window endpoints exact: hu_low maps to
    // out_low and hu_high to out_high before mean subtraction.
    const double t = (v - cfg.hu_low) / hu_span;
    out.data[i] =
        static_cast<float>(t * out_span + cfg.out_low - cfg.global_mean);
  }
  return out;
}

double compute_global_mean(const std::vector<Image2D>& slices) {
  require(!slices.empty(), "compute_global_mean: empty slice sequence");
  double sum = 0.0;
  std::int64_t count = 0;
  for (const Image2D& s : slices) {
    s.validate();
    for (float v : s.data) sum += v;
    count += static_cast<std::int64_t>(s.data.size());
  }
  return sum / static_cast<double>(count);
}

std::pair<Image2D, Mask2D> augment_pair(const Image2D& img, const Mask2D& mask,
                                        const AugmentConfig& cfg, Rng& rng) {
  img.validate();
  mask.validate();
  cfg.validate();
  require(img.height == mask.height && img.width == mask.width,
          "augment_pair: image and mask shape mismatch");

  Image2D out_img = img;
  Mask2D out_mask = mask;

  if (rng.bernoulli(cfg.affine_prob)) {
    // All three parameters are drawn even when a max is 0, so the draw
    // sequence does not depend on the configuration values.
    const double shift_r =
        rng.uniform(-cfg.max_shift_frac, cfg.max_shift_frac) * img.height;
    const double shift_c =
        rng.uniform(-cfg.max_shift_frac, cfg.max_shift_frac) * img.width;
    const double scale =
        rng.uniform(1.0 - cfg.max_scale_frac, 1.0 + cfg.max_scale_frac);
    const double rot =
        rng.uniform(-cfg.max_rot_deg, cfg.max_rot_deg) * kPi / 180.0;

    // Forward map: q = R(rot) * scale * (p - ctr) + ctr + shift.
    // Resampling walks the inverse: p = R(-rot)/scale * (q - ctr - shift) + ctr.
    const double ctr_r = (img.height - 1) / 2.0;
    const double ctr_c = (img.width - 1) / 2.0;
    const double cos_t = std::cos(rot);
    const double sin_t = std::sin(rot);

    Image2D warped_img(img.height, img.width);
    Mask2D warped_mask(img.height, img.width);
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        const double dr = r - ctr_r - shift_r;
        const double dc = c - ctr_c - shift_c;
        const double src_r = (cos_t * dr - sin_t * dc) / scale + ctr_r;
        const double src_c = (sin_t * dr + cos_t * dc) / scale + ctr_c;
        warped_img.at(r, c) = sample_bilinear(out_img, src_r, src_c, 0.0f);
        const int mr = snap(src_r);
        const int mc = snap(src_c);
        if (mr >= 0 && mr < img.height && mc >= 0 && mc < img.width)
          warped_mask.at(r, c) = out_mask.at(mr, mc);
      }
    }
    out_img = std::move(warped_img);
    out_mask = std::move(warped_mask);
  }

  if (rng.bernoulli(cfg.hflip_prob)) {
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width / 2; ++c) {
        const int m = img.width - 1 - c;
        std::swap(out_img.at(r, c), out_img.at(r, m));
        std::swap(out_mask.at(r, c), out_mask.at(r, m));
      }
    }
  }
  return {std::move(out_img), std::move(out_mask)};
}

std::pair<double, double> jitter_origin(std::pair<double, double> origin,
                                        const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.jitter_max_px == 0 || cfg.jitter_prob == 0.0) return origin;
  if (!rng.bernoulli(cfg.jitter_prob)) return origin;
  const double row = snap(origin.first) +
                     rng.uniform_int(-cfg.jitter_max_px, cfg.jitter_max_px);
  const double col = snap(origin.second) +
                     rng.uniform_int(-cfg.jitter_max_px, cfg.jitter_max_px);
  return {row, col};
}

std::vector<PolarSample> build_polar_dataset(
    const std::vector<ScanRecord>& scans, int radial_bins, int angular_bins,
    const AugmentConfig& cfg) {
  cfg.validate();

  std::vector<PolarSample> samples;
  for (const ScanRecord& scan : scans) {
    const std::uint64_t scan_seed =
        mix_seed(cfg.rng_seed, hash_string(scan.scan_id));
    for (std::size_t si = 0; si < scan.slices.size(); ++si) {
      const Slice& slice = scan.slices[si];
      require(slice.truth.has_value(),
              "build_polar_dataset: slice is missing its ground-truth mask");

      const LabelMap lm = label_components(*slice.truth, 8);
      const std::uint64_t slice_seed =
          mix_seed(scan_seed, static_cast<std::uint64_t>(si));
      for (const Component& comp : lm.components) {
        // Per-component seed: the sample is identical no matter which
        // worker or iteration order produced it.
        Rng rng(mix_seed(slice_seed, static_cast<std::uint64_t>(comp.label)));
        const auto [orow, ocol] = jitter_origin(
            {comp.centroid_row, comp.centroid_col}, cfg, rng);

        PolarSample sample;
        sample.geometry = default_geometry(orow, ocol, slice.image.height,
                                           slice.image.width, radial_bins,
                                           angular_bins);
        sample.polar_image = cart_to_polar(slice.image, sample.geometry, 0.0f);
        sample.polar_label = cart_to_polar_mask(*slice.truth, sample.geometry);
        sample.source_scan = scan.scan_id;
        sample.source_slice = static_cast<int>(si);
        sample.source_component = comp.label;
        samples.push_back(std::move(sample));
      }
    }
  }
  return samples;
}

void export_polar_dataset(const std::vector<PolarSample>& samples,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + out_dir);

  std::ostringstream manifest;
  manifest.precision(17);

  for (const PolarSample& s : samples) {
    const fs::path scan_dir = fs::path(out_dir) / s.source_scan;
    fs::create_directories(scan_dir, ec);
    if (ec) throw IoError("cannot create directory: " + scan_dir.string());

    std::ostringstream stem;
    stem << s.source_slice << "_" << s.source_component;
    const std::string img_path = (scan_dir / (stem.str() + ".img.pgm")).string();
    const std::string txt_path = (scan_dir / (stem.str() + ".img.txt")).string();
    const std::string lbl_path = (scan_dir / (stem.str() + ".lbl.pgm")).string();
    write_pgm16(img_path, txt_path, s.polar_image);
    write_pgm8(lbl_path, s.polar_label);

    manifest << "sample=" << s.source_scan << "/" << stem.str() << "\n"
             << "scan=" << s.source_scan << "\n"
             << "slice=" << s.source_slice << "\n"
             << "component=" << s.source_component << "\n"
             << "origin_row=" << s.geometry.origin_row << "\n"
             << "origin_col=" << s.geometry.origin_col << "\n"
             << "radial_bins=" << s.geometry.radial_bins << "\n"
             << "angular_bins=" << s.geometry.angular_bins << "\n"
             << "max_radius=" << s.geometry.max_radius << "\n"
             << "\n";
  }

  std::ofstream mf(fs::path(out_dir) / "manifest.txt", std::ios::binary);
  if (!mf) throw IoError("cannot open manifest for writing");
  mf << manifest.str();
  if (!mf) throw IoError("short write: manifest");
}

}  // namespace polarseg
