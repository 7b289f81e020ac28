// Acceptance gate: ten end-to-end criteria, one [PASS]/[FAIL] line each.
// Exit code 0 only when every criterion holds. Every tolerance and time
// bound is pinned inline next to the check it guards.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "polarseg/ccomp.hpp"
#include "polarseg/cli.hpp"
#include "polarseg/config.hpp"
#include "polarseg/errors.hpp"
#include "polarseg/evalkit.hpp"
#include "polarseg/image.hpp"
#include "polarseg/nifti.hpp"
#include "polarseg/phantom.hpp"
#include "polarseg/pipeline.hpp"
#include "polarseg/preproc.hpp"
#include "polarseg/rng.hpp"
#include "polarseg/segmenter.hpp"

namespace fs = std::filesystem;
using namespace polarseg;

namespace {

// ---------------------------------------------------------------------------
// Gate plumbing

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& msg) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += msg;
    }
  }
  void note(const std::string& msg) {
    if (!detail.empty()) detail += "; ";
    detail += msg;
  }
};

struct Gate {
  int failed = 0;
  int total = 0;

  template <typename Fn>
  void run(int number, const std::string& name, Fn fn) {
    ++total;
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.ok = false;
      c.note(std::string("exception: ") + e.what());
    } catch (...) {
      c.ok = false;
      c.note("unknown exception");
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (!c.ok) ++failed;
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << (c.ok ? "[PASS]" : "[FAIL]") << " criterion " << number
              << ": " << name << " (" << timing << ")";
    if (!c.detail.empty()) std::cout << " -- " << c.detail;
    std::cout << "\n" << std::flush;
  }
};

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("polarseg-accept-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str(const std::string& name) const {
    return (path / name).string();
  }
};

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full = {"polarseg"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  // Silence normal CLI output; the gate prints its own lines.
  std::ostringstream sink_out, sink_err;
  auto* old_out = std::cout.rdbuf(sink_out.rdbuf());
  auto* old_err = std::cerr.rdbuf(sink_err.rdbuf());
  int code = -1;
  try {
    code = cli_main(static_cast<int>(argv.size()), argv.data());
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  if (code != 0)
    throw std::runtime_error("cli exited " + std::to_string(code) + ": " +
                             sink_err.str());
  return code;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

// Sorted relative-path -> bytes map of every regular file under root.
std::map<std::string, std::vector<std::uint8_t>> snapshot_dir(
    const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out[fs::relative(e.path(), root).string()] = read_bytes(e.path());
  return out;
}

double mask_dice(const Mask2D& a, const Mask2D& b) {
  ConfusionCounts c = confusion(a, b);
  return metrics_from_counts(c).dice;
}

// Windowing applied slice-by-slice in place; truth masks carried through.
ScanRecord preprocess_keep_truth(ScanRecord scan, const PreprocessConfig& cfg) {
  for (auto& s : scan.slices) s.image = window_and_normalize(s.image, cfg);
  return scan;
}

// ---------------------------------------------------------------------------
// Criterion 1: fusion weights on the two-object scenario, then hysteresis.

void criterion1(Check& c) {
  const int h = 64, w = 64;
  Mask2D obj_true(h, w), obj_false(h, w);
  for (int r = 8; r < 16; ++r)
    for (int col = 8; col < 16; ++col) obj_true.at(r, col) = 1;
  for (int r = 40; r < 48; ++r)
    for (int col = 40; col < 48; ++col) obj_false.at(r, col) = 1;

  auto as_prob = [&](std::initializer_list<const Mask2D*> parts) {
    Image2D img(h, w);
    for (const Mask2D* m : parts)
      for (std::size_t i = 0; i < m->data.size(); ++i)
        if (m->data[i]) img.data[i] = 1.0f;
    return img;
  };
  auto make_pass = [&](double orow, double ocol, Image2D prob) {
    PolarPass p;
    p.geometry = default_geometry(orow, ocol, h, w);
    p.cart_probability = std::move(prob);
    return p;
  };

  // True object in all three passes; its own pass weights it 2. The false
  // object appears in exactly one pass whose origin is elsewhere, weight 1.
  std::vector<PolarPass> passes;
  passes.push_back(make_pass(12.0, 12.0, as_prob({&obj_true})));
  passes.push_back(make_pass(2.0, 2.0, as_prob({&obj_true, &obj_false})));
  passes.push_back(make_pass(2.0, 50.0, as_prob({&obj_true})));

  FusionConfig cfg;  // origin weight 2, others 1, own-max normalization
  const auto t0 = std::chrono::steady_clock::now();
  const Image2D fused = fuse(passes, cfg);

  // Exact values, zero tolerance: 4/4 on the true object, 1/4 on the false.
  bool exact = true;
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) {
      const float want = obj_true.at(r, col)    ? 1.0f
                         : obj_false.at(r, col) ? 0.25f
                                                : 0.0f;
      if (fused.at(r, col) != want) exact = false;
    }
  c.require(exact, "fused confidence is not exactly {1.0, 0.25, 0.0}");

  // Hysteresis low=0 high=0.4: the false object (0.25) has no seed and
  // vanishes; the true object survives pixel-for-pixel.
  const Mask2D kept = hysteresis_threshold(fused, 0.0, 0.4, 8);
  bool same = true;
  for (std::size_t i = 0; i < kept.data.size(); ++i)
    if (kept.data[i] != obj_true.data[i]) same = false;
  c.require(same, "hysteresis did not keep exactly the true object");

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.require(secs < 1.0, "fusion scenario exceeded 1s");
}

// ---------------------------------------------------------------------------
// Criterion 2: oracle-backed cascade on ten seeded phantoms, dice >= 0.98.

void criterion2(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  double min_dice = 1.0;
  for (int i = 0; i < 10; ++i) {
    PhantomSpec spec;  // 256x256, 64 slices, 1-3 ellipses, axes 12-30
    spec.seed = 1000 + static_cast<std::uint64_t>(i);
    spec.scan_id = "accept" + std::to_string(i);
    ScanRecord scan = preprocess_keep_truth(generate_phantom(spec), {});

    std::vector<ScanRecord> one = {scan};
    OracleBackend cart(InputSpace::Cartesian, one);
    OracleBackend polar(InputSpace::Polar, one);
    FusionConfig cfg;
    const std::vector<SliceResult> results =
        segment_scan(scan, cart, polar, cfg, 1);

    ConfusionCounts counts;
    for (std::size_t s = 0; s < results.size(); ++s)
      counts += confusion(results[s].final_mask, *scan.slices[s].truth);
    const double dice = metrics_from_counts(counts).dice;
    min_dice = std::min(min_dice, dice);
    c.require(dice >= 0.98, spec.scan_id + " dice " + std::to_string(dice) +
                                " < 0.98");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.require(secs < 120.0, "ten-phantom cascade exceeded 120s");
  c.note("min scan dice " + std::to_string(min_dice));
}

// ---------------------------------------------------------------------------
// Criterion 3: cascade beats the classical rough pass on noisy phantoms.
//
// Window [0,400] HU maps tissue (350 HU) to +0.375 and background to -0.5;
// the classical band [0.25, 0.5] then keeps a tissue pixel iff its noise
// exceeds -50 HU. At sd 65 that is P = Phi(50/65) ~ 0.78, putting the rough
// dice near 2P/(1+P) ~ 0.87 -- inside the required 0.85-0.90 window. The
// band excludes 0.0 so out-of-frame polar padding can never read as tissue.

void criterion3(Check& c) {
  PreprocessConfig window;
  window.hu_low = 0.0;
  window.hu_high = 400.0;
  const ClassicalParams band{0.25, 0.5, 0};

  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    std::vector<double> rough_dice, cascade_dice;
    double rough_tp = 0, rough_fn = 0, casc_tp = 0, casc_fn = 0;

    for (int k = 0; k < 2; ++k) {
      PhantomSpec spec;
      spec.height = 128;
      spec.width = 128;
      spec.slice_count = 8;
      spec.min_axis = 12.0;
      spec.max_axis = 24.0;
      spec.noise_sd = 65.0;
      spec.seed = seed * 100 + static_cast<std::uint64_t>(k);
      spec.scan_id = "noisy" + std::to_string(seed) + "_" + std::to_string(k);
      ScanRecord scan =
          preprocess_keep_truth(generate_phantom(spec), window);

      ClassicalBackend cart(InputSpace::Cartesian, band);
      ClassicalBackend polar(InputSpace::Polar, band);
      FusionConfig cfg;
      cfg.radial_bins = 128;
      cfg.angular_bins = 192;
      const std::vector<SliceResult> results =
          segment_scan(scan, cart, polar, cfg, 1);

      ConfusionCounts rough, cascade;
      for (std::size_t s = 0; s < results.size(); ++s) {
        rough += confusion(results[s].rough_mask, *scan.slices[s].truth);
        cascade += confusion(results[s].final_mask, *scan.slices[s].truth);
      }
      rough_dice.push_back(metrics_from_counts(rough).dice);
      cascade_dice.push_back(metrics_from_counts(cascade).dice);
      rough_tp += static_cast<double>(rough.tp);
      rough_fn += static_cast<double>(rough.fn);
      casc_tp += static_cast<double>(cascade.tp);
      casc_fn += static_cast<double>(cascade.fn);
    }

    const double rough_mean = mean_sd(rough_dice).first;
    const double cascade_mean = mean_sd(cascade_dice).first;
    const double rough_recall = rough_tp / (rough_tp + rough_fn);
    const double cascade_recall = casc_tp / (casc_tp + casc_fn);

    // Precondition pinned to the stated regime with a small slack band.
    c.require(rough_mean >= 0.82 && rough_mean <= 0.92,
              "seed " + std::to_string(seed) + " rough dice " +
                  std::to_string(rough_mean) + " outside [0.82, 0.92]");
    c.require(cascade_mean > rough_mean,
              "seed " + std::to_string(seed) + " cascade dice " +
                  std::to_string(cascade_mean) + " did not beat rough " +
                  std::to_string(rough_mean));
    c.require(cascade_recall > rough_recall,
              "seed " + std::to_string(seed) + " cascade recall " +
                  std::to_string(cascade_recall) + " did not beat rough " +
                  std::to_string(rough_recall));
    if (seed == 11ull)
      c.note("seed 11 rough " + std::to_string(rough_mean) + " -> cascade " +
             std::to_string(cascade_mean));
  }
}

// ---------------------------------------------------------------------------
// Criterion 4: polar round trip on 100 random single-blob masks, dice >= 0.99.

void criterion4(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const int h = 128, w = 128;
  Rng rng(77);
  double min_dice = 1.0;

  for (int trial = 0; trial < 100; ++trial) {
    Mask2D mask(h, w);
    long long area = 0;
    while (area < 100) {  // areas below 100 px are out of scope; redraw
      const double cr = 32.0 + 64.0 * rng.uniform();
      const double cc = 32.0 + 64.0 * rng.uniform();
      const double a = 6.0 + 22.0 * rng.uniform();
      const double b = 6.0 + 22.0 * rng.uniform();
      const double th = 3.14159265358979323846 * rng.uniform();
      const double ct = std::cos(th), st = std::sin(th);
      area = 0;
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) {
          const double dy = r - cr, dx = col - cc;
          const double u = (dx * ct + dy * st) / a;
          const double v = (-dx * st + dy * ct) / b;
          const std::uint8_t in = (u * u + v * v <= 1.0) ? 1 : 0;
          mask.at(r, col) = in;
          area += in;
        }
    }

    // Origin at the exact foreground centroid.
    double sr = 0, sc = 0;
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        if (mask.at(r, col)) {
          sr += r;
          sc += col;
        }
    const double n = static_cast<double>(area);
    const PolarGeometry geom =
        default_geometry(sr / n, sc / n, h, w, 256, 256);

    const Mask2D polar = cart_to_polar_mask(mask, geom);
    Image2D polar_f(polar.height, polar.width);
    for (std::size_t i = 0; i < polar.data.size(); ++i)
      polar_f.data[i] = polar.data[i] ? 1.0f : 0.0f;
    const Mask2D back =
        binarize(polar_to_cart(polar_f, geom, h, w, 0.0f), 0.5f);

    const double dice = mask_dice(back, mask);
    min_dice = std::min(min_dice, dice);
    c.require(dice >= 0.99, "trial " + std::to_string(trial) + " dice " +
                                std::to_string(dice) + " < 0.99");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.require(secs < 30.0, "round-trip batch exceeded 30s");
  c.note("min blob dice " + std::to_string(min_dice));
}

// ---------------------------------------------------------------------------
// Criterion 5: production labeling / hysteresis / confusion match independent
// reference implementations exactly.

// Reference labeler: raster scan, breadth-first fill, labels numbered in
// discovery order -- the same order the production two-pass labeler promises.
struct FloodResult {
  std::vector<std::int32_t> labels;
  int count = 0;
  std::int32_t at(int r, int c, int width) const {
    return labels[static_cast<std::size_t>(r) * width + c];
  }
};

FloodResult flood_label(const Mask2D& mask, int connectivity) {
  FloodResult lm;
  lm.labels.assign(mask.data.size(), 0);
  const int off8[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                          {0, 1},   {1, -1}, {1, 0},  {1, 1}};
  const int off4[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  int next = 0;
  for (int r = 0; r < mask.height; ++r)
    for (int col = 0; col < mask.width; ++col) {
      if (!mask.at(r, col) || lm.at(r, col, mask.width) != 0) continue;
      ++next;
      std::deque<std::pair<int, int>> q{{r, col}};
      lm.labels[static_cast<std::size_t>(r) * mask.width + col] = next;
      while (!q.empty()) {
        const auto [cr, cc] = q.front();
        q.pop_front();
        const int cnt = connectivity == 8 ? 8 : 4;
        for (int k = 0; k < cnt; ++k) {
          const int nr = cr + (connectivity == 8 ? off8[k][0] : off4[k][0]);
          const int nc = cc + (connectivity == 8 ? off8[k][1] : off4[k][1]);
          if (nr < 0 || nr >= mask.height || nc < 0 || nc >= mask.width)
            continue;
          auto& slot =
              lm.labels[static_cast<std::size_t>(nr) * mask.width + nc];
          if (mask.at(nr, nc) && slot == 0) {
            slot = next;
            q.emplace_back(nr, nc);
          }
        }
      }
    }
  lm.count = next;
  return lm;
}

// Reference hysteresis: breadth-first from every strong pixel through weak
// ones.
Mask2D bfs_hysteresis(const Image2D& img, double low, double high,
                      int connectivity) {
  Mask2D out(img.height, img.width);
  std::deque<std::pair<int, int>> q;
  for (int r = 0; r < img.height; ++r)
    for (int col = 0; col < img.width; ++col)
      if (img.at(r, col) >= high) {
        out.at(r, col) = 1;
        q.emplace_back(r, col);
      }
  const int off8[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                          {0, 1},   {1, -1}, {1, 0},  {1, 1}};
  const int off4[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  while (!q.empty()) {
    const auto [cr, cc] = q.front();
    q.pop_front();
    const int cnt = connectivity == 8 ? 8 : 4;
    for (int k = 0; k < cnt; ++k) {
      const int nr = cr + (connectivity == 8 ? off8[k][0] : off4[k][0]);
      const int nc = cc + (connectivity == 8 ? off8[k][1] : off4[k][1]);
      if (nr < 0 || nr >= img.height || nc < 0 || nc >= img.width) continue;
      if (!out.at(nr, nc) && img.at(nr, nc) > low) {
        out.at(nr, nc) = 1;
        q.emplace_back(nr, nc);
      }
    }
  }
  return out;
}

void criterion5(Check& c) {
  {  // labeling, 1000 random 32x32 masks
    Rng rng(501);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
      const double p = 0.25 + 0.5 * rng.uniform();
      const int conn = (t % 2) ? 4 : 8;
      Mask2D m(32, 32);
      for (auto& v : m.data) v = rng.bernoulli(p) ? 1 : 0;
      const LabelMap got = label_components(m, conn);
      const FloodResult want = flood_label(m, conn);
      if (got.labels != want.labels ||
          static_cast<int>(got.components.size()) != want.count)
        ++mismatches;
    }
    c.require(mismatches == 0, std::to_string(mismatches) +
                                   "/1000 labeling mismatches vs flood fill");
  }
  {  // hysteresis, 1000 random 16x16 maps
    Rng rng(502);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
      Image2D img(16, 16);
      for (auto& v : img.data) v = static_cast<float>(rng.uniform());
      const double low = 0.1 + 0.4 * rng.uniform();
      const double high = low + (0.95 - low) * rng.uniform();
      const int conn = (t % 2) ? 4 : 8;
      const Mask2D got = hysteresis_threshold(img, low, high, conn);
      const Mask2D want = bfs_hysteresis(img, low, high, conn);
      if (got.data != want.data) ++mismatches;
    }
    c.require(mismatches == 0,
              std::to_string(mismatches) +
                  "/1000 hysteresis mismatches vs seeded BFS");
  }
  {  // confusion counts, 1000 random mask pairs
    Rng rng(503);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
      Mask2D a(16, 16), b(16, 16);
      const double pa = rng.uniform(), pb = rng.uniform();
      for (auto& v : a.data) v = rng.bernoulli(pa) ? 1 : 0;
      for (auto& v : b.data) v = rng.bernoulli(pb) ? 1 : 0;
      const ConfusionCounts got = confusion(a, b);
      ConfusionCounts want;
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        if (a.data[i] && b.data[i]) ++want.tp;
        if (a.data[i] && !b.data[i]) ++want.fp;
        if (!a.data[i] && b.data[i]) ++want.fn;
        if (!a.data[i] && !b.data[i]) ++want.tn;
      }
      if (got.tp != want.tp || got.fp != want.fp || got.fn != want.fn ||
          got.tn != want.tn)
        ++mismatches;
    }
    c.require(mismatches == 0, std::to_string(mismatches) +
                                   "/1000 confusion mismatches vs per-pixel "
                                   "loop");
  }
}

// ---------------------------------------------------------------------------
// Criterion 6: dice == 2*iou/(1+iou) on every report row; pinned example.

void criterion6(Check& c) {
  // Rows with non-trivial dice: classical band on noisy phantoms.
  PreprocessConfig window;
  window.hu_low = 0.0;
  window.hu_high = 400.0;
  std::vector<ScanRecord> scans;
  std::vector<std::string> ids;
  for (int k = 0; k < 6; ++k) {
    PhantomSpec spec;
    spec.height = 64;
    spec.width = 64;
    spec.slice_count = 2;
    spec.min_axis = 8.0;
    spec.max_axis = 12.0;
    spec.noise_sd = 65.0;
    spec.seed = 600 + static_cast<std::uint64_t>(k);
    spec.scan_id = "row" + std::to_string(k);
    scans.push_back(preprocess_keep_truth(generate_phantom(spec), window));
    ids.push_back(spec.scan_id);
  }
  const ClassicalParams band{0.25, 0.5, 0};
  ClassicalBackend cart(InputSpace::Cartesian, band);
  ClassicalBackend polar(InputSpace::Polar, band);
  FusionConfig cfg;
  cfg.radial_bins = 64;
  cfg.angular_bins = 96;
  const Report report =
      evaluate_scans(scans, make_fold_plan(ids, 3, 9), cart, polar, cfg, 1);

  c.require(!report.rows.empty(), "report has no rows");
  for (const ScanRow& row : report.rows) {
    const double tp = static_cast<double>(row.counts.tp);
    const double fp = static_cast<double>(row.counts.fp);
    const double fn = static_cast<double>(row.counts.fn);
    // Bit-exact against the defining ratio recomputed from the row's counts.
    const double dice_from_counts = (2.0 * tp) / (2.0 * tp + fp + fn);
    c.require(row.volume.dice == dice_from_counts,
              row.scan_id + " dice is not the count ratio");
    // The identity itself, pinned at 1e-12 for the float evaluation.
    const double via_iou = 2.0 * row.volume.iou / (1.0 + row.volume.iou);
    c.require(std::fabs(row.volume.dice - via_iou) <= 1e-12,
              row.scan_id + " dice != 2*iou/(1+iou): |diff| = " +
                  std::to_string(std::fabs(row.volume.dice - via_iou)));
    c.require(row.volume.dice > 0.5 && row.volume.dice < 1.0,
              row.scan_id + " dice not in the non-trivial range");
  }

  ConfusionCounts pinned;
  pinned.tp = 50;
  pinned.fp = 10;
  pinned.fn = 10;
  const double dice = metrics_from_counts(pinned).dice;
  c.require(std::fabs(dice - 0.8333) <= 1e-4,
            "tp=50 fp=10 fn=10 dice " + std::to_string(dice) +
                " not within 1e-4 of 0.8333");
}

// ---------------------------------------------------------------------------
// Criterion 7: window anchor values exact; jitter activation and bounds.

void criterion7(Check& c) {
  {
    Image2D slice(1, 3);
    slice.data = {200.0f, 350.0f, 500.0f};
    const Image2D w = window_and_normalize(slice, {});
    c.require(w.data[0] == -0.5f && w.data[1] == 0.0f && w.data[2] == 0.5f,
              "window anchors 200/350/500 HU are not exactly -0.5/0.0/+0.5");
  }
  {
    AugmentConfig cfg;  // jitter_prob 0.3, jitter_max_px 3
    Rng rng(123);
    const std::pair<double, double> origin{50.0, 60.0};
    int moved = 0;
    bool bounded = true, integral = true;
    for (int i = 0; i < 100000; ++i) {
      const auto [r, col] = jitter_origin(origin, cfg, rng);
      const double dr = r - origin.first, dc = col - origin.second;
      if (dr != 0.0 || dc != 0.0) ++moved;
      if (std::fabs(dr) > 3.0 || std::fabs(dc) > 3.0) bounded = false;
      if (dr != std::floor(dr) || dc != std::floor(dc)) integral = false;
    }
    const double frac = moved / 100000.0;
    c.require(frac >= 0.29 && frac <= 0.31,
              "visible-jitter fraction " + std::to_string(frac) +
                  " outside [0.29, 0.31]");
    c.require(bounded, "a jitter offset exceeded +/-3 px");
    c.require(integral, "a jitter offset was not an integer");
  }
}

// ---------------------------------------------------------------------------
// Criterion 8: one exported polar sample per ground-truth component.

void criterion8(Check& c) {
  std::vector<ScanRecord> scans;
  long long expected = 0;
  for (int k = 0; k < 3; ++k) {
    PhantomSpec spec;
    spec.height = 64;
    spec.width = 64;
    spec.slice_count = 6;
    spec.min_axis = 6.0;
    spec.max_axis = 10.0;
    spec.seed = 800 + static_cast<std::uint64_t>(k);
    spec.scan_id = "ds" + std::to_string(k);
    ScanRecord scan = generate_phantom(spec);
    for (const Slice& s : scan.slices)
      expected +=
          static_cast<long long>(label_components(*s.truth, 8).components.size());
    scans.push_back(std::move(scan));
  }
  AugmentConfig cfg;
  cfg.rng_seed = 42;
  const std::vector<PolarSample> samples =
      build_polar_dataset(scans, 64, 96, cfg);
  c.require(static_cast<long long>(samples.size()) == expected,
            "samples " + std::to_string(samples.size()) + " != components " +
                std::to_string(expected));
  c.note(std::to_string(samples.size()) + " samples");
}

// ---------------------------------------------------------------------------
// Criterion 9: identical seeds give byte-identical outputs, serial and
// parallel, for both segment and evaluate.

void criterion9(Check& c) {
  TempDir dir;
  const fs::path data = dir.path / "data";
  fs::create_directories(data);
  for (int k = 1; k <= 2; ++k) {
    const std::string stem = (data / ("s" + std::to_string(k))).string();
    run_cli({"phantom", "--out", stem + ".img.nii", "--out-labels",
             stem + ".lbl.nii", "--seed", std::to_string(700 + k), "--height",
             "32", "--width", "32", "--slices", "2", "--min-axis", "4",
             "--max-axis", "7", "--noise-sd", "20", "--scan-id",
             "s" + std::to_string(k)});
  }
  const std::vector<std::string> geom = {"--target-h",     "32",
                                         "--target-w",     "32",
                                         "--radial-bins",  "48",
                                         "--angular-bins", "96"};

  auto segment_into = [&](const std::string& out, const std::string& threads) {
    std::vector<std::string> args = {
        "segment",        "--input",
        (data / "s1.img.nii").string(),
        "--labels",       (data / "s1.lbl.nii").string(),
        "--backend-cart", "oracle",
        "--backend-polar", "oracle",
        "--out",          dir.str(out),
        "--seed",         "5",
        "--threads",      threads};
    args.insert(args.end(), geom.begin(), geom.end());
    run_cli(args);
  };
  segment_into("a.nii", "1");
  segment_into("b.nii", "1");
  segment_into("c.nii", "4");
  c.require(read_bytes(dir.str("a.nii")) == read_bytes(dir.str("b.nii")),
            "segment rerun produced different mask bytes");
  c.require(read_bytes(dir.str("a.nii.manifest")) ==
                read_bytes(dir.str("b.nii.manifest")),
            "segment rerun produced a different manifest");
  c.require(read_bytes(dir.str("a.nii")) == read_bytes(dir.str("c.nii")),
            "threaded segment mask differs from serial");
  c.require(read_bytes(dir.str("a.nii.manifest")) ==
                read_bytes(dir.str("c.nii.manifest")),
            "threaded segment manifest differs from serial");

  auto evaluate_into = [&](const std::string& out, const std::string& threads) {
    std::vector<std::string> args = {
        "evaluate",        "--input-dir", data.string(),
        "--backend-cart",  "oracle",      "--backend-polar",
        "oracle",          "--out-dir",   dir.str(out),
        "--folds",         "2",           "--seed",
        "5",               "--threads",   threads};
    args.insert(args.end(), geom.begin(), geom.end());
    run_cli(args);
  };
  evaluate_into("r1", "1");
  evaluate_into("r2", "1");
  evaluate_into("r3", "4");
  const auto s1 = snapshot_dir(dir.str("r1"));
  const auto s2 = snapshot_dir(dir.str("r2"));
  const auto s3 = snapshot_dir(dir.str("r3"));
  c.require(!s1.empty(), "evaluate wrote no files");
  c.require(s1 == s2, "evaluate rerun produced different bytes");
  c.require(s1 == s3, "threaded evaluate differs from serial");
  c.note(std::to_string(s1.size()) + " report files compared");
}

// ---------------------------------------------------------------------------
// Criterion 10: mask volume round trip is the identity; header fuzzing gives
// structured errors only, never a crash.

void criterion10(Check& c) {
  TempDir dir;
  // Small labeled volume to round-trip and to serve as the fuzz seed file.
  Rng mask_rng(31);
  std::vector<Mask2D> masks(2, Mask2D(4, 4));
  for (Mask2D& m : masks)
    for (auto& v : m.data) v = mask_rng.bernoulli(0.4) ? 1 : 0;

  const NiftiVolume ref = make_reference(4, 4, 2, 1.0, 1.0, 1.0);
  const std::string path = dir.str("rt.nii");
  write_mask_volume(masks, ref, path);
  const std::vector<Mask2D> back = read_label_volume(path);
  bool identity = back.size() == masks.size();
  for (std::size_t i = 0; identity && i < masks.size(); ++i)
    identity = back[i].data == masks[i].data;
  c.require(identity, "write/read mask round trip is not the identity");

  // Header fuzz: random byte damage and truncation over 100000 trials.
  const std::vector<std::uint8_t> valid = read_bytes(path);
  const std::string fuzz_path = dir.str("fuzz.nii");
  Rng rng(999);
  long long parsed = 0, structured = 0, other = 0;
  for (int t = 0; t < 100000; ++t) {
    std::vector<std::uint8_t> bytes = valid;
    const std::uint64_t kind = rng.uniform_int(0, 3);
    if (kind != 1) {  // damage 1-8 bytes inside the 352-byte header block
      const std::uint64_t hits = rng.uniform_int(1, 8);
      for (std::uint64_t i = 0; i < hits; ++i)
        bytes[rng.uniform_int(0, 351)] =
            static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    if (kind == 1 || kind == 3)
      bytes.resize(rng.uniform_int(0, bytes.size() - 1));
    {
      std::ofstream out(fuzz_path, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    }
    try {
      const std::vector<Mask2D> got = read_label_volume(fuzz_path);
      (void)got;
      ++parsed;
    } catch (const ParseError&) {
      ++structured;
    } catch (const IoError&) {
      ++structured;
    } catch (const ContractError&) {
      ++structured;
    } catch (...) {
      ++other;
      break;  // one unstructured escape fails the criterion; stop early
    }
  }
  c.require(other == 0, "fuzzing escaped with an unstructured exception");
  c.require(parsed + structured == 100000,
            "fuzz trials did not all complete");
  c.note(std::to_string(structured) + " rejected, " + std::to_string(parsed) +
         " parsed");
}

}  // namespace

int main() {
  Gate gate;
  gate.run(1, "fusion weights 1.0/0.25 and hysteresis cleanup", criterion1);
  gate.run(2, "oracle cascade dice >= 0.98 on ten seeded phantoms",
           criterion2);
  gate.run(3, "cascade beats classical rough pass on noisy phantoms",
           criterion3);
  gate.run(4, "polar round-trip dice >= 0.99 on random blobs", criterion4);
  gate.run(5, "labeling/hysteresis/confusion match reference oracles",
           criterion5);
  gate.run(6, "dice equals 2*iou/(1+iou) on every report row", criterion6);
  gate.run(7, "window anchors exact; jitter activation within bounds",
           criterion7);
  gate.run(8, "polar dataset exports one sample per component", criterion8);
  gate.run(9, "seeded runs are byte-identical, serial and threaded",
           criterion9);
  gate.run(10, "volume round trip identity; header fuzz never crashes",
           criterion10);
  std::cout << "acceptance: " << (gate.total - gate.failed) << "/"
            << gate.total << " criteria passed\n";
  return gate.failed == 0 ? 0 : 1;
}
