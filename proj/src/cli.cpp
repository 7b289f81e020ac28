#include "polarseg/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "polarseg/ccomp.hpp"
#include "polarseg/config.hpp"
#include "polarseg/errors.hpp"
#include "polarseg/evalkit.hpp"
#include "polarseg/nifti.hpp"
#include "polarseg/pgm.hpp"
#include "polarseg/phantom.hpp"
#include "polarseg/pipeline.hpp"
#include "polarseg/preproc.hpp"
#include "polarseg/rng.hpp"

namespace polarseg {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Option bundles. Each bundle registers its flags on a subcommand and can
// seed its defaults from a --config key=value file (flag values win).
// ---------------------------------------------------------------------------

struct WindowOpts {
  double hu_low = 200.0;
  double hu_high = 500.0;
  double global_mean = 0.0;
  int target_h = 256;
  int target_w = 256;

  void attach(CLI::App& cmd) {
    cmd.add_option("--hu-low", hu_low, "window lower bound (HU)");
    cmd.add_option("--hu-high", hu_high, "window upper bound (HU)");
    cmd.add_option("--global-mean", global_mean,
                   "mean subtracted after range mapping");
    cmd.add_option("--target-h", target_h, "slice height fed to backends");
    cmd.add_option("--target-w", target_w, "slice width fed to backends");
  }

  PreprocessConfig to_config() const {
    PreprocessConfig cfg;
    cfg.hu_low = hu_low;
    cfg.hu_high = hu_high;
    cfg.global_mean = global_mean;
    cfg.target_h = target_h;
    cfg.target_w = target_w;
    return cfg;
  }

  void record(KvMap& kv) const {
    kv["hu_low"] = fmt(hu_low);
    kv["hu_high"] = fmt(hu_high);
    kv["global_mean"] = fmt(global_mean);
    kv["target_h"] = std::to_string(target_h);
    kv["target_w"] = std::to_string(target_w);
  }
};

struct CascadeOpts {
  double hyst_low = 0.0;
  double hyst_high = 0.4;
  double binarize_threshold = 0.5;
  int connectivity = 8;
  std::int64_t min_component_area = 4;
  std::string norm = "max";
  int radial_bins = 256;
  int angular_bins = 256;

  void attach(CLI::App& cmd) {
    cmd.add_option("--hyst-low", hyst_low, "hysteresis bottom threshold");
    cmd.add_option("--hyst-high", hyst_high, "hysteresis top threshold");
    cmd.add_option("--binarize-threshold", binarize_threshold,
                   "probability cut for binarizing predictions");
    cmd.add_option("--connectivity", connectivity, "4 or 8")
        ->check(CLI::IsMember({4, 8}));
    cmd.add_option("--min-component-area", min_component_area,
                   "rough components below this area are dropped");
    cmd.add_option("--norm", norm, "fusion normalization: max|theoretical")
        ->check(CLI::IsMember({"max", "theoretical"}));
    cmd.add_option("--radial-bins", radial_bins, "polar raster rows");
    cmd.add_option("--angular-bins", angular_bins, "polar raster columns");
  }

  FusionConfig to_config() const {
    FusionConfig cfg;
    cfg.hyst_low = hyst_low;
    cfg.hyst_high = hyst_high;
    cfg.binarize_threshold = binarize_threshold;
    cfg.connectivity = connectivity;
    cfg.min_component_area = min_component_area;
    cfg.norm = norm == "theoretical" ? FusionNorm::TheoreticalMax
                                     : FusionNorm::OwnMax;
    cfg.radial_bins = radial_bins;
    cfg.angular_bins = angular_bins;
    return cfg;
  }

  void record(KvMap& kv) const {
    kv["hyst_low"] = fmt(hyst_low);
    kv["hyst_high"] = fmt(hyst_high);
    kv["binarize_threshold"] = fmt(binarize_threshold);
    kv["connectivity"] = std::to_string(connectivity);
    kv["min_component_area"] = std::to_string(min_component_area);
    kv["fusion_norm"] = norm;
    kv["radial_bins"] = std::to_string(radial_bins);
    kv["angular_bins"] = std::to_string(angular_bins);
  }
};

// Applies --config file values underneath explicitly passed flags. Keys use
// the long flag name without the leading dashes, dashes replaced by
// underscores (e.g. hyst_high=0.5).
void apply_config_file(CLI::App& cmd, const std::string& path) {
  const KvMap kv = read_kv_file(path);
  for (const auto& [key, value] : kv) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = cmd.get_option_no_throw(flag);
    if (opt == nullptr)
      throw ConfigError("config file key '" + key +
                        "' matches no option of this subcommand");
    if (opt->count() > 0) continue;  // explicit flag wins
    opt->clear();
    if (!opt->add_result(value))
      throw ConfigError("config value rejected for '" + key + "'");
    opt->run_callback();
  }
}

ScanRecord preprocess_scan(const ScanRecord& raw,
                           const std::vector<Mask2D>* labels,
                           const PreprocessConfig& cfg) {
  if (labels && labels->size() != raw.slices.size())
    throw ConfigError("label volume has " + std::to_string(labels->size()) +
                      " slices, image volume has " +
                      std::to_string(raw.slices.size()));
  ScanRecord out;
  out.scan_id = raw.scan_id;
  out.spacing_row_mm = raw.spacing_row_mm;
  out.spacing_col_mm = raw.spacing_col_mm;
  out.spacing_slice_mm = raw.spacing_slice_mm;
  out.slices.reserve(raw.slices.size());
  for (std::size_t i = 0; i < raw.slices.size(); ++i) {
    Slice s;
    s.image = window_and_normalize(
        resize(raw.slices[i].image, cfg.target_h, cfg.target_w,
               Interp::Bilinear),
        cfg);
    if (labels) {
      if ((*labels)[i].height != raw.slices[i].image.height ||
          (*labels)[i].width != raw.slices[i].image.width)
        throw ConfigError("label slice " + std::to_string(i) +
                          " shape differs from image slice");
      s.truth = resize_mask((*labels)[i], cfg.target_h, cfg.target_w);
    }
    out.slices.push_back(std::move(s));
  }
  return out;
}

// Mean of windowed, range-mapped (mean-free) slices; the value a train fold
// would subtract.
double window_mean(const std::vector<const ScanRecord*>& raws,
                   const PreprocessConfig& cfg) {
  PreprocessConfig unmeaned = cfg;
  unmeaned.global_mean = 0.0;
  std::vector<Image2D> mapped;
  for (const ScanRecord* raw : raws)
    for (const Slice& s : raw->slices)
      mapped.push_back(window_and_normalize(
          resize(s.image, cfg.target_h, cfg.target_w, Interp::Bilinear),
          unmeaned));
  return compute_global_mean(mapped);
}

void write_manifest(const std::string& path, KvMap kv) {
  kv["tool"] = "polarseg";
  write_kv_file(path, kv);
}

std::string stem_of(const std::string& path) {
  fs::path p(path);
  std::string stem = p.filename().string();
  // Strip every extension so "a.img.nii" becomes "a.img".
  const std::size_t dot = stem.rfind('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return stem;
}

// ---------------------------------------------------------------------------
// Subcommand payloads.
// ---------------------------------------------------------------------------

int run_phantom(const PhantomSpec& spec, const std::string& out,
                const std::string& out_labels) {
  const ScanRecord scan = generate_phantom(spec);

  const NiftiVolume ref = make_reference(spec.width, spec.height,
                                         spec.slice_count, 1.0, 1.0, 1.0);
  std::vector<Image2D> slices;
  std::vector<Mask2D> labels;
  for (const Slice& s : scan.slices) {
    slices.push_back(s.image);
    labels.push_back(*s.truth);
  }
  write_float_volume(slices, ref, out);
  if (!out_labels.empty()) write_mask_volume(labels, ref, out_labels);

  KvMap kv;
  kv["cmd"] = "phantom";
  kv["seed"] = std::to_string(spec.seed);
  kv["scan_id"] = spec.scan_id;
  kv["height"] = std::to_string(spec.height);
  kv["width"] = std::to_string(spec.width);
  kv["slices"] = std::to_string(spec.slice_count);
  kv["min_components"] = std::to_string(spec.min_components);
  kv["max_components"] = std::to_string(spec.max_components);
  kv["min_axis"] = fmt(spec.min_axis);
  kv["max_axis"] = fmt(spec.max_axis);
  kv["inside_value"] = fmt(spec.inside_value);
  kv["outside_value"] = fmt(spec.outside_value);
  kv["noise_sd"] = fmt(spec.noise_sd);
  kv["out_digest"] = digest_hex(file_digest(out));
  if (!out_labels.empty())
    kv["out_labels_digest"] = digest_hex(file_digest(out_labels));
  write_manifest(out + ".manifest", kv);

  std::cout << "phantom: " << spec.slice_count << " slices -> " << out << "\n";
  return 0;
}

int run_preprocess(const std::string& input, const std::string& out,
                   const WindowOpts& window) {
  const ScanRecord raw = read_volume(input, stem_of(input));
  const PreprocessConfig cfg = window.to_config();

  std::vector<const ScanRecord*> raws{&raw};
  const double computed_mean = window_mean(raws, cfg);

  const ScanRecord scan = preprocess_scan(raw, nullptr, cfg);
  std::vector<Image2D> slices;
  for (const Slice& s : scan.slices) slices.push_back(s.image);

  const NiftiVolume ref = make_reference(
      cfg.target_w, cfg.target_h, static_cast<int>(slices.size()),
      raw.spacing_col_mm, raw.spacing_row_mm, raw.spacing_slice_mm);
  write_float_volume(slices, ref, out);

  KvMap kv;
  kv["cmd"] = "preprocess";
  kv["input"] = input;
  kv["input_digest"] = digest_hex(file_digest(input));
  window.record(kv);
  kv["computed_window_mean"] = fmt(computed_mean);
  kv["orientation"] = "as-stored";
  kv["out_digest"] = digest_hex(file_digest(out));
  write_manifest(out + ".manifest", kv);

  std::cout << "preprocess: " << slices.size() << " slices -> " << out
            << " (window mean " << computed_mean << ")\n";
  return 0;
}

int run_build_dataset(const std::vector<std::string>& inputs,
                      const std::vector<std::string>& label_paths,
                      const std::string& out_dir, const WindowOpts& window,
                      int radial_bins, int angular_bins, double jitter_prob,
                      int jitter_max_px, std::uint64_t seed) {
  if (inputs.size() != label_paths.size())
    throw ConfigError("need one --labels per --input");
  if (inputs.empty()) throw ConfigError("no inputs given");

  const PreprocessConfig pcfg = window.to_config();
  std::vector<ScanRecord> scans;
  KvMap kv;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ScanRecord raw = read_volume(inputs[i], stem_of(inputs[i]));
    const std::vector<Mask2D> labels = read_label_volume(label_paths[i]);
    scans.push_back(preprocess_scan(raw, &labels, pcfg));
    kv["input" + std::to_string(i) + "_digest"] =
        digest_hex(file_digest(inputs[i]));
    kv["labels" + std::to_string(i) + "_digest"] =
        digest_hex(file_digest(label_paths[i]));
  }

  AugmentConfig acfg;
  acfg.jitter_prob = jitter_prob;
  acfg.jitter_max_px = jitter_max_px;
  acfg.rng_seed = seed;
  const std::vector<PolarSample> samples =
      build_polar_dataset(scans, radial_bins, angular_bins, acfg);
  export_polar_dataset(samples, out_dir);

  kv["cmd"] = "build-polar-dataset";
  kv["seed"] = std::to_string(seed);
  window.record(kv);
  kv["radial_bins"] = std::to_string(radial_bins);
  kv["angular_bins"] = std::to_string(angular_bins);
  kv["jitter_prob"] = fmt(jitter_prob);
  kv["jitter_max_px"] = std::to_string(jitter_max_px);
  kv["sample_count"] = std::to_string(samples.size());
  write_manifest((fs::path(out_dir) / "run.manifest").string(), kv);

  std::cout << "build-polar-dataset: " << samples.size() << " samples -> "
            << out_dir << "\n";
  return 0;
}

void dump_debug(const std::string& dir, const std::string& scan_id,
                const std::vector<SliceResult>& results) {
  const fs::path base = fs::path(dir) / scan_id;
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw IoError("cannot create directory: " + base.string());

  for (std::size_t i = 0; i < results.size(); ++i) {
    const SliceResult& r = results[i];
    const std::string stem = (base / std::to_string(i)).string();
    write_pgm8(stem + ".rough.pgm", r.rough_mask);
    write_pgm8(stem + ".final.pgm", r.final_mask);
    write_pgm16(stem + ".confidence.pgm", stem + ".confidence.txt",
                r.confidence_map);
    for (std::size_t p = 0; p < r.per_component_predictions.size(); ++p)
      write_pgm16(stem + ".pass" + std::to_string(p) + ".pgm",
                  stem + ".pass" + std::to_string(p) + ".txt",
                  r.per_component_predictions[p].cart_probability);
  }
}

int run_segment(const std::string& input, const std::string& label_path,
                const std::string& backend_cart,
                const std::string& backend_polar, const std::string& out,
                const std::string& save_debug, const WindowOpts& window,
                const CascadeOpts& cascade, std::uint64_t seed, int threads) {
  const ScanRecord raw = read_volume(input, stem_of(input));
  std::vector<Mask2D> labels;
  const bool oracle_requested =
      backend_cart == "oracle" || backend_polar == "oracle";
  if (oracle_requested && label_path.empty())
    throw ConfigError("oracle backends need --labels");
  if (!label_path.empty()) labels = read_label_volume(label_path);

  const PreprocessConfig pcfg = window.to_config();
  const ScanRecord scan =
      preprocess_scan(raw, labels.empty() ? nullptr : &labels, pcfg);
  std::vector<ScanRecord> oracle_scans{scan};

  const FusionConfig cfg = cascade.to_config();
  auto cart = make_backend(backend_cart, InputSpace::Cartesian, &oracle_scans,
                           pcfg.target_h, pcfg.target_w);
  auto polar = make_backend(backend_polar, InputSpace::Polar, &oracle_scans,
                            cfg.radial_bins, cfg.angular_bins);

  const std::vector<SliceResult> results =
      segment_scan(scan, *cart, *polar, cfg, threads);

  std::vector<Mask2D> final_masks;
  for (const SliceResult& r : results) final_masks.push_back(r.final_mask);
  const NiftiVolume ref = make_reference(
      pcfg.target_w, pcfg.target_h, static_cast<int>(final_masks.size()),
      raw.spacing_col_mm, raw.spacing_row_mm, raw.spacing_slice_mm);
  write_mask_volume(final_masks, ref, out);

  if (!save_debug.empty()) dump_debug(save_debug, scan.scan_id, results);

  // threads is scheduling-only and deliberately absent: the manifest states
  // what was computed, which is identical at any worker count.
  KvMap kv;
  kv["cmd"] = "segment";
  kv["seed"] = std::to_string(seed);
  kv["input"] = input;
  kv["input_digest"] = digest_hex(file_digest(input));
  if (!label_path.empty())
    kv["labels_digest"] = digest_hex(file_digest(label_path));
  kv["backend_cart"] = backend_cart;
  kv["backend_polar"] = backend_polar;
  window.record(kv);
  cascade.record(kv);
  kv["out_digest"] = digest_hex(file_digest(out));
  write_manifest(out + ".manifest", kv);

  std::cout << "segment: " << results.size() << " slices -> " << out << "\n";
  return 0;
}

struct EvalInputs {
  std::vector<ScanRecord> raw_scans;
  std::vector<std::vector<Mask2D>> labels;
};

EvalInputs collect_eval_inputs(const std::string& input_dir,
                               KvMap& manifest) {
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".img.nii";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      stems.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty())
    throw ConfigError("no <scan>.img.nii volumes found in " + input_dir);

  EvalInputs in;
  for (const std::string& stem : stems) {
    const std::string img = (fs::path(input_dir) / (stem + ".img.nii")).string();
    const std::string lbl = (fs::path(input_dir) / (stem + ".lbl.nii")).string();
    if (!fs::exists(lbl))
      throw ConfigError("missing label volume for scan '" + stem + "': " + lbl);
    in.raw_scans.push_back(read_volume(img, stem));
    in.labels.push_back(read_label_volume(lbl));
    manifest["scan_" + stem + "_digest"] = digest_hex(file_digest(img));
    manifest["scan_" + stem + "_labels_digest"] = digest_hex(file_digest(lbl));
  }
  return in;
}

int run_evaluate(const std::string& input_dir, const std::string& backend_cart,
                 const std::string& backend_polar, const std::string& out_dir,
                 const WindowOpts& window, const CascadeOpts& cascade,
                 const std::string& mean_mode, int folds, std::uint64_t seed,
                 int threads) {
  KvMap kv;
  EvalInputs in = collect_eval_inputs(input_dir, kv);

  std::vector<std::string> ids;
  for (const ScanRecord& s : in.raw_scans) ids.push_back(s.scan_id);
  const FoldPlan plan = make_fold_plan(ids, folds, seed);
  const FusionConfig cfg = cascade.to_config();

  std::vector<ScanRow> rows;
  for (int fold = 0; fold < folds; ++fold) {
    // Held-out scans of this fold are preprocessed with either the fixed
    // mean or the mean computed from the training folds.
    PreprocessConfig pcfg = window.to_config();
    if (mean_mode == "train_fold") {
      std::vector<const ScanRecord*> train;
      for (const ScanRecord& s : in.raw_scans)
        if (plan.assignments.at(s.scan_id) != fold) train.push_back(&s);
      if (train.empty())
        throw ConfigError("fold " + std::to_string(fold) +
                          " has an empty training side");
      pcfg.global_mean = window_mean(train, pcfg);
      kv["fold" + std::to_string(fold) + "_train_mean"] =
          fmt(pcfg.global_mean);
    }

    std::vector<ScanRecord> held_out;
    for (std::size_t i = 0; i < in.raw_scans.size(); ++i)
      if (plan.assignments.at(in.raw_scans[i].scan_id) == fold)
        held_out.push_back(
            preprocess_scan(in.raw_scans[i], &in.labels[i], pcfg));
    if (held_out.empty()) continue;

    auto cart = make_backend(backend_cart, InputSpace::Cartesian, &held_out,
                             pcfg.target_h, pcfg.target_w);
    auto polar = make_backend(backend_polar, InputSpace::Polar, &held_out,
                              cfg.radial_bins, cfg.angular_bins);

    FoldPlan fold_only;
    fold_only.fold_count = folds;
    for (const ScanRecord& s : held_out)
      fold_only.assignments[s.scan_id] = fold;
    const Report part =
        evaluate_scans(held_out, fold_only, *cart, *polar, cfg, threads);
    for (const ScanRow& row : part.rows) rows.push_back(row);
  }

  std::sort(rows.begin(), rows.end(),
            [](const ScanRow& a, const ScanRow& b) {
              return a.scan_id < b.scan_id;
            });
  const Report report = assemble_report(std::move(rows));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "report.csv", std::ios::binary);
    f << report.to_csv();
    if (!f) throw IoError("short write: report.csv");
  }
  {
    std::ofstream f(fs::path(out_dir) / "summary.txt", std::ios::binary);
    f << report.summary_kv();
    if (!f) throw IoError("short write: summary.txt");
  }
  {
    std::ofstream f(fs::path(out_dir) / "boxplot.csv", std::ios::binary);
    f << report.boxplot_csv();
    if (!f) throw IoError("short write: boxplot.csv");
  }

  kv["cmd"] = "evaluate";
  kv["seed"] = std::to_string(seed);
  kv["input_dir"] = input_dir;
  kv["backend_cart"] = backend_cart;
  kv["backend_polar"] = backend_polar;
  kv["folds"] = std::to_string(folds);
  kv["mean_mode"] = mean_mode;
  window.record(kv);
  cascade.record(kv);
  write_manifest((fs::path(out_dir) / "run.manifest").string(), kv);

  std::cout << "evaluate: " << report.rows.size()
            << " scans, mean dice " << report.grand.mean_dice << " -> "
            << out_dir << "\n";
  return 0;
}

int run_sweep(const std::string& input_dir, const std::string& backend_cart,
              const std::string& backend_polar, const std::string& out_dir,
              const WindowOpts& window, const CascadeOpts& cascade,
              const std::string& grid_arg, std::uint64_t seed, int threads) {
  KvMap kv;
  EvalInputs in = collect_eval_inputs(input_dir, kv);

  std::vector<double> grid;
  std::istringstream gs(grid_arg);
  std::string tok;
  while (std::getline(gs, tok, ',')) {
    try {
      grid.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad grid entry '" + tok + "'");
    }
  }
  if (grid.empty()) throw ConfigError("empty threshold grid");

  const PreprocessConfig pcfg = window.to_config();
  const FusionConfig cfg = cascade.to_config();

  std::vector<ScanRecord> scans;
  for (std::size_t i = 0; i < in.raw_scans.size(); ++i)
    scans.push_back(preprocess_scan(in.raw_scans[i], &in.labels[i], pcfg));

  auto cart = make_backend(backend_cart, InputSpace::Cartesian, &scans,
                           pcfg.target_h, pcfg.target_w);
  auto polar = make_backend(backend_polar, InputSpace::Polar, &scans,
                            cfg.radial_bins, cfg.angular_bins);

  // One inference pass; the sweep re-thresholds the stored confidence maps.
  std::vector<Image2D> maps;
  std::vector<Mask2D> truths;
  for (const ScanRecord& scan : scans) {
    const std::vector<SliceResult> results =
        segment_scan(scan, *cart, *polar, cfg, threads);
    for (std::size_t i = 0; i < results.size(); ++i) {
      maps.push_back(results[i].confidence_map);
      truths.push_back(*scan.slices[i].truth);
    }
  }
  const SweepResult sw =
      sweep_hysteresis(maps, truths, grid, cfg.hyst_low, cfg.connectivity);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "sweep.csv", std::ios::binary);
    f << "hyst_high,dice\n";
    for (const auto& [high, dice] : sw.curve)
      f << fmt(high) << "," << fmt(dice) << "\n";
    if (!f) throw IoError("short write: sweep.csv");
  }

  kv["cmd"] = "sweep";
  kv["seed"] = std::to_string(seed);
  kv["input_dir"] = input_dir;
  kv["backend_cart"] = backend_cart;
  kv["backend_polar"] = backend_polar;
  kv["grid"] = grid_arg;
  kv["best_high"] = fmt(sw.best_high);
  window.record(kv);
  cascade.record(kv);
  write_manifest((fs::path(out_dir) / "run.manifest").string(), kv);

  std::cout << "sweep: best hyst_high " << sw.best_high << " -> " << out_dir
            << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"cascaded polar-transform segmentation pipeline"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int threads = 1;
  std::string config_path;

  // phantom ---------------------------------------------------------------
  CLI::App* phantom = app.add_subcommand(
      "phantom", "generate a synthetic scan with analytic ground truth");
  PhantomSpec spec;
  std::string phantom_out, phantom_out_labels;
  phantom->add_option("--seed", seed, "run seed");
  phantom->add_option("--config", config_path, "key=value defaults file");
  phantom->add_option("--out", phantom_out, "output image volume (.nii)")
      ->required();
  phantom->add_option("--out-labels", phantom_out_labels,
                      "output label volume (.nii)");
  phantom->add_option("--scan-id", spec.scan_id, "scan identifier");
  phantom->add_option("--height", spec.height, "slice height");
  phantom->add_option("--width", spec.width, "slice width");
  phantom->add_option("--slices", spec.slice_count, "slice count");
  phantom->add_option("--min-components", spec.min_components,
                      "fewest ellipses per slice");
  phantom->add_option("--max-components", spec.max_components,
                      "most ellipses per slice");
  phantom->add_option("--min-axis", spec.min_axis, "smallest semi-axis (px)");
  phantom->add_option("--max-axis", spec.max_axis, "largest semi-axis (px)");
  phantom->add_option("--inside", spec.inside_value, "ellipse intensity (HU)");
  phantom->add_option("--outside", spec.outside_value,
                      "background intensity (HU)");
  phantom->add_option("--noise-sd", spec.noise_sd, "Gaussian noise sd (HU)");

  // preprocess -------------------------------------------------------------
  CLI::App* preprocess = app.add_subcommand(
      "preprocess", "window, normalize and resize a volume");
  std::string pre_input, pre_out;
  WindowOpts pre_window;
  preprocess->add_option("--seed", seed, "run seed");
  preprocess->add_option("--config", config_path, "key=value defaults file");
  preprocess->add_option("--input", pre_input, "input volume (.nii)")
      ->required();
  preprocess->add_option("--out", pre_out, "output volume (.nii)")->required();
  pre_window.attach(*preprocess);

  // build-polar-dataset ------------------------------------------------------
  CLI::App* build = app.add_subcommand(
      "build-polar-dataset",
      "one polar sample per ground-truth component, exported as PGM");
  std::vector<std::string> build_inputs, build_labels;
  std::string build_out_dir;
  WindowOpts build_window;
  int build_radial = 256, build_angular = 256, build_jitter_px = 3;
  double build_jitter_prob = 0.3;
  build->add_option("--seed", seed, "run seed");
  build->add_option("--config", config_path, "key=value defaults file");
  build->add_option("--input", build_inputs, "image volume (repeatable)")
      ->required();
  build->add_option("--labels", build_labels, "label volume (repeatable)")
      ->required();
  build->add_option("--out-dir", build_out_dir, "dataset directory")
      ->required();
  build_window.attach(*build);
  build->add_option("--radial-bins", build_radial, "polar raster rows");
  build->add_option("--angular-bins", build_angular, "polar raster columns");
  build->add_option("--jitter-prob", build_jitter_prob,
                    "origin jitter probability");
  build->add_option("--jitter-max-px", build_jitter_px,
                    "max origin jitter (px)");

  // segment -----------------------------------------------------------------
  CLI::App* segment = app.add_subcommand(
      "segment", "run the full cascade on one volume");
  std::string seg_input, seg_labels, seg_out, seg_debug;
  std::string seg_cart = "classical", seg_polar = "classical";
  WindowOpts seg_window;
  CascadeOpts seg_cascade;
  segment->add_option("--seed", seed, "run seed");
  segment->add_option("--config", config_path, "key=value defaults file");
  segment->add_option("--threads", threads, "worker threads");
  segment->add_option("--input", seg_input, "input volume (.nii)")
      ->required();
  segment->add_option("--labels", seg_labels,
                      "label volume (needed by oracle backends)");
  segment->add_option("--backend-cart", seg_cart,
                      "oracle|classical[:low,high,r]|model:<path>");
  segment->add_option("--backend-polar", seg_polar,
                      "oracle|classical[:low,high,r]|model:<path>");
  segment->add_option("--out", seg_out, "output mask volume (.nii)")
      ->required();
  segment->add_option("--save-debug", seg_debug,
                      "directory for per-slice PGM dumps");
  seg_window.attach(*segment);
  seg_cascade.attach(*segment);

  // evaluate ------------------------------------------------------------------
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "cross-validated metrics over a directory of scans");
  std::string eval_dir, eval_out = "eval";
  std::string eval_cart = "classical", eval_polar = "classical";
  std::string eval_mean_mode = "fixed";
  int eval_folds = 3;
  WindowOpts eval_window;
  CascadeOpts eval_cascade;
  evaluate->add_option("--seed", seed, "run seed");
  evaluate->add_option("--config", config_path, "key=value defaults file");
  evaluate->add_option("--threads", threads, "worker threads");
  evaluate
      ->add_option("--input-dir", eval_dir,
                   "directory of <scan>.img.nii / <scan>.lbl.nii pairs")
      ->required();
  evaluate->add_option("--backend-cart", eval_cart, "cartesian backend spec");
  evaluate->add_option("--backend-polar", eval_polar, "polar backend spec");
  evaluate->add_option("--out-dir", eval_out, "report directory");
  evaluate->add_option("--folds", eval_folds, "fold count");
  evaluate
      ->add_option("--mean-mode", eval_mean_mode,
                   "global mean source: fixed|train_fold")
      ->check(CLI::IsMember({"fixed", "train_fold"}));
  eval_window.attach(*evaluate);
  eval_cascade.attach(*evaluate);

  // sweep ----------------------------------------------------------------------
  CLI::App* sweep = app.add_subcommand(
      "sweep", "dice curve over a hysteresis threshold grid");
  std::string sweep_dir, sweep_out = "sweep";
  std::string sweep_cart = "classical", sweep_polar = "classical";
  std::string sweep_grid = "0.2,0.3,0.4,0.5";
  WindowOpts sweep_window;
  CascadeOpts sweep_cascade;
  sweep->add_option("--seed", seed, "run seed");
  sweep->add_option("--config", config_path, "key=value defaults file");
  sweep->add_option("--threads", threads, "worker threads");
  sweep
      ->add_option("--input-dir", sweep_dir,
                   "directory of <scan>.img.nii / <scan>.lbl.nii pairs")
      ->required();
  sweep->add_option("--backend-cart", sweep_cart, "cartesian backend spec");
  sweep->add_option("--backend-polar", sweep_polar, "polar backend spec");
  sweep->add_option("--out-dir", sweep_out, "report directory");
  sweep->add_option("--grid", sweep_grid, "comma-separated high thresholds");
  sweep_window.attach(*sweep);
  sweep_cascade.attach(*sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the diagnostic and usage hint
    return 2;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(*active, config_path);

    if (active == phantom) {
      spec.seed = seed;
      return run_phantom(spec, phantom_out, phantom_out_labels);
    }
    if (active == preprocess)
      return run_preprocess(pre_input, pre_out, pre_window);
    if (active == build)
      return run_build_dataset(build_inputs, build_labels, build_out_dir,
                               build_window, build_radial, build_angular,
                               build_jitter_prob, build_jitter_px, seed);
    if (active == segment)
      return run_segment(seg_input, seg_labels, seg_cart, seg_polar, seg_out,
                         seg_debug, seg_window, seg_cascade, seed, threads);
    if (active == evaluate)
      return run_evaluate(eval_dir, eval_cart, eval_polar, eval_out,
                          eval_window, eval_cascade, eval_mean_mode,
                          eval_folds, seed, threads);
    if (active == sweep)
      return run_sweep(sweep_dir, sweep_cart, sweep_polar, sweep_out,
                       sweep_window, sweep_cascade, sweep_grid, seed,
                       threads);
    std::cerr << "polarseg: no subcommand dispatched\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "polarseg: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace polarseg
