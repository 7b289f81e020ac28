#include "polarseg/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "polarseg/ccomp.hpp"
#include "polarseg/errors.hpp"
#include "polarseg/rng.hpp"

namespace polarseg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

double ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return 1.0;  // empty-empty convention
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ConfusionCounts confusion(const Mask2D& pred, const Mask2D& truth) {
  pred.validate();
  truth.validate();
  require(pred.same_shape(truth), "confusion: shape mismatch");

  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool t = truth.data[i] != 0;
    if (p && t)
      ++c.tp;
    else if (p && !t)
      ++c.fp;
    else if (!p && t)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(const std::vector<Mask2D>& pred,
                          const std::vector<Mask2D>& truth) {
  require(pred.size() == truth.size(), "confusion: stack length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) c += confusion(pred[i], truth[i]);
  return c;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.dice = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  return m;
}

FoldPlan make_fold_plan(const std::vector<std::string>& scan_ids,
                        int fold_count, std::uint64_t seed) {
  require(fold_count >= 1, "make_fold_plan: fold_count must be >= 1");
  require(!scan_ids.empty(), "make_fold_plan: no scans");

  std::vector<std::string> ids = scan_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  require(ids.size() == scan_ids.size(), "make_fold_plan: duplicate scan ids");

  // Fisher-Yates over the sorted list, then round-robin: deterministic for a
  // seed and independent of the caller's ordering.
  Rng rng(mix_seed(seed, hash_string("fold-plan")));
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(ids[i - 1], ids[j]);
  }

  FoldPlan plan;
  plan.fold_count = fold_count;
  for (std::size_t i = 0; i < ids.size(); ++i)
    plan.assignments[ids[i]] = static_cast<int>(i % fold_count);
  return plan;
}

double quantile_linear(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), "quantile_linear: empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile_linear: q outside [0,1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

std::pair<double, double> mean_sd(const std::vector<double>& values) {
  require(!values.empty(), "mean_sd: empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

BoxStats box_stats(std::vector<double> values) {
  require(!values.empty(), "box_stats: empty sample");
  std::sort(values.begin(), values.end());

  BoxStats b;
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile_linear(values, 0.25);
  b.median = quantile_linear(values, 0.5);
  b.q3 = quantile_linear(values, 0.75);

  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.max;
  b.whisker_high = b.min;
  for (double v : values) {
    if (v >= lo_fence) b.whisker_low = std::min(b.whisker_low, v);
    if (v <= hi_fence) b.whisker_high = std::max(b.whisker_high, v);
    if (v < lo_fence || v > hi_fence) b.outliers.push_back(v);
  }
  return b;
}

Report evaluate_scans(const std::vector<ScanRecord>& scans,
                      const FoldPlan& plan, SegmenterBackend& cart_backend,
                      SegmenterBackend& polar_backend, const FusionConfig& cfg,
                      int threads) {
  std::vector<ScanRow> rows;
  rows.reserve(scans.size());

  for (const ScanRecord& scan : scans) {
    const auto fold_it = plan.assignments.find(scan.scan_id);
    if (fold_it == plan.assignments.end())
      throw ConfigError("fold plan does not cover scan '" + scan.scan_id + "'");
    require(scan.has_truth(), "evaluate_scans: scan without ground truth");

    const std::vector<SliceResult> results =
        segment_scan(scan, cart_backend, polar_backend, cfg, threads);

    ScanRow row;
    row.scan_id = scan.scan_id;
    row.fold = fold_it->second;
    double slice_dice_sum = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const ConfusionCounts c =
          confusion(results[i].final_mask, *scan.slices[i].truth);
      row.counts += c;
      slice_dice_sum += metrics_from_counts(c).dice;
    }
    row.volume = metrics_from_counts(row.counts);
    row.slice_mean_dice = results.empty()
                              ? 1.0
                              : slice_dice_sum /
                                    static_cast<double>(results.size());
    rows.push_back(std::move(row));
  }
  return assemble_report(std::move(rows));
}

namespace {

Summary summarize(const std::vector<const ScanRow*>& rows) {
  Summary s;
  if (rows.empty()) return s;
  std::vector<double> dice, iou, prec, rec, slice_dice;
  for (const ScanRow* r : rows) {
    dice.push_back(r->volume.dice);
    iou.push_back(r->volume.iou);
    prec.push_back(r->volume.precision);
    rec.push_back(r->volume.recall);
    slice_dice.push_back(r->slice_mean_dice);
  }
  const auto [mean, sd] = mean_sd(dice);
  s.mean_dice = mean;
  s.sd_dice = sd;
  s.mean_iou = mean_sd(iou).first;
  s.mean_precision = mean_sd(prec).first;
  s.mean_recall = mean_sd(rec).first;
  s.mean_slice_dice = mean_sd(slice_dice).first;
  return s;
}

}  // namespace

Report assemble_report(std::vector<ScanRow> rows) {
  Report report;
  report.rows = std::move(rows);
  if (report.rows.empty()) return report;

  std::map<int, std::vector<const ScanRow*>> by_fold;
  std::vector<const ScanRow*> all;
  std::vector<double> dice;
  for (const ScanRow& row : report.rows) {
    by_fold[row.fold].push_back(&row);
    all.push_back(&row);
    dice.push_back(row.volume.dice);
  }
  for (const auto& [fold, fold_rows] : by_fold)
    report.per_fold[fold] = summarize(fold_rows);
  report.grand = summarize(all);
  report.dice_box = box_stats(dice);
  return report;
}

std::string Report::to_csv() const {
  std::ostringstream os;
  os << "scan_id,fold,tp,fp,fn,tn,dice,iou,precision,recall,"
        "slice_mean_dice\n";
  for (const ScanRow& r : rows) {
    os << r.scan_id << "," << r.fold << "," << r.counts.tp << ","
       << r.counts.fp << "," << r.counts.fn << "," << r.counts.tn << ","
       << fmt(r.volume.dice) << "," << fmt(r.volume.iou) << ","
       << fmt(r.volume.precision) << "," << fmt(r.volume.recall) << ","
       << fmt(r.slice_mean_dice) << "\n";
  }
  return os.str();
}

std::string Report::summary_kv() const {
  std::ostringstream os;
  os << "mean_dice=" << fmt(grand.mean_dice) << "\n"
     << "sd_dice=" << fmt(grand.sd_dice) << "\n"
     << "mean_iou=" << fmt(grand.mean_iou) << "\n"
     << "mean_precision=" << fmt(grand.mean_precision) << "\n"
     << "mean_recall=" << fmt(grand.mean_recall) << "\n"
     << "mean_slice_dice=" << fmt(grand.mean_slice_dice) << "\n"
     << "scan_count=" << rows.size() << "\n"
     << "empty_denominator_convention=1.0\n";
  for (const auto& [fold, s] : per_fold) {
    os << "fold" << fold << "_mean_dice=" << fmt(s.mean_dice) << "\n"
       << "fold" << fold << "_sd_dice=" << fmt(s.sd_dice) << "\n"
       << "fold" << fold << "_mean_recall=" << fmt(s.mean_recall) << "\n";
  }
  return os.str();
}

std::string Report::boxplot_csv() const {
  std::ostringstream os;
  os << "metric,min,q1,median,q3,max,whisker_low,whisker_high,outliers\n";
  os << "dice," << fmt(dice_box.min) << "," << fmt(dice_box.q1) << ","
     << fmt(dice_box.median) << "," << fmt(dice_box.q3) << ","
     << fmt(dice_box.max) << "," << fmt(dice_box.whisker_low) << ","
     << fmt(dice_box.whisker_high) << ",";
  for (std::size_t i = 0; i < dice_box.outliers.size(); ++i) {
    if (i) os << ";";
    os << fmt(dice_box.outliers[i]);
  }
  os << "\n";
  return os.str();
}

SweepResult sweep_hysteresis(const std::vector<Image2D>& confidence_maps,
                             const std::vector<Mask2D>& truths,
                             const std::vector<double>& grid, double hyst_low,
                             int connectivity) {
  require(!grid.empty(), "sweep_hysteresis: empty grid");
  require(confidence_maps.size() == truths.size(),
          "sweep_hysteresis: map/truth count mismatch");
  for (double h : grid)
    require(h >= 0.0 && h <= 1.0, "sweep_hysteresis: threshold outside [0,1]");

  SweepResult result;
  bool first = true;
  double best_dice = 0.0;
  for (double high : grid) {
    ConfusionCounts counts;
    for (std::size_t i = 0; i < confidence_maps.size(); ++i) {
      const Mask2D pred =
          hysteresis_threshold(confidence_maps[i], hyst_low, high,
                               connectivity);
      counts += confusion(pred, truths[i]);
    }
    const double dice = metrics_from_counts(counts).dice;
    result.curve.emplace_back(high, dice);
    if (first || dice > best_dice ||
        (dice == best_dice && high > result.best_high)) {
      best_dice = dice;
      result.best_high = high;
      first = false;
    }
  }
  return result;
}

}  // namespace polarseg
