#ifndef POLARSEG_EVALKIT_HPP
#define POLARSEG_EVALKIT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "polarseg/image.hpp"
#include "polarseg/pipeline.hpp"
#include "polarseg/scan.hpp"

namespace polarseg {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    tn += other.tn;
    return *this;
  }
};

// Ratios in [0,1]; any 0/0 denominator scores 1.0 (empty prediction against
// empty truth is perfect agreement).
struct Metrics {
  double dice = 1.0;
  double iou = 1.0;
  double precision = 1.0;
  double recall = 1.0;
};

ConfusionCounts confusion(const Mask2D& pred, const Mask2D& truth);
ConfusionCounts confusion(const std::vector<Mask2D>& pred,
                          const std::vector<Mask2D>& truth);

Metrics metrics_from_counts(const ConfusionCounts& c);

// fold_count folds over sorted scan IDs, seeded shuffle, round-robin
// assignment. Fold sizes differ by at most 1.
struct FoldPlan {
  int fold_count = 3;
  std::map<std::string, int> assignments;
};

FoldPlan make_fold_plan(const std::vector<std::string>& scan_ids,
                        int fold_count, std::uint64_t seed);

// One evaluated scan: volume-level counts (summed over slices), the derived
// metrics, and the mean of per-slice dice as a second interpretation.
struct ScanRow {
  std::string scan_id;
  int fold = 0;
  ConfusionCounts counts;
  Metrics volume;
  double slice_mean_dice = 1.0;
};

struct Summary {
  double mean_dice = 1.0;
  double sd_dice = 0.0;
  double mean_iou = 1.0;
  double mean_precision = 1.0;
  double mean_recall = 1.0;
  double mean_slice_dice = 1.0;
};

// Tukey box-plot statistics: quartiles by linear interpolation, whiskers at
// the most extreme points within 1.5 IQR of the quartiles.
struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

struct Report {
  std::vector<ScanRow> rows;
  std::map<int, Summary> per_fold;
  Summary grand;
  BoxStats dice_box;

  std::string to_csv() const;
  std::string summary_kv() const;
  std::string boxplot_csv() const;
};

// Quantile with linear interpolation between order statistics
// (position q * (n - 1)). `sorted` must be ascending and non-empty.
double quantile_linear(const std::vector<double>& sorted, double q);

// Two-pass mean and sample standard deviation (n - 1); sd is 0 for n < 2.
std::pair<double, double> mean_sd(const std::vector<double>& values);

BoxStats box_stats(std::vector<double> values);

// Segments every scan with the given backends and assembles the report.
// Backends here are fold-independent (oracle/classical); the fold plan only
// labels rows, so the grand mean is invariant to fold permutation.
Report evaluate_scans(const std::vector<ScanRecord>& scans,
                      const FoldPlan& plan, SegmenterBackend& cart_backend,
                      SegmenterBackend& polar_backend, const FusionConfig& cfg,
                      int threads = 1);

// Builds a report from already-computed per-scan counts (used by both
// evaluate_scans and the CLI evaluate path).
Report assemble_report(std::vector<ScanRow> rows);

struct SweepResult {
  double best_high = 0.0;
  std::vector<std::pair<double, double>> curve;  // (high, dice)
};

// Re-thresholds stored confidence maps over the grid; no re-inference.
// Ties break toward the larger threshold.
SweepResult sweep_hysteresis(const std::vector<Image2D>& confidence_maps,
                             const std::vector<Mask2D>& truths,
                             const std::vector<double>& grid, double hyst_low,
                             int connectivity);

}  // namespace polarseg

#endif  // POLARSEG_EVALKIT_HPP
