#include "polarseg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "polarseg/ccomp.hpp"
#include "polarseg/errors.hpp"

namespace polarseg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

int snap(double x) { return static_cast<int>(std::floor(x + 0.5)); }

Image2D predict_checked(SegmenterBackend& backend, BackendInput input) {
  std::vector<BackendInput> batch;
  batch.push_back(std::move(input));
  return std::move(predict(backend, batch)[0]);
}

}  // namespace

void FusionConfig::validate() const {
  require(origin_weight >= other_weight && other_weight > 0.0,
          "FusionConfig: need origin_weight >= other_weight > 0");
  require(hyst_low >= 0.0 && hyst_low <= hyst_high && hyst_high <= 1.0,
          "FusionConfig: need 0 <= hyst_low <= hyst_high <= 1");
  require(connectivity == 4 || connectivity == 8,
          "FusionConfig: connectivity must be 4 or 8");
  require(min_component_area >= 0,
          "FusionConfig: min_component_area must be >= 0");
  require(binarize_threshold >= 0.0 && binarize_threshold <= 1.0,
          "FusionConfig: binarize_threshold must be in [0,1]");
  require(radial_bins >= 2 && angular_bins >= 2,
          "FusionConfig: polar bins must be >= 2");
}

Mask2D rough_segment(const Image2D& slice, SegmenterBackend& cart_backend,
                     const SliceRef& ref, const FusionConfig& cfg) {
  cfg.validate();
  require(cart_backend.input_space() == InputSpace::Cartesian,
          "rough_segment: cart_backend must be cartesian");

  const Image2D prob =
      predict_checked(cart_backend, BackendInput{slice, ref, std::nullopt});
  const Mask2D raw = binarize(prob, cfg.binarize_threshold);
  const LabelMap lm =
      filter_small(label_components(raw, cfg.connectivity),
                   cfg.min_component_area);

  Mask2D out(raw.height, raw.width);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = lm.labels[i] > 0 ? 1 : 0;
  return out;
}

std::vector<PolarPass> polar_passes(const Image2D& slice, const Mask2D& rough,
                                    SegmenterBackend& polar_backend,
                                    const SliceRef& ref,
                                    const FusionConfig& cfg) {
  cfg.validate();
  require(slice.height == rough.height && slice.width == rough.width,
          "polar_passes: slice and rough mask shape mismatch");
  require(polar_backend.input_space() == InputSpace::Polar,
          "polar_passes: polar_backend must be polar");

  const LabelMap lm = label_components(rough, cfg.connectivity);
  std::vector<PolarPass> passes;
  passes.reserve(lm.components.size());

  for (const Component& comp : lm.components) {
    PolarPass pass;
    pass.geometry =
        default_geometry(comp.centroid_row, comp.centroid_col, slice.height,
                         slice.width, cfg.radial_bins, cfg.angular_bins);
    const Image2D polar_img = cart_to_polar(slice, pass.geometry, 0.0f);
    const Image2D polar_prob = predict_checked(
        polar_backend, BackendInput{polar_img, ref, pass.geometry});
    pass.cart_probability = polar_to_cart(polar_prob, pass.geometry,
                                          slice.height, slice.width, 0.0f);
    // Bilinear resampling cannot exceed the input range; the clamp makes
    // the [0,1] guarantee explicit against float rounding.
    clamp01(pass.cart_probability);
    passes.push_back(std::move(pass));
  }
  return passes;
}

Image2D fuse(const std::vector<PolarPass>& predictions,
             const FusionConfig& cfg) {
  cfg.validate();
  require(!predictions.empty(), "fuse: empty prediction list");
  const int h = predictions[0].cart_probability.height;
  const int w = predictions[0].cart_probability.width;
  for (const PolarPass& p : predictions)
    require(p.cart_probability.height == h && p.cart_probability.width == w,
            "fuse: prediction shape mismatch");

  Image2D sum(h, w);
  for (const PolarPass& pred : predictions) {
    const Mask2D bin = binarize(pred.cart_probability, cfg.binarize_threshold);
    const LabelMap lm = label_components(bin, cfg.connectivity);
    if (lm.components.empty()) continue;

    const int orow = std::clamp(snap(pred.geometry.origin_row), 0, h - 1);
    const int ocol = std::clamp(snap(pred.geometry.origin_col), 0, w - 1);
    const std::int32_t origin_label = lm.at(orow, ocol);

    for (std::size_t i = 0; i < sum.data.size(); ++i) {
      const std::int32_t label = lm.labels[i];
      if (label == 0) continue;
      sum.data[i] += static_cast<float>(
          label == origin_label ? cfg.origin_weight : cfg.other_weight);
    }
  }

  double denom = 0.0;
  if (cfg.norm == FusionNorm::OwnMax) {
    for (float v : sum.data) denom = std::max(denom, static_cast<double>(v));
  } else {
    denom = cfg.origin_weight +
            (static_cast<double>(predictions.size()) - 1.0) * cfg.other_weight;
  }
  if (denom <= 0.0) return Image2D(h, w);

  for (float& v : sum.data) v = static_cast<float>(v / denom);
  if (cfg.norm == FusionNorm::TheoreticalMax) clamp01(sum);
  return sum;
}

SliceResult segment_slice(const Image2D& slice, SegmenterBackend& cart_backend,
                          SegmenterBackend& polar_backend, const SliceRef& ref,
                          const FusionConfig& cfg) {
  SliceResult result;
  result.rough_mask = rough_segment(slice, cart_backend, ref, cfg);
  result.confidence_map = Image2D(slice.height, slice.width);
  result.final_mask = Mask2D(slice.height, slice.width);

  if (result.rough_mask.foreground_count() == 0) return result;

  result.per_component_predictions =
      polar_passes(slice, result.rough_mask, polar_backend, ref, cfg);
  result.confidence_map = fuse(result.per_component_predictions, cfg);
  result.final_mask = hysteresis_threshold(result.confidence_map, cfg.hyst_low,
                                           cfg.hyst_high, cfg.connectivity);
  return result;
}

std::vector<SliceResult> segment_scan(const ScanRecord& scan,
                                      SegmenterBackend& cart_backend,
                                      SegmenterBackend& polar_backend,
                                      const FusionConfig& cfg,
                                      int threads) {
  cfg.validate();
  const int n = static_cast<int>(scan.slices.size());
  std::vector<SliceResult> results(n);
  if (n == 0) return results;

  // Backends that are not thread safe share one lock; results land in
  // per-slice slots so output never depends on scheduling.
  const bool serialize_backends =
      !cart_backend.thread_safe() || !polar_backend.thread_safe();
  std::mutex backend_mutex;

  auto run_slice = [&](int i) {
    const SliceRef ref{scan.scan_id, i};
    if (serialize_backends) {
      std::lock_guard<std::mutex> lock(backend_mutex);
      results[i] = segment_slice(scan.slices[i].image, cart_backend,
                                 polar_backend, ref, cfg);
    } else {
      results[i] = segment_slice(scan.slices[i].image, cart_backend,
                                 polar_backend, ref, cfg);
    }
  };

  if (threads <= 1) {
    for (int i = 0; i < n; ++i) {
      try {
        run_slice(i);
      } catch (const std::exception& e) {
        throw BackendError("slice " + std::to_string(i) + ": " + e.what());
      }
    }
    return results;
  }

  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::string first_error;
  int first_error_slice = -1;

  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        run_slice(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error_slice < 0 || i < first_error_slice) {
          first_error_slice = i;
          first_error = e.what();
        }
      }
    }
  };

  std::vector<std::thread> pool;
  const int nworkers = std::min(threads, n);
  pool.reserve(nworkers);
  for (int t = 0; t < nworkers; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  if (first_error_slice >= 0)
    throw BackendError("slice " + std::to_string(first_error_slice) + ": " +
                       first_error);
  return results;
}

}  // namespace polarseg
