#include "polarseg/segmenter.hpp"

#include <cmath>
#include <cstdio>

#include "polarseg/ccomp.hpp"
#include "polarseg/errors.hpp"
#include "polarseg/onnx.hpp"

namespace polarseg {

std::vector<Image2D> predict(SegmenterBackend& backend,
                             const std::vector<BackendInput>& batch) {
  std::vector<Image2D> out;
  out.reserve(batch.size());
  for (const BackendInput& input : batch) {
    input.image.validate();
    if (backend.input_space() == InputSpace::Polar &&
        !input.geometry.has_value())
      throw ConfigError("polar backend '" + backend.name() +
                        "' needs request geometry");

    Image2D prob = backend.predict_one(input);
    if (!prob.same_shape(input.image))
      throw BackendError("backend '" + backend.name() +
                         "' returned a map with the wrong shape");
    for (float v : prob.data) {
      if (!std::isfinite(v))
        throw BackendError("backend '" + backend.name() +
                           "' returned a non-finite value");
      if (v < 0.0f || v > 1.0f)
        throw BackendError("backend '" + backend.name() +
                           "' returned a probability outside [0,1]");
    }
    out.push_back(std::move(prob));
  }
  return out;
}

OracleBackend::OracleBackend(InputSpace space,
                             const std::vector<ScanRecord>& scans)
    : space_(space) {
  for (const ScanRecord& scan : scans) {
    for (std::size_t si = 0; si < scan.slices.size(); ++si) {
      if (!scan.slices[si].truth.has_value()) continue;
      truth_[{scan.scan_id, static_cast<int>(si)}] = *scan.slices[si].truth;
    }
  }
}

Image2D OracleBackend::predict_one(const BackendInput& input) {
  const auto it = truth_.find({input.ref.scan_id, input.ref.slice_index});
  if (it == truth_.end())
    throw BackendError("oracle has no ground truth for scan '" +
                       input.ref.scan_id + "' slice " +
                       std::to_string(input.ref.slice_index));
  const Mask2D& mask = it->second;

  if (space_ == InputSpace::Cartesian) {
    if (mask.height != input.image.height || mask.width != input.image.width)
      throw BackendError("oracle truth shape does not match request");
    return mask_to_image(mask);
  }

  // Polar query: resample the stored cartesian truth with the request's
  // geometry, so origin and bin bookkeeping are exercised for real.
  if (!input.geometry.has_value())
    throw ConfigError("polar oracle request without geometry");
  return mask_to_image(cart_to_polar_mask(mask, *input.geometry));
}

Image2D classical_segment(const Image2D& img, const ClassicalParams& params) {
  img.validate();

  Mask2D band(img.height, img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    band.data[i] = (img.data[i] >= params.intensity_low &&
                    img.data[i] <= params.intensity_high)
                       ? 1
                       : 0;

  if (params.opening_radius > 0) {
    // Binary opening with a disk: erosion then dilation, both with the same
    // offsets.
    const int rad = params.opening_radius;
    std::vector<std::pair<int, int>> disk;
    for (int dr = -rad; dr <= rad; ++dr)
      for (int dc = -rad; dc <= rad; ++dc)
        if (dr * dr + dc * dc <= rad * rad) disk.emplace_back(dr, dc);

    Mask2D eroded(img.height, img.width);
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        bool all = true;
        for (const auto& [dr, dc] : disk) {
          const int nr = r + dr;
          const int nc = c + dc;
          if (nr < 0 || nr >= img.height || nc < 0 || nc >= img.width ||
              !band.at(nr, nc)) {
            all = false;
            break;
          }
        }
        eroded.at(r, c) = all ? 1 : 0;
      }
    }

    Mask2D opened(img.height, img.width);
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        if (!eroded.at(r, c)) continue;
        for (const auto& [dr, dc] : disk) {
          const int nr = r + dr;
          const int nc = c + dc;
          if (nr >= 0 && nr < img.height && nc >= 0 && nc < img.width)
            opened.at(nr, nc) = 1;
        }
      }
    }
    band = std::move(opened);
  }
  return mask_to_image(band);
}

Image2D ClassicalBackend::predict_one(const BackendInput& input) {
  return classical_segment(input.image, params_);
}

struct ExternalModelBackend::Impl {
  onnx::Executor executor;
  bool squash_logits = false;

  explicit Impl(onnx::Model model) : executor(std::move(model)) {}
};

ExternalModelBackend::ExternalModelBackend(InputSpace space,
                                           const std::string& model_path,
                                           int expected_h, int expected_w)
    : space_(space) {
  onnx::Model model = onnx::load_model(model_path);
  impl_ = std::make_unique<Impl>(std::move(model));

  const onnx::ValueInfo& in = impl_->executor.input_info();
  const onnx::ValueInfo& out = impl_->executor.output_info();
  // Executor construction already guarantees 4-d input with concrete
  // non-batch dims; pin them to the pipeline resolution here.
  if (in.dims[1] != 1)
    throw ConfigError("model '" + model_path + "' wants " +
                      std::to_string(in.dims[1]) +
                      " input channels, pipeline provides 1");
  if (in.dims[2] != expected_h || in.dims[3] != expected_w)
    throw ConfigError("model '" + model_path + "' input is " +
                      std::to_string(in.dims[2]) + "x" +
                      std::to_string(in.dims[3]) + ", pipeline needs " +
                      std::to_string(expected_h) + "x" +
                      std::to_string(expected_w));
  if (out.dims.size() == 4 &&
      ((out.dims[1] > 0 && out.dims[1] != 1) ||
       (out.dims[2] > 0 && out.dims[2] != expected_h) ||
       (out.dims[3] > 0 && out.dims[3] != expected_w)))
    throw ConfigError("model '" + model_path +
                      "' declares an output shape the pipeline cannot use");

  const auto& meta = impl_->executor.model().metadata;
  const auto it = meta.find("output_space");
  impl_->squash_logits = it != meta.end() && it->second == "logits";
}

ExternalModelBackend::~ExternalModelBackend() = default;

Image2D ExternalModelBackend::predict_one(const BackendInput& input) {
  onnx::Tensor t;
  t.shape = {1, 1, input.image.height, input.image.width};
  t.data = input.image.data;

  const onnx::Tensor result = impl_->executor.run(t);
  if (result.shape.size() != 4 || result.shape[0] != 1 ||
      result.shape[1] != 1 || result.shape[2] != input.image.height ||
      result.shape[3] != input.image.width)
    throw BackendError("model produced an output shape the pipeline cannot "
                       "use");

  Image2D out(input.image.height, input.image.width);
  out.data = result.data;
  for (float& v : out.data) {
    if (!std::isfinite(v)) throw BackendError("model produced NaN/inf output");
    if (impl_->squash_logits) {
      v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    } else if (v < 0.0f || v > 1.0f) {
      throw BackendError(
          "model produced values outside [0,1] without declaring "
          "output_space=logits");
    }
  }
  return out;
}

std::unique_ptr<SegmenterBackend> make_backend(
    const std::string& spec, InputSpace space,
    const std::vector<ScanRecord>* scans_for_oracle, int expected_h,
    int expected_w) {
  if (spec == "oracle") {
    if (!scans_for_oracle)
      throw ConfigError("oracle backend needs ground-truth scans");
    return std::make_unique<OracleBackend>(space, *scans_for_oracle);
  }
  if (spec == "classical")
    return std::make_unique<ClassicalBackend>(space, ClassicalParams{});
  if (spec.rfind("classical:", 0) == 0) {
    ClassicalParams params;
    const std::string args = spec.substr(10);
    char extra;
    if (std::sscanf(args.c_str(), "%lf,%lf,%d%c", &params.intensity_low,
                    &params.intensity_high, &params.opening_radius,
                    &extra) != 3)
      throw ConfigError("bad classical backend spec '" + spec +
                        "', want classical:low,high,radius");
    return std::make_unique<ClassicalBackend>(space, params);
  }
  if (spec.rfind("model:", 0) == 0) {
    const std::string path = spec.substr(6);
    if (path.empty()) throw ConfigError("model backend spec without a path");
    return std::make_unique<ExternalModelBackend>(space, path, expected_h,
                                                  expected_w);
  }
  throw ConfigError("unknown backend spec '" + spec +
                    "', want oracle|classical|model:<path>");
}

}  // namespace polarseg
