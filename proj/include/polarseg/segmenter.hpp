#ifndef POLARSEG_SEGMENTER_HPP
#define POLARSEG_SEGMENTER_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polarseg/image.hpp"
#include "polarseg/scan.hpp"

namespace polarseg {

enum class InputSpace { Cartesian, Polar };

// Identifies the slice a prediction request belongs to, so backends that
// key off provenance (the oracle) can find it.
struct SliceRef {
  std::string scan_id;
  int slice_index = 0;
};

// One prediction request. `geometry` is set for polar-space queries and
// describes how the cartesian slice was resampled into `image`.
struct BackendInput {
  Image2D image;
  SliceRef ref;
  std::optional<PolarGeometry> geometry;
};

// Slice -> probability map contract. Implementations must be deterministic;
// the pipeline serializes calls when thread_safe() is false.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual std::string name() const = 0;
  virtual InputSpace input_space() const = 0;
  virtual bool thread_safe() const = 0;
  virtual Image2D predict_one(const BackendInput& input) = 0;
};

// Checked entry point: forwards each input to the backend and enforces the
// contract (same shape as input, finite, within [0,1]). Violations surface
// as BackendError; shape mismatches in the request as ConfigError.
std::vector<Image2D> predict(SegmenterBackend& backend,
                             const std::vector<BackendInput>& batch);

// Answers from a ground-truth table keyed by (scan, slice). Polar queries
// are served by resampling the stored mask with the request's geometry, so
// callers exercise real geometry plumbing. Outputs are exactly {0,1}.
class OracleBackend : public SegmenterBackend {
 public:
  OracleBackend(InputSpace space, const std::vector<ScanRecord>& scans);

  std::string name() const override { return "oracle"; }
  InputSpace input_space() const override { return space_; }
  bool thread_safe() const override { return true; }
  Image2D predict_one(const BackendInput& input) override;

 private:
  InputSpace space_;
  std::map<std::pair<std::string, int>, Mask2D> truth_;
};

// Band threshold plus binary opening. A desk-scale stand-in for a trained
// network so the full cascade runs without model files.
struct ClassicalParams {
  double intensity_low = 0.0;
  double intensity_high = 1.0;
  int opening_radius = 0;
};

Image2D classical_segment(const Image2D& img, const ClassicalParams& params);

class ClassicalBackend : public SegmenterBackend {
 public:
  ClassicalBackend(InputSpace space, ClassicalParams params)
      : space_(space), params_(params) {}

  std::string name() const override { return "classical"; }
  InputSpace input_space() const override { return space_; }
  bool thread_safe() const override { return true; }
  Image2D predict_one(const BackendInput& input) override;

 private:
  InputSpace space_;
  ClassicalParams params_;
};

// Runs a model file (neural-network exchange format, float32 NCHW
// 1x1xHxW in and out). Declared I/O shapes are validated at load time.
class ExternalModelBackend : public SegmenterBackend {
 public:
  ExternalModelBackend(InputSpace space, const std::string& model_path,
                       int expected_h = 256, int expected_w = 256);
  ~ExternalModelBackend() override;

  std::string name() const override { return "model"; }
  InputSpace input_space() const override { return space_; }
  bool thread_safe() const override { return false; }
  Image2D predict_one(const BackendInput& input) override;

 private:
  InputSpace space_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Builds a backend from a CLI spec: "oracle", "classical",
// "classical:low,high,radius", or "model:<path>". Oracle specs need the
// scan set for truth lookup.
std::unique_ptr<SegmenterBackend> make_backend(
    const std::string& spec, InputSpace space,
    const std::vector<ScanRecord>* scans_for_oracle, int expected_h = 256,
    int expected_w = 256);

}  // namespace polarseg

#endif  // POLARSEG_SEGMENTER_HPP
