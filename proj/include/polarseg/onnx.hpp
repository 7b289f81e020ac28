#ifndef POLARSEG_ONNX_HPP
#define POLARSEG_ONNX_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace polarseg::onnx {

// Dense float32 tensor, row-major.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

struct Attribute {
  std::string name;
  // Only the payloads the supported ops use.
  std::int64_t i = 0;
  float f = 0.0f;
  std::string s;
  std::vector<std::int64_t> ints;
  std::vector<float> floats;
  Tensor t;
  int type = 0;  // wire enum: 1=FLOAT 2=INT 3=STRING 4=TENSOR 6=FLOATS 7=INTS
};

struct Node {
  std::string op_type;
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<Attribute> attributes;

  const Attribute* attr(const std::string& attr_name) const;
};

// Declared tensor shape; -1 marks a symbolic (dim_param) dimension.
struct ValueInfo {
  std::string name;
  std::vector<std::int64_t> dims;
};

struct Model {
  std::vector<Node> nodes;
  std::map<std::string, Tensor> initializers;
  std::vector<ValueInfo> inputs;   // graph inputs that are not initializers
  std::vector<ValueInfo> outputs;
  std::map<std::string, std::string> metadata;
};

// Parses the protobuf wire encoding of a model file. Malformed bytes raise
// ParseError with the offending field and byte offset.
Model parse_model(std::span<const std::uint8_t> bytes);
Model load_model(const std::string& path);

// Executes the graph on float32 NCHW tensors. Construction validates the
// graph: exactly one runtime input and one output, every node's op
// supported, every node input resolvable. Unsupported constructs raise
// ConfigError so a bad model is refused before any inference.
class Executor {
 public:
  explicit Executor(Model model);

  const Model& model() const { return model_; }
  // Declared spatial dims of the runtime input/output (-1 when symbolic).
  const ValueInfo& input_info() const { return model_.inputs[0]; }
  const ValueInfo& output_info() const { return model_.outputs[0]; }

  Tensor run(const Tensor& input) const;

 private:
  Model model_;
};

}  // namespace polarseg::onnx

#endif  // POLARSEG_ONNX_HPP
