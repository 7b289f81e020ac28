#include "polarseg/onnx.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "polarseg/errors.hpp"

namespace polarseg::onnx {

namespace {

// ---------------------------------------------------------------------------
// Protobuf wire-format reader. Only what the model format needs: varints,
// 32-bit scalars, and length-delimited submessages.
// ---------------------------------------------------------------------------

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::int64_t base_offset)
      : bytes_(bytes), base_(base_offset) {}

  bool done() const { return pos_ >= bytes_.size(); }
  std::int64_t offset() const { return base_ + static_cast<std::int64_t>(pos_); }

  std::uint64_t varint(const char* field) {
    std::uint64_t v = 0;
    int shift = 0;
    for (;;) {
      if (pos_ >= bytes_.size())
        throw ParseError("truncated varint", field, offset());
      const std::uint8_t b = bytes_[pos_++];
      if (shift < 64) v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return v;
      shift += 7;
      if (shift > 70) throw ParseError("overlong varint", field, offset());
    }
  }

  std::uint32_t fixed32(const char* field) {
    if (pos_ + 4 > bytes_.size())
      throw ParseError("truncated fixed32", field, offset());
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;  // model files are little-endian, as is this target
  }

  std::uint64_t fixed64(const char* field) {
    if (pos_ + 8 > bytes_.size())
      throw ParseError("truncated fixed64", field, offset());
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }

  std::span<const std::uint8_t> delimited(const char* field) {
    const std::uint64_t len = varint(field);
    if (len > bytes_.size() - pos_)
      throw ParseError("length-delimited field overruns buffer", field,
                       offset());
    auto view = bytes_.subspan(pos_, static_cast<std::size_t>(len));
    pos_ += static_cast<std::size_t>(len);
    return view;
  }

  // Returns (field_number, wire_type).
  std::pair<std::uint32_t, std::uint32_t> key() {
    const std::uint64_t k = varint("key");
    return {static_cast<std::uint32_t>(k >> 3),
            static_cast<std::uint32_t>(k & 7)};
  }

  void skip(std::uint32_t wire_type, const char* field) {
    switch (wire_type) {
      case 0: varint(field); return;
      case 1: fixed64(field); return;
      case 2: delimited(field); return;
      case 5: fixed32(field); return;
      default:
        throw ParseError("unsupported wire type", field, offset());
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::int64_t base_;
  std::size_t pos_ = 0;
};

std::string to_string(std::span<const std::uint8_t> view) {
  return std::string(reinterpret_cast<const char*>(view.data()), view.size());
}

float bits_to_float(std::uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::int64_t as_i64(std::uint64_t v) {
  // Plain two's-complement varint, not zigzag.
  return static_cast<std::int64_t>(v);
}

std::vector<std::int64_t> parse_packed_i64(std::span<const std::uint8_t> view,
                                           std::int64_t base,
                                           const char* field) {
  Reader r(view, base);
  std::vector<std::int64_t> out;
  while (!r.done()) out.push_back(as_i64(r.varint(field)));
  return out;
}

Tensor parse_tensor(std::span<const std::uint8_t> view, std::int64_t base);

Attribute parse_attribute(std::span<const std::uint8_t> view,
                          std::int64_t base) {
  Reader r(view, base);
  Attribute a;
  while (!r.done()) {
    const auto [field, wt] = r.key();
    switch (field) {
      case 1: a.name = to_string(r.delimited("attribute.name")); break;
      case 2: a.f = bits_to_float(r.fixed32("attribute.f")); break;
      case 3: a.i = as_i64(r.varint("attribute.i")); break;
      case 4: a.s = to_string(r.delimited("attribute.s")); break;
      case 5: {
        auto sub = r.delimited("attribute.t");
        a.t = parse_tensor(sub, base);
        break;
      }
      case 7:
        if (wt == 2) {
          auto sub = r.delimited("attribute.floats");
          Reader pr(sub, base);
          while (!pr.done())
            a.floats.push_back(bits_to_float(pr.fixed32("attribute.floats")));
        } else {
          a.floats.push_back(bits_to_float(r.fixed32("attribute.floats")));
        }
        break;
      case 8:
        if (wt == 2) {
          auto sub = r.delimited("attribute.ints");
          for (auto v : parse_packed_i64(sub, base, "attribute.ints"))
            a.ints.push_back(v);
        } else {
          a.ints.push_back(as_i64(r.varint("attribute.ints")));
        }
        break;
      case 20: a.type = static_cast<int>(r.varint("attribute.type")); break;
      default: r.skip(wt, "attribute"); break;
    }
  }
  return a;
}

Tensor parse_tensor(std::span<const std::uint8_t> view, std::int64_t base) {
  Reader r(view, base);
  Tensor t;
  int data_type = 0;
  std::vector<float> float_data;
  std::vector<std::int64_t> int64_data;
  std::string raw;

  while (!r.done()) {
    const auto [field, wt] = r.key();
    switch (field) {
      case 1:
        if (wt == 2) {
          auto sub = r.delimited("tensor.dims");
          for (auto v : parse_packed_i64(sub, base, "tensor.dims"))
            t.shape.push_back(v);
        } else {
          t.shape.push_back(as_i64(r.varint("tensor.dims")));
        }
        break;
      case 2:
        data_type = static_cast<int>(r.varint("tensor.data_type"));
        break;
      case 4:
        if (wt == 2) {
          auto sub = r.delimited("tensor.float_data");
          Reader pr(sub, base);
          while (!pr.done())
            float_data.push_back(bits_to_float(pr.fixed32("tensor.float_data")));
        } else {
          float_data.push_back(bits_to_float(r.fixed32("tensor.float_data")));
        }
        break;
      case 7:
        if (wt == 2) {
          auto sub = r.delimited("tensor.int64_data");
          for (auto v : parse_packed_i64(sub, base, "tensor.int64_data"))
            int64_data.push_back(v);
        } else {
          int64_data.push_back(as_i64(r.varint("tensor.int64_data")));
        }
        break;
      case 8: /* name */ r.delimited("tensor.name"); break;
      case 9: raw = to_string(r.delimited("tensor.raw_data")); break;
      default: r.skip(wt, "tensor"); break;
    }
  }

  std::int64_t n = 1;
  for (auto d : t.shape) {
    if (d < 0) throw ParseError("negative tensor dim", "tensor.dims", base);
    if (d != 0 && n > std::numeric_limits<std::int64_t>::max() / d)
      throw ParseError("tensor dims overflow", "tensor.dims", base);
    n *= d;
  }

  if (data_type == 1) {  // float32
    if (!raw.empty()) {
      if (raw.size() != static_cast<std::size_t>(n) * 4)
        throw ParseError("raw_data size mismatch", "tensor.raw_data", base);
      t.data.resize(static_cast<std::size_t>(n));
      std::memcpy(t.data.data(), raw.data(), raw.size());
    } else {
      t.data = std::move(float_data);
    }
  } else if (data_type == 7) {  // int64, converted to float payload
    if (!raw.empty()) {
      if (raw.size() != static_cast<std::size_t>(n) * 8)
        throw ParseError("raw_data size mismatch", "tensor.raw_data", base);
      int64_data.resize(static_cast<std::size_t>(n));
      std::memcpy(int64_data.data(), raw.data(), raw.size());
    }
    t.data.reserve(int64_data.size());
    for (auto v : int64_data) t.data.push_back(static_cast<float>(v));
  } else {
    throw ParseError("unsupported tensor data_type " +
                         std::to_string(data_type),
                     "tensor.data_type", base);
  }

  if (t.data.size() != static_cast<std::size_t>(n))
    throw ParseError("tensor payload does not match dims", "tensor", base);
  return t;
}

Node parse_node(std::span<const std::uint8_t> view, std::int64_t base) {
  Reader r(view, base);
  Node node;
  while (!r.done()) {
    const auto [field, wt] = r.key();
    switch (field) {
      case 1: node.inputs.push_back(to_string(r.delimited("node.input"))); break;
      case 2:
        node.outputs.push_back(to_string(r.delimited("node.output")));
        break;
      case 3: node.name = to_string(r.delimited("node.name")); break;
      case 4: node.op_type = to_string(r.delimited("node.op_type")); break;
      case 5: {
        auto sub = r.delimited("node.attribute");
        node.attributes.push_back(parse_attribute(sub, base));
        break;
      }
      default: r.skip(wt, "node"); break;
    }
  }
  return node;
}

ValueInfo parse_value_info(std::span<const std::uint8_t> view,
                           std::int64_t base) {
  ValueInfo vi;
  Reader r(view, base);
  while (!r.done()) {
    const auto [field, wt] = r.key();
    if (field == 1) {
      vi.name = to_string(r.delimited("value_info.name"));
    } else if (field == 2 && wt == 2) {
      // TypeProto -> tensor_type (1) -> shape (2) -> dim (1) ->
      // dim_value (1) | dim_param (2).
      auto type_view = r.delimited("value_info.type");
      Reader tr(type_view, base);
      while (!tr.done()) {
        const auto [tf, twt] = tr.key();
        if (tf == 1 && twt == 2) {
          auto tt = tr.delimited("type.tensor_type");
          Reader ttr(tt, base);
          while (!ttr.done()) {
            const auto [ttf, ttwt] = ttr.key();
            if (ttf == 2 && ttwt == 2) {
              auto shape_view = ttr.delimited("tensor_type.shape");
              Reader sr(shape_view, base);
              while (!sr.done()) {
                const auto [sf, swt] = sr.key();
                if (sf == 1 && swt == 2) {
                  auto dim_view = sr.delimited("shape.dim");
                  Reader dr(dim_view, base);
                  std::int64_t dim = -1;
                  while (!dr.done()) {
                    const auto [df, dwt] = dr.key();
                    if (df == 1)
                      dim = as_i64(dr.varint("dim.dim_value"));
                    else
                      dr.skip(dwt, "shape.dim");
                  }
                  vi.dims.push_back(dim);
                } else {
                  sr.skip(swt, "tensor_type.shape");
                }
              }
            } else {
              ttr.skip(ttwt, "type.tensor_type");
            }
          }
        } else {
          tr.skip(twt, "value_info.type");
        }
      }
    } else {
      r.skip(wt, "value_info");
    }
  }
  return vi;
}

void parse_graph(std::span<const std::uint8_t> view, std::int64_t base,
                 Model& model) {
  Reader r(view, base);
  std::vector<ValueInfo> declared_inputs;
  while (!r.done()) {
    const auto [field, wt] = r.key();
    switch (field) {
      case 1: {
        auto sub = r.delimited("graph.node");
        model.nodes.push_back(parse_node(sub, base));
        break;
      }
      case 5: {
        auto sub = r.delimited("graph.initializer");
        // The name field (8) is consumed inside parse_tensor, so re-scan for
        // it here: initializers without names are unusable.
        Reader nr(sub, base);
        std::string name;
        while (!nr.done()) {
          const auto [tf, twt] = nr.key();
          if (tf == 8)
            name = to_string(nr.delimited("tensor.name"));
          else
            nr.skip(twt, "tensor");
        }
        if (name.empty())
          throw ParseError("initializer without a name", "graph.initializer",
                           base);
        model.initializers[name] = parse_tensor(sub, base);
        break;
      }
      case 11: {
        auto sub = r.delimited("graph.input");
        declared_inputs.push_back(parse_value_info(sub, base));
        break;
      }
      case 12: {
        auto sub = r.delimited("graph.output");
        model.outputs.push_back(parse_value_info(sub, base));
        break;
      }
      default: r.skip(wt, "graph"); break;
    }
  }
  // Initializers may be re-declared as graph inputs; runtime inputs are the
  // rest.
  for (auto& vi : declared_inputs)
    if (!model.initializers.count(vi.name)) model.inputs.push_back(vi);
}

}  // namespace

const Attribute* Node::attr(const std::string& attr_name) const {
  for (const Attribute& a : attributes)
    if (a.name == attr_name) return &a;
  return nullptr;
}

Model parse_model(std::span<const std::uint8_t> bytes) {
  Model model;
  Reader r(bytes, 0);
  bool saw_graph = false;
  while (!r.done()) {
    const auto [field, wt] = r.key();
    switch (field) {
      case 7: {
        if (wt != 2)
          throw ParseError("graph field has wrong wire type", "model.graph",
                           r.offset());
        auto sub = r.delimited("model.graph");
        parse_graph(sub, r.offset(), model);
        saw_graph = true;
        break;
      }
      case 14: {
        auto sub = r.delimited("model.metadata_props");
        Reader mr(sub, r.offset());
        std::string key, value;
        while (!mr.done()) {
          const auto [mf, mwt] = mr.key();
          if (mf == 1)
            key = to_string(mr.delimited("metadata.key"));
          else if (mf == 2)
            value = to_string(mr.delimited("metadata.value"));
          else
            mr.skip(mwt, "metadata");
        }
        if (!key.empty()) model.metadata[key] = value;
        break;
      }
      default: r.skip(wt, "model"); break;
    }
  }
  if (!saw_graph)
    throw ParseError("model has no graph", "model.graph", -1);
  return model;
}

Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open model file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_model(std::span<const std::uint8_t>(bytes));
}

// ---------------------------------------------------------------------------
// Executor.
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& supported_ops() {
  static const std::set<std::string> ops = {
      "Conv",    "ConvTranspose", "BatchNormalization",
      "Relu",    "LeakyRelu",     "Sigmoid",
      "MaxPool", "Concat",        "Add",
      "Resize",  "Upsample",      "Identity",
      "Constant"};
  return ops;
}

std::int64_t attr_int(const Node& n, const std::string& name,
                      std::int64_t fallback) {
  const Attribute* a = n.attr(name);
  return a ? a->i : fallback;
}

std::vector<std::int64_t> attr_ints(const Node& n, const std::string& name,
                                    std::vector<std::int64_t> fallback) {
  const Attribute* a = n.attr(name);
  return a ? a->ints : fallback;
}

void check_4d(const Tensor& t, const std::string& who) {
  if (t.shape.size() != 4)
    throw BackendError(who + ": expected 4-d NCHW tensor");
}

std::size_t idx4(const Tensor& t, std::int64_t n, std::int64_t c,
                 std::int64_t h, std::int64_t w) {
  return static_cast<std::size_t>(
      ((n * t.shape[1] + c) * t.shape[2] + h) * t.shape[3] + w);
}

Tensor op_conv(const Tensor& x, const Tensor& wgt, const Tensor* bias,
               const Node& node) {
  check_4d(x, "Conv input");
  check_4d(wgt, "Conv weight");
  const auto group = attr_int(node, "group", 1);
  const auto strides = attr_ints(node, "strides", {1, 1});
  const auto pads = attr_ints(node, "pads", {0, 0, 0, 0});
  const auto dil = attr_ints(node, "dilations", {1, 1});
  if (strides.size() != 2 || pads.size() != 4 || dil.size() != 2)
    throw BackendError("Conv: 2-d spatial attributes required");

  const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2],
                     W = x.shape[3];
  const std::int64_t M = wgt.shape[0], Cg = wgt.shape[1], kH = wgt.shape[2],
                     kW = wgt.shape[3];
  if (C != Cg * group || M % group != 0)
    throw BackendError("Conv: channel/group mismatch");

  const std::int64_t oH =
      (H + pads[0] + pads[2] - ((kH - 1) * dil[0] + 1)) / strides[0] + 1;
  const std::int64_t oW =
      (W + pads[1] + pads[3] - ((kW - 1) * dil[1] + 1)) / strides[1] + 1;
  if (oH < 1 || oW < 1) throw BackendError("Conv: empty output");

  Tensor y;
  y.shape = {N, M, oH, oW};
  y.data.assign(static_cast<std::size_t>(y.numel()), 0.0f);
  const std::int64_t Mg = M / group;

  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t m = 0; m < M; ++m) {
      const std::int64_t g = m / Mg;
      const float b = bias ? bias->data[static_cast<std::size_t>(m)] : 0.0f;
      for (std::int64_t oh = 0; oh < oH; ++oh) {
        for (std::int64_t ow = 0; ow < oW; ++ow) {
          double acc = b;
          for (std::int64_t cg = 0; cg < Cg; ++cg) {
            const std::int64_t c = g * Cg + cg;
            for (std::int64_t kh = 0; kh < kH; ++kh) {
              const std::int64_t ih = oh * strides[0] - pads[0] + kh * dil[0];
              if (ih < 0 || ih >= H) continue;
              for (std::int64_t kw = 0; kw < kW; ++kw) {
                const std::int64_t iw =
                    ow * strides[1] - pads[1] + kw * dil[1];
                if (iw < 0 || iw >= W) continue;
                acc += static_cast<double>(x.data[idx4(x, n, c, ih, iw)]) *
                       wgt.data[static_cast<std::size_t>(
                           ((m * Cg + cg) * kH + kh) * kW + kw)];
              }
            }
          }
          y.data[idx4(y, n, m, oh, ow)] = static_cast<float>(acc);
        }
      }
    }
  }
  return y;
}

Tensor op_conv_transpose(const Tensor& x, const Tensor& wgt,
                         const Tensor* bias, const Node& node) {
  check_4d(x, "ConvTranspose input");
  check_4d(wgt, "ConvTranspose weight");
  const auto group = attr_int(node, "group", 1);
  const auto strides = attr_ints(node, "strides", {1, 1});
  const auto pads = attr_ints(node, "pads", {0, 0, 0, 0});
  const auto outpad = attr_ints(node, "output_padding", {0, 0});
  if (group != 1) throw BackendError("ConvTranspose: only group=1 supported");
  if (strides.size() != 2 || pads.size() != 4 || outpad.size() != 2)
    throw BackendError("ConvTranspose: 2-d spatial attributes required");

  const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2],
                     W = x.shape[3];
  const std::int64_t Cw = wgt.shape[0], M = wgt.shape[1], kH = wgt.shape[2],
                     kW = wgt.shape[3];
  if (C != Cw) throw BackendError("ConvTranspose: channel mismatch");

  const std::int64_t oH = (H - 1) * strides[0] + kH - pads[0] - pads[2] + outpad[0];
  const std::int64_t oW = (W - 1) * strides[1] + kW - pads[1] - pads[3] + outpad[1];
  if (oH < 1 || oW < 1) throw BackendError("ConvTranspose: empty output");

  Tensor y;
  y.shape = {N, M, oH, oW};
  y.data.assign(static_cast<std::size_t>(y.numel()), 0.0f);

  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t h = 0; h < H; ++h) {
        for (std::int64_t w = 0; w < W; ++w) {
          const float xv = x.data[idx4(x, n, c, h, w)];
          if (xv == 0.0f) continue;
          for (std::int64_t m = 0; m < M; ++m) {
            for (std::int64_t kh = 0; kh < kH; ++kh) {
              const std::int64_t oh = h * strides[0] + kh - pads[0];
              if (oh < 0 || oh >= oH) continue;
              for (std::int64_t kw = 0; kw < kW; ++kw) {
                const std::int64_t ow = w * strides[1] + kw - pads[1];
                if (ow < 0 || ow >= oW) continue;
                y.data[idx4(y, n, m, oh, ow)] +=
                    xv * wgt.data[static_cast<std::size_t>(
                             ((c * M + m) * kH + kh) * kW + kw)];
              }
            }
          }
        }
      }
    }
  }
  if (bias) {
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t m = 0; m < M; ++m)
        for (std::int64_t oh = 0; oh < oH; ++oh)
          for (std::int64_t ow = 0; ow < oW; ++ow)
            y.data[idx4(y, n, m, oh, ow)] +=
                bias->data[static_cast<std::size_t>(m)];
  }
  return y;
}

Tensor op_batchnorm(const Tensor& x, const Tensor& scale, const Tensor& bias,
                    const Tensor& mean, const Tensor& var, const Node& node) {
  check_4d(x, "BatchNormalization input");
  const Attribute* eps_attr = node.attr("epsilon");
  const double eps = eps_attr ? eps_attr->f : 1e-5;
  const std::int64_t C = x.shape[1];
  if (scale.numel() != C || bias.numel() != C || mean.numel() != C ||
      var.numel() != C)
    throw BackendError("BatchNormalization: parameter length != channels");

  Tensor y = x;
  const std::int64_t spatial = x.shape[2] * x.shape[3];
  for (std::int64_t n = 0; n < x.shape[0]; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double inv =
          1.0 / std::sqrt(static_cast<double>(var.data[c]) + eps);
      const double a = scale.data[c] * inv;
      const double b = bias.data[c] - mean.data[c] * a;
      float* p = y.data.data() + idx4(y, n, c, 0, 0);
      for (std::int64_t i = 0; i < spatial; ++i)
        p[i] = static_cast<float>(p[i] * a + b);
    }
  }
  return y;
}

Tensor op_maxpool(const Tensor& x, const Node& node) {
  check_4d(x, "MaxPool input");
  const auto kernel = attr_ints(node, "kernel_shape", {});
  const auto strides = attr_ints(node, "strides", {1, 1});
  const auto pads = attr_ints(node, "pads", {0, 0, 0, 0});
  if (kernel.size() != 2)
    throw BackendError("MaxPool: kernel_shape must be 2-d");

  const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2],
                     W = x.shape[3];
  const std::int64_t oH = (H + pads[0] + pads[2] - kernel[0]) / strides[0] + 1;
  const std::int64_t oW = (W + pads[1] + pads[3] - kernel[1]) / strides[1] + 1;
  if (oH < 1 || oW < 1) throw BackendError("MaxPool: empty output");

  Tensor y;
  y.shape = {N, C, oH, oW};
  y.data.assign(static_cast<std::size_t>(y.numel()), 0.0f);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t oh = 0; oh < oH; ++oh) {
        for (std::int64_t ow = 0; ow < oW; ++ow) {
          float best = -std::numeric_limits<float>::infinity();
          for (std::int64_t kh = 0; kh < kernel[0]; ++kh) {
            const std::int64_t ih = oh * strides[0] - pads[0] + kh;
            if (ih < 0 || ih >= H) continue;
            for (std::int64_t kw = 0; kw < kernel[1]; ++kw) {
              const std::int64_t iw = ow * strides[1] - pads[1] + kw;
              if (iw < 0 || iw >= W) continue;
              best = std::max(best, x.data[idx4(x, n, c, ih, iw)]);
            }
          }
          y.data[idx4(y, n, c, oh, ow)] = best;
        }
      }
    }
  }
  return y;
}

Tensor op_concat(const std::vector<const Tensor*>& xs, const Node& node) {
  const std::int64_t axis = attr_int(node, "axis", 1);
  if (xs.empty()) throw BackendError("Concat: no inputs");
  const auto& first = *xs[0];
  const std::int64_t rank = static_cast<std::int64_t>(first.shape.size());
  const std::int64_t ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) throw BackendError("Concat: axis out of range");

  Tensor y;
  y.shape = first.shape;
  y.shape[ax] = 0;
  for (const Tensor* t : xs) {
    if (static_cast<std::int64_t>(t->shape.size()) != rank)
      throw BackendError("Concat: rank mismatch");
    for (std::int64_t d = 0; d < rank; ++d)
      if (d != ax && t->shape[d] != first.shape[d])
        throw BackendError("Concat: non-axis dim mismatch");
    y.shape[ax] += t->shape[ax];
  }
  y.data.resize(static_cast<std::size_t>(y.numel()));

  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < ax; ++d) outer *= first.shape[d];
  for (std::int64_t d = ax + 1; d < rank; ++d) inner *= first.shape[d];

  for (std::int64_t o = 0; o < outer; ++o) {
    std::int64_t out_off = o * y.shape[ax] * inner;
    for (const Tensor* t : xs) {
      const std::int64_t block = t->shape[ax] * inner;
      std::copy_n(t->data.begin() + o * block, block,
                  y.data.begin() + out_off);
      out_off += block;
    }
  }
  return y;
}

Tensor op_add(const Tensor& a, const Tensor& b) {
  if (a.shape == b.shape) {
    Tensor y = a;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
    return y;
  }
  if (b.numel() == 1) {
    Tensor y = a;
    for (float& v : y.data) v += b.data[0];
    return y;
  }
  // Per-channel bias, [1,C,1,1] against NCHW.
  if (a.shape.size() == 4 && b.shape.size() == 4 && b.shape[0] == 1 &&
      b.shape[1] == a.shape[1] && b.shape[2] == 1 && b.shape[3] == 1) {
    Tensor y = a;
    const std::int64_t spatial = a.shape[2] * a.shape[3];
    for (std::int64_t n = 0; n < a.shape[0]; ++n)
      for (std::int64_t c = 0; c < a.shape[1]; ++c) {
        float* p = y.data.data() + idx4(y, n, c, 0, 0);
        for (std::int64_t i = 0; i < spatial; ++i) p[i] += b.data[c];
      }
    return y;
  }
  throw BackendError("Add: unsupported broadcast");
}

Tensor op_resize(const Tensor& x, double scale_h, double scale_w,
                 const std::string& mode, const std::string& coord_mode,
                 const std::string& nearest_mode) {
  check_4d(x, "Resize input");
  const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2],
                     W = x.shape[3];
  const std::int64_t oH = static_cast<std::int64_t>(std::floor(H * scale_h));
  const std::int64_t oW = static_cast<std::int64_t>(std::floor(W * scale_w));
  if (oH < 1 || oW < 1) throw BackendError("Resize: empty output");

  auto src_coord = [&](std::int64_t out, double scale) -> double {
    if (coord_mode == "half_pixel") return (out + 0.5) / scale - 0.5;
    if (coord_mode == "asymmetric") return out / scale;
    throw BackendError("Resize: unsupported coordinate mode " + coord_mode);
  };

  Tensor y;
  y.shape = {N, C, oH, oW};
  y.data.resize(static_cast<std::size_t>(y.numel()));

  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t oh = 0; oh < oH; ++oh) {
        const double sh = src_coord(oh, scale_h);
        for (std::int64_t ow = 0; ow < oW; ++ow) {
          const double sw = src_coord(ow, scale_w);
          float v;
          if (mode == "nearest") {
            std::int64_t ih, iw;
            if (nearest_mode == "floor") {
              ih = static_cast<std::int64_t>(std::floor(sh));
              iw = static_cast<std::int64_t>(std::floor(sw));
            } else {  // round_prefer_floor
              ih = static_cast<std::int64_t>(std::ceil(sh - 0.5));
              iw = static_cast<std::int64_t>(std::ceil(sw - 0.5));
            }
            ih = std::clamp<std::int64_t>(ih, 0, H - 1);
            iw = std::clamp<std::int64_t>(iw, 0, W - 1);
            v = x.data[idx4(x, n, c, ih, iw)];
          } else if (mode == "linear") {
            const double chs = std::clamp(sh, 0.0, static_cast<double>(H - 1));
            const double cws = std::clamp(sw, 0.0, static_cast<double>(W - 1));
            const std::int64_t h0 = static_cast<std::int64_t>(chs);
            const std::int64_t w0 = static_cast<std::int64_t>(cws);
            const std::int64_t h1 = std::min(h0 + 1, H - 1);
            const std::int64_t w1 = std::min(w0 + 1, W - 1);
            const double fh = chs - h0;
            const double fw = cws - w0;
            const double top =
                (1 - fw) * x.data[idx4(x, n, c, h0, w0)] +
                fw * x.data[idx4(x, n, c, h0, w1)];
            const double bot =
                (1 - fw) * x.data[idx4(x, n, c, h1, w0)] +
                fw * x.data[idx4(x, n, c, h1, w1)];
            v = static_cast<float>((1 - fh) * top + fh * bot);
          } else {
            throw BackendError("Resize: unsupported mode " + mode);
          }
          y.data[idx4(y, n, c, oh, ow)] = v;
        }
      }
    }
  }
  return y;
}

}  // namespace

Executor::Executor(Model model) : model_(std::move(model)) {
  if (model_.inputs.size() != 1)
    throw ConfigError("model must declare exactly one runtime input, got " +
                      std::to_string(model_.inputs.size()));
  if (model_.outputs.size() != 1)
    throw ConfigError("model must declare exactly one output, got " +
                      std::to_string(model_.outputs.size()));

  const ValueInfo& in = model_.inputs[0];
  if (in.dims.size() != 4)
    throw ConfigError("model input must be 4-d NCHW, got rank " +
                      std::to_string(in.dims.size()));
  for (std::size_t d = 1; d < in.dims.size(); ++d)
    if (in.dims[d] < 1)
      throw ConfigError(
          "model input has a dynamic non-batch dimension; only the batch "
          "dimension may be symbolic");

  std::set<std::string> known;
  known.insert(in.name);
  for (const auto& [name, tensor] : model_.initializers) known.insert(name);

  for (const Node& node : model_.nodes) {
    if (!supported_ops().count(node.op_type))
      throw ConfigError("unsupported operator in model: " + node.op_type);
    for (const std::string& input : node.inputs)
      if (!input.empty() && !known.count(input))
        throw ConfigError("node input '" + input +
                          "' is not produced by any earlier node");
    for (const std::string& output : node.outputs) known.insert(output);
  }
  if (!known.count(model_.outputs[0].name))
    throw ConfigError("graph output '" + model_.outputs[0].name +
                      "' is never produced");
}

Tensor Executor::run(const Tensor& input) const {
  if (input.shape.size() != 4)
    throw ConfigError("executor input must be 4-d NCHW");
  const ValueInfo& in = model_.inputs[0];
  for (std::size_t d = 1; d < 4; ++d)
    if (input.shape[d] != in.dims[d])
      throw ConfigError("executor input shape does not match model "
                        "declaration");
  if (input.data.size() != static_cast<std::size_t>(input.numel()))
    throw ConfigError("executor input payload does not match its shape");

  std::map<std::string, Tensor> env = model_.initializers;
  env[in.name] = input;

  auto get = [&](const std::string& name) -> const Tensor& {
    auto it = env.find(name);
    if (it == env.end())
      throw BackendError("missing tensor during execution: " + name);
    return it->second;
  };

  for (const Node& node : model_.nodes) {
    Tensor out;
    if (node.op_type == "Conv") {
      const Tensor* bias =
          node.inputs.size() > 2 && !node.inputs[2].empty()
              ? &get(node.inputs[2])
              : nullptr;
      out = op_conv(get(node.inputs[0]), get(node.inputs[1]), bias, node);
    } else if (node.op_type == "ConvTranspose") {
      const Tensor* bias =
          node.inputs.size() > 2 && !node.inputs[2].empty()
              ? &get(node.inputs[2])
              : nullptr;
      out = op_conv_transpose(get(node.inputs[0]), get(node.inputs[1]), bias,
                              node);
    } else if (node.op_type == "BatchNormalization") {
      out = op_batchnorm(get(node.inputs[0]), get(node.inputs[1]),
                         get(node.inputs[2]), get(node.inputs[3]),
                         get(node.inputs[4]), node);
    } else if (node.op_type == "Relu") {
      out = get(node.inputs[0]);
      for (float& v : out.data) v = std::max(v, 0.0f);
    } else if (node.op_type == "LeakyRelu") {
      const Attribute* alpha = node.attr("alpha");
      const float a = alpha ? alpha->f : 0.01f;
      out = get(node.inputs[0]);
      for (float& v : out.data)
        if (v < 0.0f) v *= a;
    } else if (node.op_type == "Sigmoid") {
      out = get(node.inputs[0]);
      for (float& v : out.data)
        v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    } else if (node.op_type == "MaxPool") {
      out = op_maxpool(get(node.inputs[0]), node);
    } else if (node.op_type == "Concat") {
      std::vector<const Tensor*> xs;
      for (const std::string& name : node.inputs) xs.push_back(&get(name));
      out = op_concat(xs, node);
    } else if (node.op_type == "Add") {
      out = op_add(get(node.inputs[0]), get(node.inputs[1]));
    } else if (node.op_type == "Resize") {
      // Inputs: X, roi (ignored), scales, optional sizes (unsupported).
      if (node.inputs.size() < 3 || node.inputs[2].empty())
        throw BackendError("Resize: scales input required");
      const Tensor& scales = get(node.inputs[2]);
      if (scales.numel() != 4)
        throw BackendError("Resize: scales must have 4 entries");
      const Attribute* mode = node.attr("mode");
      const Attribute* coord = node.attr("coordinate_transformation_mode");
      const Attribute* nmode = node.attr("nearest_mode");
      out = op_resize(get(node.inputs[0]), scales.data[2], scales.data[3],
                      mode ? mode->s : "nearest",
                      coord ? coord->s : "half_pixel",
                      nmode ? nmode->s : "round_prefer_floor");
    } else if (node.op_type == "Upsample") {
      double sh = 0.0, sw = 0.0;
      if (const Attribute* scales = node.attr("scales");
          scales && scales->floats.size() == 4) {
        sh = scales->floats[2];
        sw = scales->floats[3];
      } else if (node.inputs.size() > 1) {
        const Tensor& scales = get(node.inputs[1]);
        if (scales.numel() != 4)
          throw BackendError("Upsample: scales must have 4 entries");
        sh = scales.data[2];
        sw = scales.data[3];
      } else {
        throw BackendError("Upsample: no scales provided");
      }
      const Attribute* mode = node.attr("mode");
      out = op_resize(get(node.inputs[0]), sh, sw,
                      mode && mode->s == "linear" ? "linear" : "nearest",
                      "asymmetric", "floor");
    } else if (node.op_type == "Identity") {
      out = get(node.inputs[0]);
    } else if (node.op_type == "Constant") {
      const Attribute* value = node.attr("value");
      if (!value) throw BackendError("Constant: missing value attribute");
      out = value->t;
    } else {
      throw BackendError("unsupported operator: " + node.op_type);
    }
    env[node.outputs[0]] = std::move(out);
  }

  return get(model_.outputs[0].name);
}

}  // namespace polarseg::onnx
