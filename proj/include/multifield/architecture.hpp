#pragma once

// Declarative CNN description and shape propagation (no tensor execution).
//
// Text grammar, one layer per line, '#' starts a comment:
//   conv K S P OUT      kernel K, stride S, periodic padding P, OUT channels
//   batchnorm
//   leaky_relu
//   flatten
//   dropout RATE        RATE is a number or the symbol DR
//   fc IN OUT           fully connected
// Channel and feature counts are integers or multiples of the width symbol H,
// written "H", "2H", "128H" (or a plain integer such as 12).

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "multifield/error.hpp"

namespace multifield {

// h_coeff * H + constant.
struct ChannelExpr {
  std::int64_t h_coeff = 0;
  std::int64_t constant = 0;

  bool operator==(const ChannelExpr&) const = default;

  ChannelExpr scaled(std::int64_t k) const { return {h_coeff * k, constant * k}; }

  std::int64_t evaluate(std::int64_t h) const { return h_coeff * h + constant; }

  std::string str() const {
    std::string out;
    if (h_coeff != 0) out = (h_coeff == 1 ? "" : std::to_string(h_coeff)) + "H";
    if (constant != 0 || h_coeff == 0) {
      if (!out.empty()) out += "+";
      out += std::to_string(constant);
    }
    return out;
  }
};

inline std::optional<ChannelExpr> parse_channel_expr(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool symbolic = text.back() == 'H';
  std::string_view digits = symbolic ? text.substr(0, text.size() - 1) : text;
  std::int64_t value = 1;
  if (!digits.empty()) {
    value = 0;
    for (char c : digits) {
      if (c < '0' || c > '9') return std::nullopt;
      value = value * 10 + (c - '0');
    }
  } else if (!symbolic) {
    return std::nullopt;
  }
  if (value <= 0) return std::nullopt;
  return symbolic ? ChannelExpr{value, 0} : ChannelExpr{0, value};
}

struct ConvLayer {
  int kernel, stride, padding;
  ChannelExpr out_channels;
};
struct BatchNormLayer {};
struct LeakyReluLayer {};
struct FlattenLayer {};
struct DropoutLayer {
  std::string rate;  // "DR" or a number
};
struct FcLayer {
  ChannelExpr in, out;
};

using Layer = std::variant<ConvLayer, BatchNormLayer, LeakyReluLayer, FlattenLayer, DropoutLayer, FcLayer>;

struct ArchitectureSpec {
  std::vector<Layer> layers;
};

inline std::string layer_text(const Layer& layer) {
  struct {
    std::string operator()(const ConvLayer& c) const {
      return "conv " + std::to_string(c.kernel) + " " + std::to_string(c.stride) + " " +
             std::to_string(c.padding) + " " + c.out_channels.str();
    }
    std::string operator()(const BatchNormLayer&) const { return "batchnorm"; }
    std::string operator()(const LeakyReluLayer&) const { return "leaky_relu"; }
    std::string operator()(const FlattenLayer&) const { return "flatten"; }
    std::string operator()(const DropoutLayer& d) const { return "dropout " + d.rate; }
    std::string operator()(const FcLayer& f) const { return "fc " + f.in.str() + " " + f.out.str(); }
  } visitor;
  return std::visit(visitor, layer);
}

inline ArchitectureSpec parse_architecture(std::string_view text) {
  ArchitectureSpec arch;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::vector<std::string> w;
    for (std::string t; words >> t;) w.push_back(t);
    if (w.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    auto need = [&](std::size_t count) {
      if (w.size() != count) {
        fail(ErrorCode::parse_error, where + "'" + w[0] + "' takes " + std::to_string(count - 1) + " arguments");
      }
    };
    auto integer = [&](const std::string& s) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != s.size() || v < 0) fail(ErrorCode::parse_error, where + "bad integer '" + s + "'");
      return v;
    };
    auto channels = [&](const std::string& s) {
      const auto e = parse_channel_expr(s);
      if (!e) fail(ErrorCode::parse_error, where + "bad channel count '" + s + "'");
      return *e;
    };
    const std::string& op = w[0];
    if (op == "conv") {
      need(5);
      ConvLayer c{integer(w[1]), integer(w[2]), integer(w[3]), channels(w[4])};
      if (c.kernel < 1 || c.stride < 1) fail(ErrorCode::parse_error, where + "kernel and stride must be >= 1");
      arch.layers.emplace_back(c);
    } else if (op == "batchnorm") {
      need(1);
      arch.layers.emplace_back(BatchNormLayer{});
    } else if (op == "leaky_relu") {
      need(1);
      arch.layers.emplace_back(LeakyReluLayer{});
    } else if (op == "flatten") {
      need(1);
      arch.layers.emplace_back(FlattenLayer{});
    } else if (op == "dropout") {
      need(2);
      if (w[1] != "DR") {
        char* end = nullptr;
        const double r = std::strtod(w[1].c_str(), &end);
        if (end != w[1].c_str() + w[1].size() || !(r >= 0.0 && r < 1.0)) {
          fail(ErrorCode::parse_error, where + "dropout rate must be DR or a number in [0, 1)");
        }
      }
      arch.layers.emplace_back(DropoutLayer{w[1]});
    } else if (op == "fc") {
      need(3);
      arch.layers.emplace_back(FcLayer{channels(w[1]), channels(w[2])});
    } else {
      fail(ErrorCode::parse_error, where + "unknown layer '" + op + "'");
    }
  }
  if (arch.layers.empty()) fail(ErrorCode::parse_error, "architecture has no layers");
  return arch;
}

// Moments network for 256x256 inputs: six conv blocks, each halving the
// resolution with a stride-2 conv, then a 4x4 conv to 1x1 and two FC layers.
inline std::string moments_architecture_text(int outputs = 12) {
  std::string t = "conv 3 1 1 2H\nleaky_relu\nconv 3 1 1 2H\nbatchnorm\nleaky_relu\nconv 2 2 0 2H\nbatchnorm\nleaky_relu\n";
  for (int width : {4, 8, 16, 32, 64}) {
    const std::string c = std::to_string(width) + "H";
    for (int rep = 0; rep < 2; ++rep) t += "conv 3 1 1 " + c + "\nbatchnorm\nleaky_relu\n";
    t += "conv 2 2 0 " + c + "\nbatchnorm\nleaky_relu\n";
  }
  t += "conv 4 1 0 128H\nbatchnorm\nleaky_relu\n";
  t += "flatten\ndropout DR\nfc 128H 64H\nleaky_relu\ndropout DR\nfc 64H " + std::to_string(outputs) + "\n";
  return t;
}

inline ArchitectureSpec moments_architecture(int outputs = 12) {
  return parse_architecture(moments_architecture_text(outputs));
}

// Tensor shape: channels x height x width, or a flat feature vector.
struct TensorShape {
  ChannelExpr channels;
  std::int64_t height = 0;
  std::int64_t width = 0;
  bool flat = false;

  bool operator==(const TensorShape&) const = default;

  std::string str() const {
    if (flat) return channels.str();
    return channels.str() + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

inline std::int64_t conv_output_size(std::int64_t s, int kernel, int stride, int padding) {
  if (s + 2 * padding < kernel) {
    fail(ErrorCode::shape_underflow, "spatial size " + std::to_string(s) + " with padding " +
                                         std::to_string(padding) + " is smaller than kernel " +
                                         std::to_string(kernel));
  }
  return (s + 2 * padding - kernel) / stride + 1;
}

struct LayerShape {
  std::string layer;
  TensorShape output;
};

// Output shape after every layer for a C x size x size input; H stays symbolic.
inline std::vector<LayerShape> propagate_shapes(const ArchitectureSpec& arch, std::int64_t channels,
                                                std::int64_t size) {
  if (channels < 1 || size < 1) fail(ErrorCode::invalid_argument, "input channels and size must be >= 1");
  TensorShape s{ChannelExpr{0, channels}, size, size, false};
  std::vector<LayerShape> out;
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const auto& layer = arch.layers[l];
    const auto where = "layer " + std::to_string(l + 1) + " (" + layer_text(layer) + "): ";
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      if (s.flat) fail(ErrorCode::shape_mismatch, where + "conv after flatten");
      s.height = conv_output_size(s.height, c->kernel, c->stride, c->padding);
      s.width = conv_output_size(s.width, c->kernel, c->stride, c->padding);
      s.channels = c->out_channels;
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      if (!s.flat) s = TensorShape{s.channels.scaled(s.height * s.width), 0, 0, true};
    } else if (const auto* f = std::get_if<FcLayer>(&layer)) {
      if (!s.flat) fail(ErrorCode::shape_mismatch, where + "fc needs a flattened input");
      if (!(f->in == s.channels)) {
        fail(ErrorCode::shape_mismatch, where + "expects " + f->in.str() + " inputs, got " + s.channels.str());
      }
      s.channels = f->out;
    }
    out.push_back({layer_text(layer), s});
  }
  return out;
}

}  // namespace multifield
