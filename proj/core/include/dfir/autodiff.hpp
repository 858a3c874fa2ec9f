#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dfir/ops.hpp"
#include "dfir/tensor.hpp"

namespace dfir::ad {

// A recorded value is either a real tensor or a complex spectrum. Gradients of
// complex values use the convention dL/dRe + i dL/dIm.
using Value = std::variant<Tensor, ComplexSpectrum>;

bool is_defined(const Value& v);

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
// tape is alive.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const;

  const Value& value() const;
  const Tensor& tensor() const;
  const ComplexSpectrum& spectrum() const;
  const Shape& shape() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Returns one gradient per recorded input. An undefined entry means no
// gradient flows to that input.
using BackwardFn = std::function<std::vector<Value>(const Value& grad_output)>;

using Gradients = std::map<std::string, Tensor>;

// Reverse-mode tape. Nodes are appended in evaluation order, so every input
// precedes its consumers and a reverse sweep is a valid topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Value value);
  // Registers a differentiable leaf. Names are unique per tape.
  Var parameter(const std::string& name, Tensor value);
  std::optional<Var> find_parameter(const std::string& name);

  Var record(std::string op, Value output, const std::vector<Var>& inputs, BackwardFn backward);

  // Gradients of a scalar `loss` with respect to every registered parameter.
  // Parameters the loss does not depend on receive zeros.
  Gradients backward(const Var& loss);

  const Value& value(std::size_t id) const { return nodes_.at(id).value; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  // Nodes whose backward function ran during the last backward() call.
  std::size_t last_backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    std::string op;
    Value value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> parameters_;
  std::size_t visits_ = 0;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Each mirrors the tensor-core function of the
// same name.

Var conv2d(const Var& x, const Var& weight, const std::optional<Var>& bias,
           const Conv2dOptions& options = {});
Var gelu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double offset);
Var sum(const Var& x);
// sum(weights * x) for a constant weight tensor; a convenient generic loss.
Var weighted_sum(const Var& x, const Tensor& weights);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, std::size_t start, std::size_t count);
Var group_norm(const Var& x, const Var& gain, const Var& shift, std::size_t num_groups, double eps);
Var channel_affine(const Var& x, const Var& gain, const Var& shift);
Var nearest_upsample(const Var& x, std::size_t s);
Var zero_insert_upsample(const Var& x, std::size_t s);
Var channel_shuffle(const Var& x);
Var global_avg_pool(const Var& x);
Var masked_softmax(const Var& logits, const KeepSets& keep);
// Inverted dropout with a seeded mask; identity when p == 0.
Var dropout(const Var& x, double p, std::uint64_t seed);
// x * per_channel[c] for x of shape (B, C, H, W) and per_channel of shape (C).
Var mul_channel(const Var& x, const Var& per_channel);

// Frequency-domain operations.
Var fft2(const Var& x);
// Real part of the inverse transform. Throws NumericError naming `stage` when
// the discarded imaginary part exceeds imag_tolerance * max(1, max|real|).
Var ifft2_real(const Var& spectrum, double imag_tolerance = INFINITY, const std::string& stage = "ifft2");
// Binary complex ops broadcast over batch when one operand has batch 1.
Var c_mul(const Var& a, const Var& b);
Var c_div(const Var& a, const Var& b);
Var c_add(const Var& a, const Var& b);
Var c_sub(const Var& a, const Var& b);
Var c_conj(const Var& a);
Var c_abs2(const Var& a);
Var c_add_channel(const Var& z, const Var& per_channel);
Var c_div_channel(const Var& z, const Var& per_channel);
Var block_avg_spectrum(const Var& z, std::size_t s);
Var repeat_spectrum(const Var& z, std::size_t s);
// Places (C, k, k) taps into a (1, C, H, W) canvas with the centre tap at (0, 0).
Var pad_roll_kernel(const Var& taps, std::size_t height, std::size_t width);

}  // namespace dfir::ad
