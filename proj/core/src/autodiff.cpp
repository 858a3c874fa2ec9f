#include "dfir/autodiff.hpp"

#include <algorithm>

namespace dfir::ad {
namespace {

void accumulate(Value& into, const Value& add) {
  if (!is_defined(add)) return;
  if (!is_defined(into)) {
    into = add;
    return;
  }
  if (into.index() != add.index()) throw Error("autodiff: gradient kind mismatch during accumulation");
  if (auto* t = std::get_if<Tensor>(&into)) {
    const Tensor& a = std::get<Tensor>(add);
    if (t->shape() != a.shape()) throw ShapeError("grad", "autodiff: gradient shape mismatch");
    auto dst = t->data();
    auto src = a.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  } else {
    auto& z = std::get<ComplexSpectrum>(into);
    const auto& a = std::get<ComplexSpectrum>(add);
    if (z.shape() != a.shape()) throw ShapeError("grad", "autodiff: gradient shape mismatch");
    auto dst = z.data();
    auto src = a.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace

bool is_defined(const Value& v) {
  return std::visit([](const auto& x) { return x.defined(); }, v);
}

Tape& Var::tape() const {
  if (!tape_) throw Error("autodiff: use of an unbound Var");
  return *tape_;
}

const Value& Var::value() const { return tape().value(id_); }

const Tensor& Var::tensor() const {
  const auto* t = std::get_if<Tensor>(&value());
  if (!t) throw Error("autodiff: expected a real tensor from op '" + tape().op_name(id_) + "'");
  return *t;
}

const ComplexSpectrum& Var::spectrum() const {
  const auto* z = std::get_if<ComplexSpectrum>(&value());
  if (!z) throw Error("autodiff: expected a spectrum from op '" + tape().op_name(id_) + "'");
  return *z;
}

const Shape& Var::shape() const {
  return std::visit([](const auto& x) -> const Shape& { return x.shape(); }, value());
}

Var Tape::constant(Value value) { return record("constant", std::move(value), {}, nullptr); }

Var Tape::parameter(const std::string& name, Tensor value) {
  if (parameters_.contains(name)) throw Error("autodiff: parameter '" + name + "' registered twice");
  Var v = record("parameter:" + name, std::move(value), {}, nullptr);
  parameters_.emplace(name, v.id());
  return v;
}

std::optional<Var> Tape::find_parameter(const std::string& name) {
  auto it = parameters_.find(name);
  if (it == parameters_.end()) return std::nullopt;
  return Var(this, it->second);
}

Var Tape::record(std::string op, Value output, const std::vector<Var>& inputs, BackwardFn backward) {
  Node node{std::move(op), std::move(output), {}, std::move(backward)};
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw Error("autodiff: input of '" + node.op + "' belongs to another tape");
    if (in.id_ >= nodes_.size()) throw Error("autodiff: input of '" + node.op + "' is not yet recorded");
    node.inputs.push_back(in.id_);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw Error("autodiff: loss belongs to another tape");
  const auto* out = std::get_if<Tensor>(&nodes_.at(loss.id_).value);
  if (!out || out->numel() != 1) {
    throw ShapeError("loss", "autodiff: backward needs a scalar real loss, got shape " +
                                 shape_string(loss.shape()));
  }

  std::vector<Value> grads(loss.id_ + 1, Tensor{});
  grads[loss.id_] = Tensor::full(out->shape(), 1.0);
  visits_ = 0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!is_defined(grads[id]) || !node.backward) continue;
    std::vector<Value> in_grads = node.backward(grads[id]);
    ++visits_;
    if (in_grads.size() != node.inputs.size()) {
      throw Error("autodiff: op '" + node.op + "' returned the wrong number of gradients");
    }
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t src = node.inputs[k];
      if (src >= id) throw Error("autodiff: cyclic tape at op '" + node.op + "'");
      accumulate(grads[src], in_grads[k]);
    }
  }

  Gradients result;
  for (const auto& [name, id] : parameters_) {
    const Tensor& value = std::get<Tensor>(nodes_[id].value);
    if (id <= loss.id_ && is_defined(grads[id])) {
      result.emplace(name, std::get<Tensor>(grads[id]));
    } else {
      result.emplace(name, Tensor(value.shape()));
    }
  }
  return result;
}

}  // namespace dfir::ad
