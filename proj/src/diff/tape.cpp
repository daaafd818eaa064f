#include "numerate/diff/tape.hpp"

#include "numerate/errors.hpp"

namespace numerate::diff {

Parameter& ParameterStore::add(std::string name, Array init, int group) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Array::zeros_like(init);
  p->value = std::move(init);
  p->group = group;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) noexcept {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const noexcept {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

std::vector<Array> ParameterStore::snapshot() const {
  std::vector<Array> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Array>& values) {
  if (values.size() != params_.size()) {
    throw ShapeError("snapshot has " + std::to_string(values.size()) + " arrays, store has " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i]->value)) {
      throw ShapeError("snapshot shape " + values[i].shape_string() + " vs parameter " +
                       params_[i]->name + " " + params_[i]->value.shape_string());
    }
    params_[i]->value = values[i];
  }
}

const Array& Var::value() const { return tape->value(id); }

Var Tape::add_node(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Array value) {
  Node n;
  n.value = std::move(value);
  return add_node(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.requires_grad = record_;
  return add_node(std::move(n));
}

Var Tape::push(Array value, std::initializer_list<Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& v : parents) {
      if (nodes_[v.id].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return add_node(std::move(n));
}

Var Tape::push(Array value, const std::vector<Var>& parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& v : parents) {
      if (nodes_[v.id].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return add_node(std::move(n));
}

Array& Tape::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.param != nullptr) {
    if (n.param->grad.size() != n.param->value.size()) n.param->grad = Array::zeros_like(n.param->value);
    return n.param->grad;
  }
  if (n.grad.size() != n.value.size()) n.grad = Array::zeros_like(n.value);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("loss is not recorded on this tape");
  if (!record_) throw std::logic_error("backward() on a non-recording tape");
  const Array& lv = value(loss.id);
  if (lv.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + lv.shape_string());
  }
  if (nodes_[loss.id].requires_grad) {
    grad(loss.id)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, static_cast<std::uint32_t>(i), n.grad);
    }
  }
  clear();
}

}  // namespace numerate::diff
