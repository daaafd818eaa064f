#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "numerate/diff/array.hpp"

namespace numerate::diff {

enum class Mode { Train, Eval };

struct Parameter {
  std::string name;
  Array value;
  Array grad;
  int group = 0;  // learning-rate group
};

// Owns model parameters at stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Array init, int group = 0);
  Parameter* find(const std::string& name) noexcept;
  const Parameter* find(const std::string& name) const noexcept;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t count() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;
  void zero_grad();

  std::vector<Array> snapshot() const;
  void restore(const std::vector<Array>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Array& value() const;
  double item() const { return value().item(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Records forward values and the closures that propagate adjoints back to
// their inputs. One tape per forward pass; not thread-safe.
class Tape {
 public:
  // Receives the tape, the node's own id and its adjoint.
  using Backward = std::function<void(Tape&, std::uint32_t self, const Array& out_grad)>;

  explicit Tape(Mode mode = Mode::Train, bool record = true) : mode_(mode), record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Mode mode() const noexcept { return mode_; }
  bool recording() const noexcept { return record_; }

  Var constant(Array value);
  Var param(Parameter& p);
  // Records an op result. `parents` decides whether the node needs a gradient;
  // the closure is dropped when no parent does or the tape is not recording.
  Var push(Array value, std::initializer_list<Var> parents, Backward backward);
  Var push(Array value, const std::vector<Var>& parents, Backward backward);

  const Array& value(std::uint32_t id) const { return nodes_[id].value_ref(); }
  bool requires_grad(std::uint32_t id) const noexcept { return nodes_[id].requires_grad; }
  // Adjoint buffer of a node, zero-initialised on first access. For parameter
  // leaves this is the parameter's own gradient accumulator.
  Array& grad(std::uint32_t id);

  // Reverse sweep from a 1x1 loss. Parameter gradients accumulate; the tape is
  // cleared afterwards.
  void backward(Var loss);
  void clear() noexcept { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Array value;
    Array grad;
    Parameter* param = nullptr;
    Backward backward;
    bool requires_grad = false;
    const Array& value_ref() const { return param != nullptr ? param->value : value; }
  };
  Var add_node(Node node);

  Mode mode_;
  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace numerate::diff
