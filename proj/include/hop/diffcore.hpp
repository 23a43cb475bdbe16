#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hop/types.hpp"

// Reverse-mode differentiation over dense row-major tensors. Values are
// matrices whose rows are batch entries; scalars are 1x1.
namespace hop::ad {

struct NodeId {
  std::uint32_t index = 0;
  std::uint64_t tape = 0;
};

/// Receives the adjoint of the node's output and accumulates into the adjoints
/// of its inputs (pre-sized to the input shapes, zero-initialised).
using Backward = std::function<void(const Matrix& grad_out, std::vector<Matrix>& grad_in)>;

enum class Axis {
  kRows,  // reduce over rows: B x n -> 1 x n
  kCols,  // reduce over columns: B x n -> B x 1
};

class Gradients;

class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeId constant(Matrix value);
  NodeId constant(double value);
  /// Leaf whose gradient is reported by backward().
  NodeId parameter(Matrix value);

  /// Appends a node. Inputs must already be on this tape; the value must be finite.
  NodeId record(std::string_view op, std::vector<NodeId> inputs, Matrix value, Backward backward);

  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const;
  std::string_view op(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  bool is_parameter(NodeId id) const;

 private:
  struct Node {
    std::string_view op;
    std::vector<std::uint32_t> inputs;
    Matrix value;
    Backward backward;
    bool parameter = false;
    bool needs_grad = false;
  };

  const Node& node(NodeId id) const;

  std::uint64_t id_;
  std::vector<Node> nodes_;

  friend Gradients backward(const Tape& tape, NodeId output);
};

class Gradients {
 public:
  const Matrix& wrt(NodeId id) const;
  bool has(NodeId id) const { return grads_.count(id.index) > 0; }

 private:
  std::uint64_t tape_ = 0;
  std::unordered_map<std::uint32_t, Matrix> grads_;

  friend Gradients backward(const Tape& tape, NodeId output);
};

/// Exact reverse accumulation from a scalar output to every parameter node.
Gradients backward(const Tape& tape, NodeId output);

// Elementwise binary ops: equal shapes, or either side 1x1 (scalar broadcast).
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId div(Tape& t, NodeId a, NodeId b);
NodeId neg(Tape& t, NodeId a);
NodeId scale(Tape& t, NodeId a, double s);
NodeId add_scalar(Tape& t, NodeId a, double s);

/// a·b, or a·bᵀ when transpose_b.
NodeId matmul(Tape& t, NodeId a, NodeId b, bool transpose_b = false);
/// Adds a 1 x n row to every row of a B x n tensor.
NodeId add_bias(Tape& t, NodeId a, NodeId row);
/// Multiplies row i of a B x n tensor by s(i), s being B x 1.
NodeId scale_rows(Tape& t, NodeId a, NodeId s);

NodeId sum(Tape& t, NodeId a);
NodeId sum_axis(Tape& t, NodeId a, Axis axis);
NodeId mean(Tape& t, NodeId a);
/// Row-wise inner product, B x 1.
NodeId dot(Tape& t, NodeId a, NodeId b);
/// Row-wise Euclidean norm, B x 1. Gradient at the zero row is 0.
NodeId l2norm(Tape& t, NodeId a);
/// Row-wise yᵀ M_i y with one matrix per row (or a single shared matrix), B x 1.
NodeId quadform(Tape& t, NodeId y, std::shared_ptr<const std::vector<Matrix>> mats);

NodeId abs(Tape& t, NodeId a);
NodeId relu(Tape& t, NodeId a);
NodeId sigmoid(Tape& t, NodeId a);
NodeId tanh(Tape& t, NodeId a);
NodeId sin(Tape& t, NodeId a);
NodeId cos(Tape& t, NodeId a);
NodeId tan(Tape& t, NodeId a);
NodeId atan(Tape& t, NodeId a);
NodeId exp(Tape& t, NodeId a);
NodeId log(Tape& t, NodeId a);
NodeId sqrt(Tape& t, NodeId a);
/// Elementwise a^e. For e < 1 the derivative at a = 0 is taken as 0.
NodeId pow(Tape& t, NodeId a, double e);

/// Minimum along an axis; the gradient flows to the smallest index on ties.
NodeId min_over_axis(Tape& t, NodeId a, Axis axis);
NodeId concat(Tape& t, const std::vector<NodeId>& parts, Axis axis);
/// Columns [begin, begin + count).
NodeId slice(Tape& t, NodeId a, int begin, int count);

using ScalarFunction = std::function<NodeId(Tape&, NodeId)>;

struct GradcheckReport {
  double max_rel_error = 0.0;
  Vector analytic;
  Vector numeric;
};

/// Reverse-mode gradient vs central differences (f(x+h e_i) - f(x-h e_i)) / 2h.
/// x enters f as a 1 x n parameter; the error is |a - n| / max(1, |a|, |n|).
GradcheckReport gradcheck(const ScalarFunction& f, const Vector& x, double h = 1e-5);

}  // namespace hop::ad
