#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lagot {

// Dense row-major tensor of doubles. Rank 1 vectors use shape {n},
// matrices {rows, cols}, scalars {1}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<int> shape_, std::vector<double> values_);

  static Tensor zeros(std::vector<int> shape);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(int rows, int cols, std::vector<double> v);

  int numel() const;
  int rows() const;  // rank-2 only
  int cols() const;
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  double& operator[](int i) { return values[static_cast<size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<size_t>(i)]; }
};

// Elementwise nonlinearities available on the tape. One primitive, many kinds.
enum class Nonlin {
  LeakyRelu,  // param = negative slope
  Square,
  Sqrt,       // derivative treated as 0 at the origin; negative input is an error
  Exp,
  Sigmoid,
  Tanh,
  Sin,
  Cos,
  Sign,       // x >= 0 -> 1, else -1; derivative 0
  Recip,      // 1/x
  InvClamp1,  // min(1, 1/x)
};

const char* nonlin_name(Nonlin f);

// Reverse-mode tape over the primitive set
//   matmul, add, scale, elementwise nonlinearity, sum, dot, concatenate, slice.
//
// Nodes are appended with eager evaluation: building the tape records both the
// operation and its forward value. forward() replays the recorded program on
// fresh input values; gradient() runs the reverse sweep for a scalar output.
// A Tape is immutable once built (set_output called) and all evaluation
// entry points are const, so disjoint tapes may be used concurrently.
class Tape {
 public:
  using NodeId = int;

  struct Workspace {
    std::vector<Tensor> vals;
    std::vector<Tensor> adj;
  };

  NodeId input(Tensor initial_value);
  NodeId constant(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId elementwise(NodeId a, Nonlin f, double param = 0.0);
  NodeId sum(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId concat(const std::vector<NodeId>& parts, std::vector<int> out_shape = {});
  NodeId slice(NodeId a, int offset, int count, std::vector<int> out_shape = {});

  // Composites lowered to the primitives above.
  NodeId sub(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }
  // a*b elementwise via the polarization identity ((a+b)^2 - (a-b)^2)/4.
  NodeId hadamard(NodeId a, NodeId b);

  void set_output(NodeId id);
  NodeId output() const { return output_; }
  bool has_output() const { return output_ >= 0; }

  int size() const { return static_cast<int>(nodes_.size()); }
  int input_count() const { return static_cast<int>(inputs_.size()); }
  const std::vector<int>& shape(NodeId id) const;
  const Tensor& value(NodeId id) const;  // recorded forward value
  double scalar_value(NodeId id) const;

  // Replays the recorded program with new input values (given in declaration
  // order) and returns the output value. Deterministic: identical inputs give
  // bit-identical outputs.
  Tensor forward(std::span<const Tensor> inputs) const;
  Tensor forward(std::span<const Tensor> inputs, Workspace& ws) const;

  // d(output)/d(node) for each requested node; output must be scalar.
  std::vector<Tensor> gradient(std::span<const Tensor> inputs,
                               std::span<const NodeId> wrt) const;
  std::vector<Tensor> gradient(std::span<const Tensor> inputs,
                               std::span<const NodeId> wrt, Workspace& ws) const;
  // Gradient at the recorded input values.
  std::vector<Tensor> gradient(std::span<const NodeId> wrt) const;

 private:
  enum class Op { Input, Constant, MatMul, Add, Scale, Elementwise, Sum, Dot, Concat, Slice };

  struct Node {
    Op op;
    int a = -1, b = -1;
    double factor = 0.0;   // Scale
    Nonlin fn = Nonlin::LeakyRelu;
    double fn_param = 0.0;
    int offset = 0;        // Slice
    std::vector<int> parts;  // Concat operands
    std::vector<int> shape;
    Tensor value;          // recorded forward value (authoritative for Constant)
  };

  NodeId push(Node n);
  const Node& node(NodeId id) const;
  void check_id(NodeId id, const char* what) const;
  // vals == nullptr evaluates eagerly against the recorded node values.
  void eval_node(int id, std::vector<Tensor>* vals) const;
  const Tensor& val_of(int id, const std::vector<Tensor>& vals) const;
  void replay(std::span<const Tensor> inputs, std::vector<Tensor>& vals) const;
  void backward(Workspace& ws) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> inputs_;
  NodeId output_ = -1;
};

}  // namespace lagot
