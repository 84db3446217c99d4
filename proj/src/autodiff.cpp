#include "lagot/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lagot {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

int shape_numel(const std::vector<int>& s) {
  int n = 1;
  for (int d : s) {
    if (d < 0) fail("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

double apply_fn(Nonlin f, double p, double x) {
  switch (f) {
    case Nonlin::LeakyRelu: return x >= 0.0 ? x : p * x;
    case Nonlin::Square: return x * x;
    case Nonlin::Sqrt:
      if (x < 0.0) fail("sqrt of negative value on tape");
      return std::sqrt(x);
    case Nonlin::Exp: return std::exp(x);
    case Nonlin::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Nonlin::Tanh: return std::tanh(x);
    case Nonlin::Sin: return std::sin(x);
    case Nonlin::Cos: return std::cos(x);
    case Nonlin::Sign: return x >= 0.0 ? 1.0 : -1.0;
    case Nonlin::Recip: return 1.0 / x;
    case Nonlin::InvClamp1: return x > 1.0 ? 1.0 / x : 1.0;
  }
  fail("unknown nonlinearity");
}

double apply_fn_deriv(Nonlin f, double p, double x) {
  switch (f) {
    case Nonlin::LeakyRelu: return x >= 0.0 ? 1.0 : p;
    case Nonlin::Square: return 2.0 * x;
    case Nonlin::Sqrt: return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0;
    case Nonlin::Exp: return std::exp(x);
    case Nonlin::Sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Nonlin::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Nonlin::Sin: return std::cos(x);
    case Nonlin::Cos: return -std::sin(x);
    case Nonlin::Sign: return 0.0;
    case Nonlin::Recip: return -1.0 / (x * x);
    case Nonlin::InvClamp1: return x > 1.0 ? -1.0 / (x * x) : 0.0;
  }
  fail("unknown nonlinearity");
}

}  // namespace

const char* nonlin_name(Nonlin f) {
  switch (f) {
    case Nonlin::LeakyRelu: return "leaky_relu";
    case Nonlin::Square: return "square";
    case Nonlin::Sqrt: return "sqrt";
    case Nonlin::Exp: return "exp";
    case Nonlin::Sigmoid: return "sigmoid";
    case Nonlin::Tanh: return "tanh";
    case Nonlin::Sin: return "sin";
    case Nonlin::Cos: return "cos";
    case Nonlin::Sign: return "sign";
    case Nonlin::Recip: return "recip";
    case Nonlin::InvClamp1: return "inv_clamp1";
  }
  return "?";
}

Tensor::Tensor(std::vector<int> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
  if (shape_numel(shape) != static_cast<int>(values.size()))
    fail("tensor shape " + shape_str(shape) + " does not match " +
         std::to_string(values.size()) + " values");
}

Tensor Tensor::zeros(std::vector<int> shape) {
  int n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

int Tensor::numel() const { return static_cast<int>(values.size()); }

int Tensor::rows() const {
  if (shape.size() != 2) fail("rows() on tensor of shape " + shape_str(shape));
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() != 2) fail("cols() on tensor of shape " + shape_str(shape));
  return shape[1];
}

bool Tensor::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::NodeId Tape::push(Node n) {
  if (output_ >= 0) fail("tape is sealed; set_output was already called");
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  eval_node(id, nullptr);
  return id;
}

const Tape::Node& Tape::node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }

void Tape::check_id(NodeId id, const char* what) const {
  if (id < 0 || id >= size())
    fail(std::string(what) + ": node " + std::to_string(id) + " is not on the tape");
}

Tape::NodeId Tape::input(Tensor initial_value) {
  Node n;
  n.op = Op::Input;
  n.shape = initial_value.shape;
  n.value = std::move(initial_value);
  if (output_ >= 0) fail("tape is sealed; set_output was already called");
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  inputs_.push_back(id);
  return id;
}

Tape::NodeId Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.shape = value.shape;
  n.value = std::move(value);
  if (output_ >= 0) fail("tape is sealed; set_output was already called");
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  const auto& sa = nodes_[a].shape;
  const auto& sb = nodes_[b].shape;
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  if (sa.size() == 2 && sb.size() == 2) {
    if (sa[1] != sb[0])
      fail("tape node " + std::to_string(size()) + " (matmul): inner dimensions " +
           shape_str(sa) + " x " + shape_str(sb));
    n.shape = {sa[0], sb[1]};
  } else if (sa.size() == 2 && sb.size() == 1) {
    if (sa[1] != sb[0])
      fail("tape node " + std::to_string(size()) + " (matmul): inner dimensions " +
           shape_str(sa) + " x " + shape_str(sb));
    n.shape = {sa[0]};
  } else if (sa.size() == 1 && sb.size() == 2) {
    if (sa[0] != sb[0])
      fail("tape node " + std::to_string(size()) + " (matmul): inner dimensions " +
           shape_str(sa) + " x " + shape_str(sb));
    n.shape = {sb[1]};
  } else {
    fail("tape node " + std::to_string(size()) + " (matmul): unsupported ranks " +
         shape_str(sa) + " x " + shape_str(sb));
  }
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check_id(a, "add");
  check_id(b, "add");
  if (nodes_[a].shape != nodes_[b].shape)
    fail("tape node " + std::to_string(size()) + " (add): shapes " +
         shape_str(nodes_[a].shape) + " vs " + shape_str(nodes_[b].shape));
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double factor) {
  check_id(a, "scale");
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.factor = factor;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

Tape::NodeId Tape::elementwise(NodeId a, Nonlin f, double param) {
  check_id(a, "elementwise");
  Node n;
  n.op = Op::Elementwise;
  n.a = a;
  n.fn = f;
  n.fn_param = param;
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a) {
  check_id(a, "sum");
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.shape = {1};
  return push(std::move(n));
}

Tape::NodeId Tape::dot(NodeId a, NodeId b) {
  check_id(a, "dot");
  check_id(b, "dot");
  if (shape_numel(nodes_[a].shape) != shape_numel(nodes_[b].shape))
    fail("tape node " + std::to_string(size()) + " (dot): element counts differ, " +
         shape_str(nodes_[a].shape) + " vs " + shape_str(nodes_[b].shape));
  Node n;
  n.op = Op::Dot;
  n.a = a;
  n.b = b;
  n.shape = {1};
  return push(std::move(n));
}

Tape::NodeId Tape::concat(const std::vector<NodeId>& parts, std::vector<int> out_shape) {
  if (parts.empty()) fail("concat: no operands");
  int total = 0;
  for (NodeId p : parts) {
    check_id(p, "concat");
    total += shape_numel(nodes_[p].shape);
  }
  Node n;
  n.op = Op::Concat;
  n.parts = parts;
  if (out_shape.empty()) {
    n.shape = {total};
  } else {
    if (shape_numel(out_shape) != total)
      fail("tape node " + std::to_string(size()) + " (concat): requested shape " +
           shape_str(out_shape) + " holds " + std::to_string(shape_numel(out_shape)) +
           " values, operands supply " + std::to_string(total));
    n.shape = std::move(out_shape);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::slice(NodeId a, int offset, int count, std::vector<int> out_shape) {
  check_id(a, "slice");
  int n_in = shape_numel(nodes_[a].shape);
  if (offset < 0 || count < 0 || offset + count > n_in)
    fail("tape node " + std::to_string(size()) + " (slice): range [" + std::to_string(offset) +
         ", " + std::to_string(offset + count) + ") outside " + std::to_string(n_in) +
         " elements");
  Node n;
  n.op = Op::Slice;
  n.a = a;
  n.offset = offset;
  if (out_shape.empty()) {
    n.shape = {count};
  } else {
    if (shape_numel(out_shape) != count)
      fail("tape node " + std::to_string(size()) + " (slice): requested shape " +
           shape_str(out_shape) + " does not hold " + std::to_string(count) + " values");
    n.shape = std::move(out_shape);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
  NodeId s = elementwise(add(a, b), Nonlin::Square);
  NodeId d = elementwise(sub(a, b), Nonlin::Square);
  return scale(sub(s, d), 0.25);
}

void Tape::set_output(NodeId id) {
  check_id(id, "set_output");
  if (output_ >= 0) fail("set_output called twice");
  output_ = id;
}

const std::vector<int>& Tape::shape(NodeId id) const {
  check_id(id, "shape");
  return nodes_[id].shape;
}

const Tensor& Tape::value(NodeId id) const {
  check_id(id, "value");
  return nodes_[id].value;
}

double Tape::scalar_value(NodeId id) const {
  const Tensor& t = value(id);
  if (t.numel() != 1) fail("scalar_value: node " + std::to_string(id) + " is not scalar");
  return t.values[0];
}

// Evaluates node `id` into vals, or eagerly into the recorded node values
// when vals is null.
void Tape::eval_node(int id, std::vector<Tensor>* vals) const {
  const bool eager = (vals == nullptr);
  const Node& n = nodes_[static_cast<size_t>(id)];

  auto operand = [&](int oid) -> const Tensor& {
    const Node& o = nodes_[static_cast<size_t>(oid)];
    if (eager || o.op == Op::Constant) return o.value;
    return (*vals)[static_cast<size_t>(oid)];
  };
  auto result = [&](int rid) -> Tensor& {
    if (eager) return const_cast<Node&>(nodes_[static_cast<size_t>(rid)]).value;
    return (*vals)[static_cast<size_t>(rid)];
  };

  Tensor& out = result(id);
  out.shape = n.shape;
  out.values.resize(static_cast<size_t>(shape_numel(n.shape)));

  switch (n.op) {
    case Op::Input:
    case Op::Constant:
      break;  // handled by caller
    case Op::MatMul: {
      const Tensor& A = operand(n.a);
      const Tensor& B = operand(n.b);
      int m, k, p;
      if (A.shape.size() == 2) {
        m = A.shape[0];
        k = A.shape[1];
      } else {
        m = 1;
        k = A.shape[0];
      }
      p = (B.shape.size() == 2) ? B.shape[1] : 1;
      const double* a = A.values.data();
      const double* b = B.values.data();
      double* c = out.values.data();
      for (int i = 0; i < m * p; ++i) c[i] = 0.0;
      for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
          double av = a[i * k + l];
          if (av == 0.0) continue;
          const double* brow = b + l * p;
          double* crow = c + i * p;
          for (int j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
      }
      break;
    }
    case Op::Add: {
      const Tensor& A = operand(n.a);
      const Tensor& B = operand(n.b);
      for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = A.values[i] + B.values[i];
      break;
    }
    case Op::Scale: {
      const Tensor& A = operand(n.a);
      for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = n.factor * A.values[i];
      break;
    }
    case Op::Elementwise: {
      const Tensor& A = operand(n.a);
      for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = apply_fn(n.fn, n.fn_param, A.values[i]);
      break;
    }
    case Op::Sum: {
      const Tensor& A = operand(n.a);
      double s = 0.0;
      for (double v : A.values) s += v;
      out.values[0] = s;
      break;
    }
    case Op::Dot: {
      const Tensor& A = operand(n.a);
      const Tensor& B = operand(n.b);
      double s = 0.0;
      for (size_t i = 0; i < A.values.size(); ++i) s += A.values[i] * B.values[i];
      out.values[0] = s;
      break;
    }
    case Op::Concat: {
      double* o = out.values.data();
      for (int pid : n.parts) {
        const Tensor& P = operand(pid);
        for (double v : P.values) *o++ = v;
      }
      break;
    }
    case Op::Slice: {
      const Tensor& A = operand(n.a);
      for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = A.values[static_cast<size_t>(n.offset) + i];
      break;
    }
  }
}

const Tensor& Tape::val_of(int id, const std::vector<Tensor>& vals) const {
  const Node& o = nodes_[static_cast<size_t>(id)];
  if (o.op == Op::Constant) return o.value;
  return vals[static_cast<size_t>(id)];
}

void Tape::replay(std::span<const Tensor> inputs, std::vector<Tensor>& vals) const {
  if (static_cast<int>(inputs.size()) != input_count())
    fail("forward: expected " + std::to_string(input_count()) + " inputs, got " +
         std::to_string(inputs.size()));
  vals.resize(nodes_.size());
  for (size_t k = 0; k < inputs_.size(); ++k) {
    int id = inputs_[k];
    if (inputs[k].shape != nodes_[static_cast<size_t>(id)].shape)
      fail("forward: input " + std::to_string(k) + " has shape " + shape_str(inputs[k].shape) +
           ", tape node " + std::to_string(id) + " declares " +
           shape_str(nodes_[static_cast<size_t>(id)].shape));
    vals[static_cast<size_t>(id)] = inputs[k];
  }
  for (int id = 0; id < size(); ++id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.op == Op::Input || n.op == Op::Constant) continue;
    eval_node(id, &vals);
  }
}

Tensor Tape::forward(std::span<const Tensor> inputs) const {
  Workspace ws;
  return forward(inputs, ws);
}

Tensor Tape::forward(std::span<const Tensor> inputs, Workspace& ws) const {
  if (output_ < 0) fail("forward: tape has no output");
  replay(inputs, ws.vals);
  return val_of(output_, ws.vals);
}

void Tape::backward(Workspace& ws) const {
  const Node& out = nodes_[static_cast<size_t>(output_)];
  if (shape_numel(out.shape) != 1)
    fail("gradient: output node " + std::to_string(output_) + " has shape " +
         shape_str(out.shape) + ", expected a scalar");

  ws.adj.resize(nodes_.size());
  for (int id = 0; id < size(); ++id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    Tensor& a = ws.adj[static_cast<size_t>(id)];
    a.shape = n.shape;
    a.values.assign(static_cast<size_t>(shape_numel(n.shape)), 0.0);
  }
  ws.adj[static_cast<size_t>(output_)].values[0] = 1.0;

  for (int id = size() - 1; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.op == Op::Input || n.op == Op::Constant) continue;
    const Tensor& g = ws.adj[static_cast<size_t>(id)];

    auto adj = [&](int oid) -> Tensor& { return ws.adj[static_cast<size_t>(oid)]; };
    auto is_const = [&](int oid) {
      return nodes_[static_cast<size_t>(oid)].op == Op::Constant;
    };

    switch (n.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::MatMul: {
        const Tensor& A = val_of(n.a, ws.vals);
        const Tensor& B = val_of(n.b, ws.vals);
        int m, k, p;
        if (A.shape.size() == 2) {
          m = A.shape[0];
          k = A.shape[1];
        } else {
          m = 1;
          k = A.shape[0];
        }
        p = (B.shape.size() == 2) ? B.shape[1] : 1;
        // dA = g * B^T, dB = A^T * g
        if (!is_const(n.a)) {
          double* da = adj(n.a).values.data();
          for (int i = 0; i < m; ++i)
            for (int l = 0; l < k; ++l) {
              double s = 0.0;
              const double* grow = g.values.data() + i * p;
              const double* brow = B.values.data() + l * p;
              for (int j = 0; j < p; ++j) s += grow[j] * brow[j];
              da[i * k + l] += s;
            }
        }
        if (!is_const(n.b)) {
          double* db = adj(n.b).values.data();
          for (int i = 0; i < m; ++i) {
            const double* arow = A.values.data() + i * k;
            const double* grow = g.values.data() + i * p;
            for (int l = 0; l < k; ++l) {
              double av = arow[l];
              if (av == 0.0) continue;
              double* brow = db + l * p;
              for (int j = 0; j < p; ++j) brow[j] += av * grow[j];
            }
          }
        }
        break;
      }
      case Op::Add: {
        if (!is_const(n.a)) {
          double* da = adj(n.a).values.data();
          for (size_t i = 0; i < g.values.size(); ++i) da[i] += g.values[i];
        }
        if (!is_const(n.b)) {
          double* db = adj(n.b).values.data();
          for (size_t i = 0; i < g.values.size(); ++i) db[i] += g.values[i];
        }
        break;
      }
      case Op::Scale: {
        if (!is_const(n.a)) {
          double* da = adj(n.a).values.data();
          for (size_t i = 0; i < g.values.size(); ++i) da[i] += n.factor * g.values[i];
        }
        break;
      }
      case Op::Elementwise: {
        if (!is_const(n.a)) {
          const Tensor& X = val_of(n.a, ws.vals);
          double* da = adj(n.a).values.data();
          for (size_t i = 0; i < g.values.size(); ++i)
            da[i] += apply_fn_deriv(n.fn, n.fn_param, X.values[i]) * g.values[i];
        }
        break;
      }
      case Op::Sum: {
        if (!is_const(n.a)) {
          double gv = g.values[0];
          double* da = adj(n.a).values.data();
          for (size_t i = 0; i < adj(n.a).values.size(); ++i) da[i] += gv;
        }
        break;
      }
      case Op::Dot: {
        double gv = g.values[0];
        const Tensor& A = val_of(n.a, ws.vals);
        const Tensor& B = val_of(n.b, ws.vals);
        if (!is_const(n.a)) {
          double* da = adj(n.a).values.data();
          for (size_t i = 0; i < B.values.size(); ++i) da[i] += gv * B.values[i];
        }
        if (!is_const(n.b)) {
          double* db = adj(n.b).values.data();
          for (size_t i = 0; i < A.values.size(); ++i) db[i] += gv * A.values[i];
        }
        break;
      }
      case Op::Concat: {
        int off = 0;
        for (int pid : n.parts) {
          int cnt = shape_numel(nodes_[static_cast<size_t>(pid)].shape);
          if (!is_const(pid)) {
            double* dp = adj(pid).values.data();
            for (int i = 0; i < cnt; ++i) dp[i] += g.values[static_cast<size_t>(off + i)];
          }
          off += cnt;
        }
        break;
      }
      case Op::Slice: {
        if (!is_const(n.a)) {
          double* da = adj(n.a).values.data();
          for (size_t i = 0; i < g.values.size(); ++i)
            da[static_cast<size_t>(n.offset) + i] += g.values[i];
        }
        break;
      }
    }
  }
}

std::vector<Tensor> Tape::gradient(std::span<const Tensor> inputs,
                                   std::span<const NodeId> wrt) const {
  Workspace ws;
  return gradient(inputs, wrt, ws);
}

std::vector<Tensor> Tape::gradient(std::span<const Tensor> inputs, std::span<const NodeId> wrt,
                                   Workspace& ws) const {
  if (output_ < 0) fail("gradient: tape has no output");
  for (NodeId id : wrt) check_id(id, "gradient");
  replay(inputs, ws.vals);
  backward(ws);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (NodeId id : wrt) out.push_back(ws.adj[static_cast<size_t>(id)]);
  return out;
}

std::vector<Tensor> Tape::gradient(std::span<const NodeId> wrt) const {
  std::vector<Tensor> inputs;
  inputs.reserve(inputs_.size());
  for (NodeId id : inputs_) inputs.push_back(nodes_[static_cast<size_t>(id)].value);
  return gradient(inputs, wrt);
}

}  // namespace lagot
