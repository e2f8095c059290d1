#include "snnid/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snnid/errors.hpp"

namespace snnid::ad {

namespace detail {

// Op implementations reach tensor nodes and the active tape through this
// helper; the public surface stays value-only.
struct OpAccess {
  static const NodePtr& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
  static void push(Tape& tape, NodePtr out,
                   std::function<void(const Node&)> pull) {
    tape.steps_.push_back({std::move(out), std::move(pull)});
  }
};

}  // namespace detail

namespace {

using detail::Node;
using detail::NodePtr;
using detail::OpAccess;

thread_local Tape* g_active_tape = nullptr;

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void check_finite_leaf(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v))
      throw NumericError("leaf tensor constructed with non-finite value");
  }
}

NodePtr make_leaf(Shape shape, std::vector<double> values,
                  bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor shape does not match value count");
  check_finite_leaf(values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->leaf = true;
  return node;
}

// Builds an op output; records `pull` when a tape is active and some input
// carries gradient. With no active tape ops compute values only.
Tensor make_op(const char* name, Shape shape, std::vector<double> values,
               std::initializer_list<const Tensor*> inputs,
               std::function<void(const Node&)> pull) {
  for (double v : values) {
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite result in op '") + name +
                         "'");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->leaf = false;
  Tape* tape = Tape::active();
  if (tape != nullptr) {
    bool any_grad = false;
    for (const Tensor* in : inputs) any_grad = any_grad || in->requires_grad();
    if (any_grad) {
      node->requires_grad = true;
      node->tape = tape;
      OpAccess::push(*tape, node, std::move(pull));
    }
  }
  return OpAccess::wrap(std::move(node));
}

void check_same_shape(const char* name, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(name) + ": shape mismatch");
}

void accumulate(Node& node, std::size_t i, double g) {
  node.ensure_grad()[i] += g;
}

}  // namespace

// ---------------------------------------------------------------- Tensor --

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({}, {value}, requires_grad));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf({rows, cols}, std::move(values), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), 0.0);
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), value);
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->values.size(); }

std::size_t Tensor::rows() const {
  if (!is_matrix()) throw std::invalid_argument("rows(): not a matrix");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (!is_matrix()) throw std::invalid_argument("cols(): not a matrix");
  return node_->shape[1];
}

bool Tensor::is_scalar() const { return node_ && node_->values.size() == 1; }
bool Tensor::is_matrix() const { return node_ && node_->shape.size() == 2; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->leaf; }

const std::vector<double>& Tensor::values() const { return node_->values; }

double Tensor::value() const {
  if (!is_scalar()) throw std::invalid_argument("value(): not a scalar");
  return node_->values[0];
}

double Tensor::operator[](std::size_t i) const { return node_->values.at(i); }

std::vector<double> Tensor::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return std::vector<double>(node_->values.size(), 0.0);
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::add_to_values(std::span<const double> delta) {
  if (!node_->leaf)
    throw std::invalid_argument("add_to_values: not a leaf tensor");
  if (delta.size() != node_->values.size())
    throw std::invalid_argument("add_to_values: size mismatch");
  for (std::size_t i = 0; i < delta.size(); ++i) node_->values[i] += delta[i];
  check_finite_leaf(node_->values);
}

void Tensor::set_values(std::vector<double> values) {
  if (!node_->leaf)
    throw std::invalid_argument("set_values: not a leaf tensor");
  if (values.size() != node_->values.size())
    throw std::invalid_argument("set_values: size mismatch");
  check_finite_leaf(values);
  node_->values = std::move(values);
}

Tensor Tensor::detached() const {
  return Tensor(make_leaf(node_->shape, node_->values, false));
}

// ------------------------------------------------------------------ Tape --

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = nullptr;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar())
    throw std::logic_error("backward: loss must be a scalar tensor");
  if (consumed_)
    throw std::logic_error(
        "backward: tape already consumed (double backward is not supported)");
  const NodePtr& node = OpAccess::node(loss);
  if (node->tape != this)
    throw std::logic_error("backward: loss was not recorded on this tape");
  node->ensure_grad()[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // not on any path to the loss
    it->pull(*it->out);
  }
  consumed_ = true;
  steps_.clear();
}

// ------------------------------------------------------------ primitives --

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  NodePtr an = OpAccess::node(a), bn = OpAccess::node(b);
  return make_op("add", a.shape(), std::move(out), {&a, &b},
                 [an, bn](const Node& o) {
                   if (an->requires_grad)
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       accumulate(*an, i, o.grad[i]);
                   if (bn->requires_grad)
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       accumulate(*bn, i, o.grad[i]);
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  NodePtr an = OpAccess::node(a), bn = OpAccess::node(b);
  return make_op("sub", a.shape(), std::move(out), {&a, &b},
                 [an, bn](const Node& o) {
                   if (an->requires_grad)
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       accumulate(*an, i, o.grad[i]);
                   if (bn->requires_grad)
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       accumulate(*bn, i, -o.grad[i]);
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  NodePtr an = OpAccess::node(a), bn = OpAccess::node(b);
  return make_op("mul", a.shape(), std::move(out), {&a, &b},
                 [an, bn](const Node& o) {
                   if (an->requires_grad)
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       accumulate(*an, i, o.grad[i] * bn->values[i]);
                   if (bn->requires_grad)
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       accumulate(*bn, i, o.grad[i] * an->values[i]);
                 });
}

Tensor scalar_mul(const Tensor& a, double c) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  NodePtr an = OpAccess::node(a);
  return make_op("scalar_mul", a.shape(), std::move(out), {&a},
                 [an, c](const Node& o) {
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     accumulate(*an, i, o.grad[i] * c);
                 });
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (!m.is_matrix() || m.cols() != v.size() || v.shape().size() != 1)
    throw std::invalid_argument("matvec: shape mismatch");
  const std::size_t rows = m.rows(), cols = m.cols();
  const auto& mv = m.values();
  const auto& vv = v.values();
  std::vector<double> out(rows, 0.0);
  // Dense rows against a possibly sparse vector: spike vectors are mostly
  // zero, so gather the active columns first.
  std::vector<std::size_t> active;
  active.reserve(cols);
  for (std::size_t j = 0; j < cols; ++j)
    if (vv[j] != 0.0) active.push_back(j);
  if (active.size() * 2 < cols) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = mv.data() + i * cols;
      double acc = 0.0;
      for (std::size_t j : active) acc += row[j] * vv[j];
      out[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = mv.data() + i * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j] * vv[j];
      out[i] = acc;
    }
  }
  NodePtr mn = OpAccess::node(m), vn = OpAccess::node(v);
  return make_op(
      "matvec", {rows}, std::move(out), {&m, &v},
      [mn, vn, rows, cols](const Node& o) {
        if (mn->requires_grad) {
          auto& gm = mn->ensure_grad();
          for (std::size_t i = 0; i < rows; ++i) {
            const double gi = o.grad[i];
            if (gi == 0.0) continue;
            double* grow = gm.data() + i * cols;
            const auto& x = vn->values;
            for (std::size_t j = 0; j < cols; ++j) {
              if (x[j] != 0.0) grow[j] += gi * x[j];
            }
          }
        }
        if (vn->requires_grad) {
          auto& gv = vn->ensure_grad();
          const auto& w = mn->values;
          for (std::size_t i = 0; i < rows; ++i) {
            const double gi = o.grad[i];
            if (gi == 0.0) continue;
            const double* row = w.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) gv[j] += gi * row[j];
          }
        }
      });
}

Tensor tanh(const Tensor& a) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  NodePtr an = OpAccess::node(a);
  return make_op("tanh", a.shape(), std::move(out), {&a},
                 [an](const Node& o) {
                   for (std::size_t i = 0; i < o.grad.size(); ++i) {
                     const double y = o.values[i];
                     accumulate(*an, i, o.grad[i] * (1.0 - y * y));
                   }
                 });
}

Tensor exp(const Tensor& a) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  NodePtr an = OpAccess::node(a);
  return make_op("exp", a.shape(), std::move(out), {&a},
                 [an](const Node& o) {
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     accumulate(*an, i, o.grad[i] * o.values[i]);
                 });
}

Tensor log(const Tensor& a) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(av[i]);
  NodePtr an = OpAccess::node(a);
  return make_op("log", a.shape(), std::move(out), {&a},
                 [an](const Node& o) {
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     accumulate(*an, i, o.grad[i] / an->values[i]);
                 });
}

Tensor square(const Tensor& a) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * av[i];
  NodePtr an = OpAccess::node(a);
  return make_op("square", a.shape(), std::move(out), {&a},
                 [an](const Node& o) {
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     accumulate(*an, i, o.grad[i] * 2.0 * an->values[i]);
                 });
}

Tensor reciprocal(const Tensor& a) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / av[i];
  NodePtr an = OpAccess::node(a);
  return make_op("reciprocal", a.shape(), std::move(out), {&a},
                 [an](const Node& o) {
                   for (std::size_t i = 0; i < o.grad.size(); ++i) {
                     const double y = o.values[i];
                     accumulate(*an, i, -o.grad[i] * y * y);
                   }
                 });
}

Tensor mean(const Tensor& a) {
  const auto& av = a.values();
  double acc = 0.0;
  for (double v : av) acc += v;
  const double n = static_cast<double>(av.size());
  NodePtr an = OpAccess::node(a);
  return make_op("mean", {}, {acc / n}, {&a}, [an, n](const Node& o) {
    const double g = o.grad[0] / n;
    for (std::size_t i = 0; i < an->values.size(); ++i) accumulate(*an, i, g);
  });
}

Tensor sum(const Tensor& a) {
  const auto& av = a.values();
  double acc = 0.0;
  for (double v : av) acc += v;
  NodePtr an = OpAccess::node(a);
  return make_op("sum", {}, {acc}, {&a}, [an](const Node& o) {
    const double g = o.grad[0];
    for (std::size_t i = 0; i < an->values.size(); ++i) accumulate(*an, i, g);
  });
}

Tensor element(const Tensor& a, std::size_t i) {
  if (i >= a.size()) throw std::invalid_argument("element: index out of range");
  NodePtr an = OpAccess::node(a);
  return make_op("element", {}, {a.values()[i]}, {&a},
                 [an, i](const Node& o) { accumulate(*an, i, o.grad[0]); });
}

Tensor clamp_by_norm(const Tensor& a, double max_norm) {
  if (!(max_norm > 0.0))
    throw std::invalid_argument("clamp_by_norm: max_norm must be positive");
  const auto& av = a.values();
  double sq = 0.0;
  for (double v : av) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) {
    // Identity branch; gradient passes through unchanged.
    std::vector<double> out = av;
    NodePtr an = OpAccess::node(a);
    return make_op("clamp_by_norm", a.shape(), std::move(out), {&a},
                   [an](const Node& o) {
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       accumulate(*an, i, o.grad[i]);
                   });
  }
  const double scale = max_norm / norm;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * scale;
  NodePtr an = OpAccess::node(a);
  // y = c * x / |x|; dy/dx = (c/|x|) (I - x x^T / |x|^2)
  return make_op("clamp_by_norm", a.shape(), std::move(out), {&a},
                 [an, scale, norm](const Node& o) {
                   const auto& x = an->values;
                   double gdotx = 0.0;
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     gdotx += o.grad[i] * x[i];
                   const double coef = gdotx / (norm * norm);
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     accumulate(*an, i, scale * (o.grad[i] - coef * x[i]));
                 });
}

Tensor spike_threshold(const Tensor& u_minus_thr, const SurrogateConfig& cfg) {
  if (!(cfg.alpha > 0.0))
    throw std::invalid_argument("spike_threshold: alpha must be positive");
  const auto& av = u_minus_thr.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] >= 0.0 ? 1.0 : 0.0;  // theta(0) = 1
  NodePtr an = OpAccess::node(u_minus_thr);
  const double alpha = cfg.alpha;
  return make_op("spike_threshold", u_minus_thr.shape(), std::move(out),
                 {&u_minus_thr}, [an, alpha](const Node& o) {
                   for (std::size_t i = 0; i < o.grad.size(); ++i) {
                     const double denom = 1.0 + alpha * std::abs(an->values[i]);
                     accumulate(*an, i, o.grad[i] / (denom * denom));
                   }
                 });
}

}  // namespace snnid::ad
