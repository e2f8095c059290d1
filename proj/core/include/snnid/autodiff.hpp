#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace snnid::ad {

using Shape = std::vector<std::size_t>;

class Tape;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  const Tape* tape = nullptr;  // tape the producing op was recorded on

  std::size_t size() const { return values.size(); }
  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

struct OpAccess;

}  // namespace detail

// Dense 64-bit float tensor with value semantics over a shared node.
// Leaf tensors reject non-finite values at construction; op outputs are
// checked after every primitive and raise NumericError naming the op.
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;  // matrices only
  std::size_t cols() const;
  bool is_scalar() const;
  bool is_matrix() const;
  bool requires_grad() const;
  bool is_leaf() const;

  const std::vector<double>& values() const;
  double value() const;  // scalar tensors
  double operator[](std::size_t i) const;

  // Gradient of the last backward pass; zeros if this tensor was never on a
  // differentiated path.
  std::vector<double> grad() const;
  bool has_grad() const;
  void zero_grad();

  // In-place weight updates between forward passes. Leaf tensors only.
  void add_to_values(std::span<const double> delta);
  void set_values(std::vector<double> values);

  // Gradient-stopped copy of the current values.
  Tensor detached() const;

 private:
  friend class Tape;
  friend struct detail::OpAccess;
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  detail::NodePtr node_;
};

// Define-by-run record of one forward pass. Ops record themselves on the
// active tape (see Scope); backward() replays the record once, in reverse,
// then leaves the tape consumed. A fresh tape is built per forward pass.
// One tape per thread; distinct tapes may run on distinct threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Activates this tape for recording on the current thread for the
  // lifetime of the returned scope.
  [[nodiscard]] Scope record() { return Scope(*this); }

  static Tape* active();

  // Accumulates d(loss)/d(leaf) into every reachable leaf with
  // requires_grad. `loss` must be a scalar recorded on this tape. The tape
  // is consumed; a second backward() is an error (no double backward).
  void backward(const Tensor& loss);

  std::size_t recorded_ops() const { return steps_.size(); }
  bool consumed() const { return consumed_; }

 private:
  friend struct detail::OpAccess;
  struct Step {
    detail::NodePtr out;
    std::function<void(const detail::Node&)> pull;
  };
  std::vector<Step> steps_;
  bool consumed_ = false;
};

// Fast-sigmoid surrogate slope for the spike nonlinearity.
struct SurrogateConfig {
  double alpha = 25.0;
};

// Elementwise and reduction primitives. Shapes must match exactly where two
// tensors are combined; there is no broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double c);
Tensor matvec(const Tensor& m, const Tensor& v);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor element(const Tensor& a, std::size_t i);

// Rescales a to euclidean norm max_norm when it exceeds it; identity
// otherwise.
Tensor clamp_by_norm(const Tensor& a, double max_norm);

// Heaviside step on (membrane - threshold), with theta(0) = 1. The backward
// pass uses the fast-sigmoid surrogate 1 / (1 + alpha * |x|)^2 in place of
// the step's distributional derivative.
Tensor spike_threshold(const Tensor& u_minus_thr, const SurrogateConfig& cfg);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scalar_mul(a, c); }
inline Tensor operator*(const Tensor& a, double c) { return scalar_mul(a, c); }

}  // namespace snnid::ad
