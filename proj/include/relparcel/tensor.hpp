#ifndef RELPARCEL_TENSOR_HPP
#define RELPARCEL_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace relparcel {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

// One value in the computation graph. Leaves have no inputs; results of ops
// keep their inputs alive and know how to push their grad into them.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  BackwardFn backward;
  std::uint64_t sequence = 0;  // creation order, inputs always smaller

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense f64 tensor, channel-major / row-major. A Tensor is a cheap handle:
/// copies share storage and graph position.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view; mutating a tensor that already fed an op invalidates that op's backward.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }
  double at(std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient view; zeros when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, no graph history, no gradient tracking.
  Tensor detach() const;
  /// Deep copy of values into a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  bool is_leaf() const;
  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// Builds the result of an op. When any input requires a gradient the result
/// records the inputs and the backward rule; otherwise it is a plain leaf.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   detail::BackwardFn backward);

/// While alive on a thread, ops on that thread record no graph (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Topologically ordered record of the nodes a scalar loss depends on.
class Tape {
 public:
  static Tape record(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  /// Node sequence numbers in recorded order.
  std::vector<std::uint64_t> sequence_numbers() const;
  /// Runs every backward rule once, in reverse recorded order.
  void backward(const Tensor& loss) const;

 private:
  std::vector<detail::Node*> nodes_;
};

/// d(loss)/d(leaf) accumulated into every leaf that requires a gradient.
/// Repeated calls accumulate. Throws ContractError for a non-scalar loss.
void backward(const Tensor& loss);

}  // namespace relparcel

#endif  // RELPARCEL_TENSOR_HPP
