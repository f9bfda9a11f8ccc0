#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace microsr {

using Shape = std::vector<std::int64_t>;

// Error taxonomy shared across the library. The CLI maps these to exit codes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

// Reverse-mode autodiff node. A tensor is immutable after creation except for
// its gradient buffer, which backward() owns. Non-leaf tensors keep strong
// references to their inputs so a step's graph stays alive until the loss
// node is released.
template <typename T>
struct Tensor : std::enable_shared_from_this<Tensor<T>> {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward() materializes it
  bool requires_grad = false;

  std::vector<std::shared_ptr<Tensor<T>>> parents;
  std::function<void(Tensor<T>&)> backward_fn;  // pulls this->grad into parents

  Tensor(Shape s, std::vector<T> d, bool rg)
      : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
    if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }

  Tensor(const Tensor&) = delete;
  Tensor& operator=(const Tensor&) = delete;

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  bool is_leaf() const { return parents.empty(); }

  std::int64_t dim(std::size_t i) const {
    if (i >= shape.size()) throw ShapeError("dim index out of range for " + shape_str(shape));
    return shape[i];
  }

  T item() const {
    if (data.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape));
    return data[0];
  }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> data, bool requires_grad = false) {
  return std::make_shared<Tensor<T>>(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
TensorPtr<T> zeros(const Shape& shape, bool requires_grad = false) {
  return make_tensor<T>(shape, std::vector<T>(static_cast<std::size_t>(numel(shape)), T(0)),
                        requires_grad);
}

template <typename T>
TensorPtr<T> full(const Shape& shape, T value, bool requires_grad = false) {
  return make_tensor<T>(shape, std::vector<T>(static_cast<std::size_t>(numel(shape)), value),
                        requires_grad);
}

template <typename T>
TensorPtr<T> scalar(T value) {
  return make_tensor<T>(Shape{1}, std::vector<T>{value}, false);
}

// Leaf copy of the data with the graph links cut.
template <typename T>
TensorPtr<T> detach(const TensorPtr<T>& x) {
  return make_tensor<T>(x->shape, x->data, false);
}

namespace detail {

// Post-order DFS over parents. Output is a topological order with leaves first.
template <typename T>
std::vector<Tensor<T>*> topo_order(Tensor<T>* root) {
  std::vector<Tensor<T>*> order;
  std::unordered_set<Tensor<T>*> visited;
  std::vector<std::pair<Tensor<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Tensor<T>* p = node->parents[next++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

// Populates grad = d(loss)/d(tensor) for every requires_grad tensor reachable
// from the scalar loss. Grads are zeroed first, so each call stands alone.
template <typename T>
void backward(const TensorPtr<T>& loss) {
  if (loss->size() != 1) {
    throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss->shape));
  }
  auto order = detail::topo_order(loss.get());
  for (Tensor<T>* node : order) {
    if (node->requires_grad) node->grad.assign(node->data.size(), T(0));
  }
  if (!loss->requires_grad) return;  // nothing on the path needs gradients
  loss->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor<T>* node = *it;
    if (node->requires_grad && node->backward_fn) node->backward_fn(*node);
  }
}

}  // namespace microsr
