#include "qcseis/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

namespace qcseis {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<real> data, bool requires_grad) {
  if (shape.size() > 4) throw ShapeError("tensor rank above 4: " + shape_str(shape));
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  }
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<real>(n, real{0}), requires_grad);
}

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<real>(n, value), requires_grad);
}

Tensor Tensor::scalar(real value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) throw ShapeError("axis out of range for " + shape_str(shape()));
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }
std::span<real> Tensor::data() { return impl_->data; }
std::span<const real> Tensor::data() const { return impl_->data; }

real Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on a tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return impl_->grad.size() == impl_->data.size(); }
std::span<real> Tensor::grad() { return impl_->ensure_grad(); }
std::span<const real> Tensor::grad() const { return impl_->ensure_grad(); }

void Tensor::zero_grad() {
  if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), real{0});
}

bool Tensor::is_leaf() const { return impl_->node == nullptr; }

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_str(shape()) + " to " + shape_str(new_shape));
  }
  Tensor self = *this;
  return make_result(std::move(new_shape), impl_->data, {self}, [self](TensorImpl& out) mutable {
    if (!self.requires_grad()) return;
    auto& g = self.impl()->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
  });
}

void Tensor::backward() const {
  if (!defined() || numel() != 1) {
    throw ContractError("backward() needs a scalar root");
  }
  if (!requires_grad()) throw ContractError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS yields a topological order (parents first).
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{impl_.get(), 0}};
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node_impl, next] = stack.back();
    const auto* node = node_impl->node.get();
    if (node && next < node->parents.size()) {
      TensorImpl* parent = node->parents[next++].impl();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    order.push_back(node_impl);
    stack.pop_back();
  }

  // Interior grads are recomputed from scratch; leaves accumulate.
  for (auto* t : order) {
    if (t->node) t->grad.assign(t->data.size(), real{0});
  }
  impl_->ensure_grad()[0] += real{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->node) (*it)->node->backward(**it);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<real> data, std::vector<Tensor> parents,
                   std::function<void(TensorImpl&)> backward) {
  Tensor out(std::move(shape), std::move(data), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  out.impl_->requires_grad = true;
  out.impl_->node = std::make_shared<Node>(Node{std::move(parents), std::move(backward)});
  return out;
}

}  // namespace qcseis
