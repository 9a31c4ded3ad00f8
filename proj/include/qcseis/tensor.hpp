#pragma once

// Minimal reverse-mode automatic differentiation over dense tensors.
//
// A Tensor is a shared handle: copies alias the same storage, which is what
// lets parameter lists, optimizers and graph nodes refer to one buffer.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qcseis/common.hpp"

namespace qcseis {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<real> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, real value, bool requires_grad = false);
  static Tensor scalar(real value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<real> data();
  std::span<const real> data() const;
  real item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer; allocated (zeroed) on first access.
  std::span<real> grad();
  std::span<const real> grad() const;
  void zero_grad();

  bool is_leaf() const;

  /// Deep copy of the values with no graph linkage.
  Tensor detach() const;
  /// Same values under a new shape; gradients flow through.
  Tensor reshape(Shape shape) const;

  /// Runs reverse-mode accumulation from this scalar root.
  void backward() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape, std::vector<real>, std::vector<Tensor>,
                            std::function<void(TensorImpl&)>);

  std::shared_ptr<TensorImpl> impl_;
};

struct Node {
  std::vector<Tensor> parents;
  // Reads the output's grad and accumulates into parents' grads.
  std::function<void(TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<real> data;
  std::vector<real> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  std::vector<real>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), real{0});
    return grad;
  }
};

/// Whether graph recording is on for the current thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. When recording is on and any parent requires grad,
/// the result carries a node running `backward`; otherwise it is a constant.
Tensor make_result(Shape shape, std::vector<real> data, std::vector<Tensor> parents,
                   std::function<void(TensorImpl& out)> backward);

struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

using ParameterList = std::vector<Parameter>;

}  // namespace qcseis
