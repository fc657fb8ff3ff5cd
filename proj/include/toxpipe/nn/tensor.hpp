// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "toxpipe/error.hpp"

namespace toxpipe::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major n-dimensional array.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_size(shape_) != data_.size()) {
            raise(ErrorCode::ShapeMismatch, "shape " + shape_string(shape_) + " does not hold " +
                                                std::to_string(data_.size()) + " values");
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// NCHW element access for rank-4 tensors.
    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape shape) const& {
        Tensor out = *this;
        out.reshape(std::move(shape));
        return out;
    }
    void reshape(Shape shape) {
        if (shape_size(shape) != data_.size()) {
            raise(ErrorCode::ShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        }
        shape_ = std::move(shape);
    }

    template <typename U>
    Tensor<U> cast() const {
        return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// Reverse-mode autodiff

namespace detail {
bool& grad_mode_flag() noexcept;
}

/// While alive, operations record no graph (inference / feature extraction).
class NoGradGuard {
public:
    NoGradGuard() noexcept : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() noexcept { return detail::grad_mode_flag(); }

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until something flows back
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    /// Reads this->grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    Tensor<T>& grad_buffer() {
        if (grad.empty() && !value.empty()) {
            grad = Tensor<T>(value.shape());
        }
        return grad;
    }
};

/// Handle to a graph node. Copies share the node.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Var leaf(Tensor<T> value, bool requires_grad = false) {
        auto node = std::make_shared<Node<T>>();
        node->value = std::move(value);
        node->requires_grad = requires_grad;
        return Var(std::move(node));
    }

    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& mutable_value() { return node_->value; }
    const Tensor<T>& grad() const { return node_->grad; }
    Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad = Tensor<T>(); }
    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
    const Shape& shape() const { return node_->value.shape(); }
    bool valid() const noexcept { return node_ != nullptr; }
    const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Builds a result node. The backward closure is attached only when grad mode is on and some
/// input requires a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    if (grad_enabled()) {
        bool any = false;
        for (const auto& in : inputs) {
            any = any || in.requires_grad();
        }
        if (any) {
            node->requires_grad = true;
            for (auto& in : inputs) {
                node->parents.push_back(in.node());
            }
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Var<T>(std::move(node));
}

/// Seeds root.grad with `seed` (ones when omitted) and runs the recorded graph in reverse
/// topological order. Throws NoRecordedGraph if nothing upstream requires a gradient.
template <typename T>
void backward(const Var<T>& root, const Tensor<T>* seed = nullptr);

}  // namespace toxpipe::nn
