// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/nn/tensor.hpp"

#include <unordered_set>

namespace toxpipe::nn {

std::string shape_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            s += ", ";
        }
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

namespace detail {
bool& grad_mode_flag() noexcept {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

template <typename T>
void backward(const Var<T>& root, const Tensor<T>* seed) {
    if (!root.valid() || !root.requires_grad()) {
        raise(ErrorCode::NoRecordedGraph, "root does not depend on any parameter");
    }
    Node<T>* top = root.node().get();
    if (seed) {
        if (seed->shape() != top->value.shape()) {
            raise(ErrorCode::ShapeMismatch, "seed " + shape_string(seed->shape()) + " vs root " +
                                                shape_string(top->value.shape()));
        }
        Tensor<T>& g = top->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += (*seed)[i];
        }
    } else {
        Tensor<T>& g = top->grad_buffer();
        for (auto& v : g.values()) {
            v += T{1};
        }
    }

    // iterative post-order DFS gives a topological order
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{top, 0}};
    seen.insert(top);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward_fn && !node->grad.empty()) {
            node->backward_fn(*node);
        }
    }
}

template void backward<float>(const Var<float>&, const Tensor<float>*);
template void backward<double>(const Var<double>&, const Tensor<double>*);

}  // namespace toxpipe::nn
