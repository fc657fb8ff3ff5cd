// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "toxpipe/nn/tensor.hpp"

namespace toxpipe::nn {

/// Zero-padded 2-D convolution. x is (N, C, H, W), weight is (O, C, kh, kw) with odd kh and kw.
/// Output is (N, O, (H + 2p - kh) / s + 1, (W + 2p - kw) / s + 1).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, std::size_t stride, std::size_t padding);

/// Running statistics and constants of a batch-norm layer; gamma and beta live as Vars.
template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;
    T epsilon = T(1e-5);
    T momentum = T(0.1);

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(Shape{channels}, T{0}), running_var(Shape{channels}, T{1}) {}
};

/// Per-channel normalization. Training mode uses biased batch statistics and updates the running
/// estimates (unbiased variance, exponential moving average); inference mode uses the running ones.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state,
                  bool training);

template <typename T>
Var<T> relu(const Var<T>& x);

/// Concatenation along the channel axis of rank-4 tensors with equal N, H, W.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);

/// 2x2 average pooling, stride 2. Requires even H and W.
template <typename T>
Var<T> avg_pool2(const Var<T>& x);

/// Max pooling with zero-free padding (padded cells never win).
template <typename T>
Var<T> max_pool(const Var<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding);

/// (N, C, H, W) -> (N, C) spatial mean.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

/// x (N, D), weight (M, D), bias (M) -> (N, M) = x W^T + b.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

/// Mean binary cross-entropy over entries where mask != 0. Returns a one-element tensor; with an
/// empty mask the loss is 0 and no gradient flows.
template <typename T>
Var<T> masked_bce_with_logits(const Var<T>& logits, const Tensor<T>& targets, const Tensor<T>& mask);

/// Sum of all elements as a one-element tensor.
template <typename T>
Var<T> sum(const Var<T>& x);

/// Σ x[i]·w[i] with a constant w, as a one-element tensor.
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& w);

/// Selects column `index` of an (N, M) tensor -> (N).
template <typename T>
Var<T> select_column(const Var<T>& x, std::size_t index);

}  // namespace toxpipe::nn
