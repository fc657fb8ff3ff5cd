// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "toxpipe/parallel.hpp"

namespace toxpipe::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require_rank4(const Shape& s, const char* what) {
    if (s.size() != 4) {
        raise(ErrorCode::ShapeMismatch, std::string(what) + " expects a rank-4 tensor, got " + shape_string(s));
    }
}

template <typename T>
Tensor<T>& grad_of(Node<T>& self, std::size_t parent) {
    return self.parents[parent]->grad_buffer();
}

template <typename T>
bool wants_grad(const Node<T>& self, std::size_t parent) {
    return parent < self.parents.size() && self.parents[parent]->requires_grad;
}

struct ConvGeometry {
    std::size_t c, h, w, o, kh, kw, stride, pad, oh, ow;
    std::size_t k() const { return c * kh * kw; }
    std::size_t p() const { return oh * ow; }
    bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
    const std::size_t p = g.p();
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                T* row = col + ((c * g.kh + i) * g.kw + j) * p;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
                    T* out = row + oy * g.ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                        std::fill(out, out + g.ow, T{0});
                        continue;
                    }
                    const T* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
                        out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0} : src[ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
    const std::size_t p = g.p();
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const T* row = col + ((c * g.kh + i) * g.kw + j) * p;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                        continue;
                    }
                    T* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) {
                            dst[ix] += row[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, std::size_t stride, std::size_t padding) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    require_rank4(xs, "conv2d input");
    require_rank4(ws, "conv2d kernel");
    if (ws[1] != xs[1]) {
        raise(ErrorCode::ShapeMismatch, "conv2d kernel " + shape_string(ws) + " vs input " + shape_string(xs));
    }
    if (stride == 0 || ws[2] % 2 == 0 || ws[3] % 2 == 0) {
        raise(ErrorCode::ShapeMismatch, "conv2d needs odd kernel sides and a positive stride");
    }
    if (xs[2] + 2 * padding < ws[2] || xs[3] + 2 * padding < ws[3]) {
        raise(ErrorCode::ShapeMismatch, "conv2d kernel larger than padded input");
    }
    ConvGeometry g{xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], stride, padding, 0, 0};
    g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
    g.ow = (g.w + 2 * padding - g.kw) / stride + 1;
    const std::size_t n = xs[0];
    const std::size_t in_stride = g.c * g.h * g.w;
    const std::size_t out_stride = g.o * g.p();

    Tensor<T> out(Shape{n, g.o, g.oh, g.ow});
    {
        const ConstMapMat<T> wm(weight.value().data(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(g.k()));
        parallel_for(n, [&](std::size_t s) {
            MapMat<T> om(out.data() + s * out_stride, static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(g.p()));
            if (g.pointwise()) {
                const ConstMapMat<T> xm(x.value().data() + s * in_stride, static_cast<Eigen::Index>(g.c),
                                        static_cast<Eigen::Index>(g.p()));
                om.noalias() = wm * xm;
            } else {
                std::vector<T> col(g.k() * g.p());
                im2col(x.value().data() + s * in_stride, g, col.data());
                const ConstMapMat<T> cm(col.data(), static_cast<Eigen::Index>(g.k()), static_cast<Eigen::Index>(g.p()));
                om.noalias() = wm * cm;
            }
        });
    }

    return make_result<T>(std::move(out), {x, weight}, [g, n, in_stride, out_stride](Node<T>& self) {
        const Tensor<T>& xv = self.parents[0]->value;
        const Tensor<T>& wv = self.parents[1]->value;
        const bool need_x = wants_grad(self, 0);
        const bool need_w = wants_grad(self, 1);
        const auto O = static_cast<Eigen::Index>(g.o);
        const auto K = static_cast<Eigen::Index>(g.k());
        const auto P = static_cast<Eigen::Index>(g.p());
        const ConstMapMat<T> wm(wv.data(), O, K);
        T* dx = need_x ? grad_of(self, 0).data() : nullptr;
        // per-sample kernel gradients, summed afterwards in sample order
        std::vector<RowMat<T>> dw_parts(need_w ? n : 0);
        parallel_for(n, [&](std::size_t s) {
            const ConstMapMat<T> dout(self.grad.data() + s * out_stride, O, P);
            std::vector<T> col;
            const T* colp = xv.data() + s * in_stride;
            if (!g.pointwise()) {
                col.resize(g.k() * g.p());
                im2col(xv.data() + s * in_stride, g, col.data());
                colp = col.data();
            }
            if (need_w) {
                const ConstMapMat<T> cm(colp, K, P);
                dw_parts[s].noalias() = dout * cm.transpose();
            }
            if (need_x) {
                if (g.pointwise()) {
                    MapMat<T> dxm(dx + s * in_stride, K, P);
                    dxm.noalias() += wm.transpose() * dout;
                } else {
                    RowMat<T> dcol = wm.transpose() * dout;
                    col2im_add(dcol.data(), g, dx + s * in_stride);
                }
            }
        });
        if (need_w) {
            MapMat<T> dw(grad_of(self, 1).data(), O, K);
            for (const auto& part : dw_parts) {
                dw += part;
            }
        }
    });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state,
                  bool training) {
    const Shape& xs = x.shape();
    require_rank4(xs, "batch_norm");
    const std::size_t n = xs[0];
    const std::size_t c = xs[1];
    const std::size_t hw = xs[2] * xs[3];
    if (gamma.value().size() != c || beta.value().size() != c || state.running_mean.size() != c ||
        state.running_var.size() != c) {
        raise(ErrorCode::ShapeMismatch, "batch_norm parameters do not match " + std::to_string(c) + " channels");
    }
    const std::size_t m = n * hw;
    if (training && m < 2) {
        raise(ErrorCode::DegenerateBatch, "training batch norm needs at least 2 values per channel");
    }

    std::vector<T> mean(c);
    std::vector<T> inv_std(c);
    const T* xv = x.value().data();
    if (training) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = xv + (b * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    s += p[i];
                }
            }
            const double mu = s / static_cast<double>(m);
            double ss = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = xv + (b * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double d = p[i] - mu;
                    ss += d * d;
                }
            }
            const double var = ss / static_cast<double>(m);
            mean[ch] = static_cast<T>(mu);
            inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(state.epsilon)));
            const T unbiased = static_cast<T>(var * static_cast<double>(m) / static_cast<double>(m - 1));
            state.running_mean[ch] = (T{1} - state.momentum) * state.running_mean[ch] + state.momentum * mean[ch];
            state.running_var[ch] = (T{1} - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean[ch];
            inv_std[ch] = T{1} / std::sqrt(state.running_var[ch] + state.epsilon);
        }
    }

    Tensor<T> xhat(xs);
    Tensor<T> out(xs);
    const T* gv = gamma.value().data();
    const T* bv = beta.value().data();
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const T h = (xv[off + i] - mean[ch]) * inv_std[ch];
                xhat[off + i] = h;
                out[off + i] = gv[ch] * h + bv[ch];
            }
        }
    }

    return make_result<T>(
        std::move(out), {x, gamma, beta},
        [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, hw, m, training](Node<T>& self) {
            const T* dy = self.grad.data();
            std::vector<T> dgamma(c, T{0});
            std::vector<T> dbeta(c, T{0});
            for (std::size_t ch = 0; ch < c; ++ch) {
                T sg = 0;
                T sb = 0;
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t off = (b * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        sg += dy[off + i] * xhat[off + i];
                        sb += dy[off + i];
                    }
                }
                dgamma[ch] = sg;
                dbeta[ch] = sb;
            }
            if (wants_grad(self, 0)) {
                const T* gv = self.parents[1]->value.data();
                T* dx = grad_of(self, 0).data();
                const T inv_m = T{1} / static_cast<T>(m);
                for (std::size_t b = 0; b < n; ++b) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const std::size_t off = (b * c + ch) * hw;
                        const T k = gv[ch] * inv_std[ch];
                        for (std::size_t i = 0; i < hw; ++i) {
                            if (training) {
                                dx[off + i] +=
                                    k * (dy[off + i] - inv_m * dbeta[ch] - xhat[off + i] * inv_m * dgamma[ch]);
                            } else {
                                dx[off + i] += k * dy[off + i];
                            }
                        }
                    }
                }
            }
            if (wants_grad(self, 1)) {
                T* dg = grad_of(self, 1).data();
                for (std::size_t ch = 0; ch < c; ++ch) {
                    dg[ch] += dgamma[ch];
                }
            }
            if (wants_grad(self, 2)) {
                T* db = grad_of(self, 2).data();
                for (std::size_t ch = 0; ch < c; ++ch) {
                    db[ch] += dbeta[ch];
                }
            }
        });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out(x.shape());
    const T* xv = x.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = xv[i] > T{0} ? xv[i] : T{0};
    }
    return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
        const Tensor<T>& xv = self.parents[0]->value;
        Tensor<T>& dx = grad_of(self, 0);
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (xv[i] > T{0}) {
                dx[i] += self.grad[i];
            }
        }
    });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
    if (parts.empty()) {
        raise(ErrorCode::ShapeMismatch, "concat of nothing");
    }
    const Shape& first = parts.front().shape();
    require_rank4(first, "concat_channels");
    std::size_t total = 0;
    std::vector<std::size_t> channels;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        require_rank4(s, "concat_channels");
        if (s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
            raise(ErrorCode::ShapeMismatch, "concat " + shape_string(s) + " with " + shape_string(first));
        }
        channels.push_back(s[1]);
        total += s[1];
    }
    if (parts.size() == 1) {
        return parts.front();
    }
    const std::size_t n = first[0];
    const std::size_t hw = first[2] * first[3];
    Tensor<T> out(Shape{n, total, first[2], first[3]});
    for (std::size_t b = 0; b < n; ++b) {
        T* dst = out.data() + b * total * hw;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const T* src = parts[k].value().data() + b * channels[k] * hw;
            dst = std::copy(src, src + channels[k] * hw, dst);
        }
    }
    return make_result<T>(std::move(out), parts, [channels, n, hw, total](Node<T>& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < channels.size(); ++k) {
            if (wants_grad(self, k)) {
                T* dx = grad_of(self, k).data();
                for (std::size_t b = 0; b < n; ++b) {
                    const T* src = self.grad.data() + (b * total + offset) * hw;
                    T* dst = dx + b * channels[k] * hw;
                    for (std::size_t i = 0; i < channels[k] * hw; ++i) {
                        dst[i] += src[i];
                    }
                }
            }
            offset += channels[k];
        }
    });
}

template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
    const Shape& xs = x.shape();
    require_rank4(xs, "avg_pool2");
    if (xs[2] % 2 != 0 || xs[3] % 2 != 0) {
        raise(ErrorCode::OddSpatialDim, "average pooling needs even sides, got " + shape_string(xs));
    }
    const std::size_t planes = xs[0] * xs[1];
    const std::size_t h = xs[2];
    const std::size_t w = xs[3];
    Tensor<T> out(Shape{xs[0], xs[1], h / 2, w / 2});
    const T* xv = x.value().data();
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = xv + p * h * w;
        T* dst = out.data() + p * (h / 2) * (w / 2);
        for (std::size_t y = 0; y < h / 2; ++y) {
            for (std::size_t xx = 0; xx < w / 2; ++xx) {
                const T* q = src + 2 * y * w + 2 * xx;
                dst[y * (w / 2) + xx] = (q[0] + q[1] + q[w] + q[w + 1]) * T(0.25);
            }
        }
    }
    return make_result<T>(std::move(out), {x}, [planes, h, w](Node<T>& self) {
        T* dx = grad_of(self, 0).data();
        for (std::size_t p = 0; p < planes; ++p) {
            const T* g = self.grad.data() + p * (h / 2) * (w / 2);
            T* dst = dx + p * h * w;
            for (std::size_t y = 0; y < h / 2; ++y) {
                for (std::size_t xx = 0; xx < w / 2; ++xx) {
                    const T v = g[y * (w / 2) + xx] * T(0.25);
                    T* q = dst + 2 * y * w + 2 * xx;
                    q[0] += v;
                    q[1] += v;
                    q[w] += v;
                    q[w + 1] += v;
                }
            }
        }
    });
}

template <typename T>
Var<T> max_pool(const Var<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding) {
    const Shape& xs = x.shape();
    require_rank4(xs, "max_pool");
    if (kernel == 0 || stride == 0 || padding >= kernel || xs[2] + 2 * padding < kernel ||
        xs[3] + 2 * padding < kernel) {
        raise(ErrorCode::ShapeMismatch, "max_pool geometry invalid for " + shape_string(xs));
    }
    const std::size_t planes = xs[0] * xs[1];
    const std::size_t h = xs[2];
    const std::size_t w = xs[3];
    const std::size_t oh = (h + 2 * padding - kernel) / stride + 1;
    const std::size_t ow = (w + 2 * padding - kernel) / stride + 1;
    Tensor<T> out(Shape{xs[0], xs[1], oh, ow});
    std::vector<std::size_t> argmax(out.size());
    const T* xv = x.value().data();
    for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                T best = -std::numeric_limits<T>::infinity();
                std::size_t best_at = 0;
                for (std::size_t i = 0; i < kernel; ++i) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * stride + i) - static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        continue;
                    }
                    for (std::size_t j = 0; j < kernel; ++j) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * stride + j) - static_cast<std::ptrdiff_t>(padding);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) {
                            continue;
                        }
                        const std::size_t at = p * h * w + static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
                        if (xv[at] > best) {
                            best = xv[at];
                            best_at = at;
                        }
                    }
                }
                const std::size_t o = (p * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_at;
            }
        }
    }
    return make_result<T>(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
        T* dx = grad_of(self, 0).data();
        for (std::size_t o = 0; o < argmax.size(); ++o) {
            dx[argmax[o]] += self.grad[o];
        }
    });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    const Shape& xs = x.shape();
    require_rank4(xs, "global_avg_pool");
    const std::size_t planes = xs[0] * xs[1];
    const std::size_t hw = xs[2] * xs[3];
    Tensor<T> out(Shape{xs[0], xs[1]});
    const T* xv = x.value().data();
    for (std::size_t p = 0; p < planes; ++p) {
        T s = 0;
        for (std::size_t i = 0; i < hw; ++i) {
            s += xv[p * hw + i];
        }
        out[p] = s / static_cast<T>(hw);
    }
    return make_result<T>(std::move(out), {x}, [planes, hw](Node<T>& self) {
        T* dx = grad_of(self, 0).data();
        for (std::size_t p = 0; p < planes; ++p) {
            const T v = self.grad[p] / static_cast<T>(hw);
            for (std::size_t i = 0; i < hw; ++i) {
                dx[p * hw + i] += v;
            }
        }
    });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (xs.size() != 2 || ws.size() != 2 || ws[1] != xs[1] || bias.value().size() != ws[0]) {
        raise(ErrorCode::ShapeMismatch,
              "linear " + shape_string(xs) + " x " + shape_string(ws) + " + " + shape_string(bias.shape()));
    }
    const auto n = static_cast<Eigen::Index>(xs[0]);
    const auto d = static_cast<Eigen::Index>(xs[1]);
    const auto m = static_cast<Eigen::Index>(ws[0]);
    Tensor<T> out(Shape{xs[0], ws[0]});
    {
        const ConstMapMat<T> xm(x.value().data(), n, d);
        const ConstMapMat<T> wm(weight.value().data(), m, d);
        MapMat<T> om(out.data(), n, m);
        om.noalias() = xm * wm.transpose();
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index k = 0; k < m; ++k) {
                om(r, k) += bias.value()[static_cast<std::size_t>(k)];
            }
        }
    }
    return make_result<T>(std::move(out), {x, weight, bias}, [n, d, m](Node<T>& self) {
        const ConstMapMat<T> dy(self.grad.data(), n, m);
        if (wants_grad(self, 0)) {
            const ConstMapMat<T> wm(self.parents[1]->value.data(), m, d);
            MapMat<T> dx(grad_of(self, 0).data(), n, d);
            dx.noalias() += dy * wm;
        }
        if (wants_grad(self, 1)) {
            const ConstMapMat<T> xm(self.parents[0]->value.data(), n, d);
            MapMat<T> dw(grad_of(self, 1).data(), m, d);
            dw.noalias() += dy.transpose() * xm;
        }
        if (wants_grad(self, 2)) {
            T* db = grad_of(self, 2).data();
            for (Eigen::Index r = 0; r < n; ++r) {
                for (Eigen::Index k = 0; k < m; ++k) {
                    db[k] += dy(r, k);
                }
            }
        }
    });
}

template <typename T>
Var<T> masked_bce_with_logits(const Var<T>& logits, const Tensor<T>& targets, const Tensor<T>& mask) {
    const Tensor<T>& z = logits.value();
    if (targets.shape() != z.shape() || mask.shape() != z.shape()) {
        raise(ErrorCode::ShapeMismatch, "targets/mask must match logits " + shape_string(z.shape()));
    }
    std::size_t count = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (mask[i] != T{0}) {
            const double zi = z[i];
            total += std::max(zi, 0.0) - zi * static_cast<double>(targets[i]) + std::log1p(std::exp(-std::abs(zi)));
            ++count;
        }
    }
    Tensor<T> out(Shape{1}, T(count ? total / static_cast<double>(count) : 0.0));
    if (count == 0) {
        return Var<T>::leaf(std::move(out));
    }
    return make_result<T>(std::move(out), {logits}, [targets, mask, count](Node<T>& self) {
        const Tensor<T>& zv = self.parents[0]->value;
        Tensor<T>& dz = grad_of(self, 0);
        const T scale = self.grad[0] / static_cast<T>(count);
        for (std::size_t i = 0; i < zv.size(); ++i) {
            if (mask[i] != T{0}) {
                const T sig = T{1} / (T{1} + std::exp(-zv[i]));
                dz[i] += scale * (sig - targets[i]);
            }
        }
    });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
    T s = 0;
    for (T v : x.value().values()) {
        s += v;
    }
    return make_result<T>(Tensor<T>(Shape{1}, s), {x}, [](Node<T>& self) {
        Tensor<T>& dx = grad_of(self, 0);
        for (auto& v : dx.values()) {
            v += self.grad[0];
        }
    });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& w) {
    if (w.size() != x.value().size()) {
        raise(ErrorCode::ShapeMismatch, "weighted_sum weights do not match " + shape_string(x.shape()));
    }
    T s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        s += x.value()[i] * w[i];
    }
    return make_result<T>(Tensor<T>(Shape{1}, s), {x}, [w](Node<T>& self) {
        Tensor<T>& dx = grad_of(self, 0);
        for (std::size_t i = 0; i < w.size(); ++i) {
            dx[i] += self.grad[0] * w[i];
        }
    });
}

template <typename T>
Var<T> select_column(const Var<T>& x, std::size_t index) {
    const Shape& xs = x.shape();
    if (xs.size() != 2 || index >= xs[1]) {
        raise(ErrorCode::ShapeMismatch, "select_column " + std::to_string(index) + " of " + shape_string(xs));
    }
    const std::size_t n = xs[0];
    const std::size_t m = xs[1];
    Tensor<T> out(Shape{n});
    for (std::size_t r = 0; r < n; ++r) {
        out[r] = x.value()[r * m + index];
    }
    return make_result<T>(std::move(out), {x}, [n, m, index](Node<T>& self) {
        Tensor<T>& dx = grad_of(self, 0);
        for (std::size_t r = 0; r < n; ++r) {
            dx[r * m + index] += self.grad[r];
        }
    });
}

#define TOXPIPE_INSTANTIATE_OPS(T)                                                                            \
    template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, std::size_t, std::size_t);                        \
    template Var<T> batch_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormState<T>&, bool);     \
    template Var<T> relu<T>(const Var<T>&);                                                                   \
    template Var<T> concat_channels<T>(const std::vector<Var<T>>&);                                           \
    template Var<T> avg_pool2<T>(const Var<T>&);                                                              \
    template Var<T> max_pool<T>(const Var<T>&, std::size_t, std::size_t, std::size_t);                        \
    template Var<T> global_avg_pool<T>(const Var<T>&);                                                        \
    template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                                   \
    template Var<T> masked_bce_with_logits<T>(const Var<T>&, const Tensor<T>&, const Tensor<T>&);             \
    template Var<T> sum<T>(const Var<T>&);                                                                    \
    template Var<T> weighted_sum<T>(const Var<T>&, const Tensor<T>&);                                         \
    template Var<T> select_column<T>(const Var<T>&, std::size_t);

TOXPIPE_INSTANTIATE_OPS(float)
TOXPIPE_INSTANTIATE_OPS(double)

#undef TOXPIPE_INSTANTIATE_OPS

}  // namespace toxpipe::nn
