#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "cnet/detail/matmul.hpp"
#include "cnet/error.hpp"
#include "cnet/rng.hpp"
#include "cnet/tensor.hpp"

namespace cnet {

/// Convolution geometry. Stride 0 is rejected here: the only consistent
/// reading of a zero stride in a layer table is stride 1, and that rewrite
/// happens where the table is transcribed, not in the kernel.
struct ConvParams {
    std::int64_t kernel = 1;
    std::int64_t stride = 1;
    std::int64_t padding = 0;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;

    void validate() const {
        if (kernel < 1) {
            throw ConfigError("conv: kernel must be positive, got " + std::to_string(kernel));
        }
        if (stride < 1) {
            throw ConfigError("conv: stride must be >= 1, got " + std::to_string(stride));
        }
        if (padding < 0) {
            throw ConfigError("conv: padding must be >= 0, got " + std::to_string(padding));
        }
        if (in_channels < 1 || out_channels < 1) {
            throw ConfigError("conv: channel counts must be positive");
        }
    }

    std::int64_t out_size(std::int64_t in) const {
        return (in + 2 * padding - kernel) / stride + 1;
    }
};

namespace detail {

/// Scatters/gathers between an image plane [c, h, w] and the im2col matrix
/// [c*K*K, oh*ow] for one sample. Gather fills `col`; scatter adds `col`
/// back into `img`.
template <class T, bool kScatter>
void im2col_pass(T* img, T* col, std::int64_t c_in, std::int64_t h, std::int64_t w,
                 const ConvParams& p, std::int64_t oh, std::int64_t ow) {
    const std::int64_t k = p.kernel;
    const std::int64_t s = p.stride;
    const std::int64_t pad = p.padding;
    for (std::int64_t c = 0; c < c_in; ++c) {
        for (std::int64_t ki = 0; ki < k; ++ki) {
            for (std::int64_t kj = 0; kj < k; ++kj) {
                T* crow = col + ((c * k + ki) * k + kj) * (oh * ow);
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                    const std::int64_t iy = oy * s - pad + ki;
                    T* cseg = crow + oy * ow;
                    if (iy < 0 || iy >= h) {
                        if constexpr (!kScatter) {
                            std::fill(cseg, cseg + ow, T(0));
                        }
                        continue;
                    }
                    T* irow = img + (c * h + iy) * w;
                    if (s == 1) {
                        // Valid ox range where ix = ox - pad + kj is inside.
                        const std::int64_t ox0 = std::max<std::int64_t>(0, pad - kj);
                        const std::int64_t ox1 = std::min<std::int64_t>(ow, w + pad - kj);
                        if constexpr (kScatter) {
                            for (std::int64_t ox = ox0; ox < ox1; ++ox) {
                                irow[ox - pad + kj] += cseg[ox];
                            }
                        } else {
                            std::fill(cseg, cseg + std::min<std::int64_t>(ox0, ow), T(0));
                            if (ox1 > ox0) {
                                std::memcpy(cseg + ox0, irow + ox0 - pad + kj,
                                            static_cast<std::size_t>(ox1 - ox0) * sizeof(T));
                            }
                            if (ox1 < ow) {
                                std::fill(cseg + std::max<std::int64_t>(ox1, 0), cseg + ow, T(0));
                            }
                        }
                    } else {
                        for (std::int64_t ox = 0; ox < ow; ++ox) {
                            const std::int64_t ix = ox * s - pad + kj;
                            if (ix < 0 || ix >= w) {
                                if constexpr (!kScatter) {
                                    cseg[ox] = T(0);
                                }
                                continue;
                            }
                            if constexpr (kScatter) {
                                irow[ix] += cseg[ox];
                            } else {
                                cseg[ox] = irow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void im2col(const T* img, T* col, std::int64_t c_in, std::int64_t h, std::int64_t w,
            const ConvParams& p, std::int64_t oh, std::int64_t ow) {
    im2col_pass<T, false>(const_cast<T*>(img), col, c_in, h, w, p, oh, ow);
}

template <class T>
void col2im_add(const T* col, T* img, std::int64_t c_in, std::int64_t h, std::int64_t w,
                const ConvParams& p, std::int64_t oh, std::int64_t ow) {
    im2col_pass<T, true>(img, const_cast<T*>(col), c_in, h, w, p, oh, ow);
}

}  // namespace detail

/// 2-D cross-correlation of a zero-padded NCHW input with an OIKK kernel.
template <class T>
TensorPtr<T> conv2d(const TensorPtr<T>& input, const ConvParams& params,
                    const TensorPtr<T>& weight, const TensorPtr<T>& bias) {
    params.validate();
    if (input->rank() != 4) {
        throw ShapeError("conv2d: input must be 4-d [n,c,h,w], got " + shape_str(input->shape()));
    }
    const std::int64_t n = input->dim(0);
    const std::int64_t c_in = input->dim(1);
    const std::int64_t h = input->dim(2);
    const std::int64_t w = input->dim(3);
    if (c_in != params.in_channels) {
        throw ShapeError("conv2d: input has " + std::to_string(c_in) +
                         " channels (dim 1) but params.in_channels is " +
                         std::to_string(params.in_channels));
    }
    const Shape want_w{params.out_channels, params.in_channels, params.kernel, params.kernel};
    if (weight->shape() != want_w) {
        throw ShapeError("conv2d: weight shape " + shape_str(weight->shape()) + " != expected " +
                         shape_str(want_w));
    }
    if (bias->shape() != Shape{params.out_channels}) {
        throw ShapeError("conv2d: bias shape " + shape_str(bias->shape()) + " != expected [" +
                         std::to_string(params.out_channels) + "]");
    }
    if (h + 2 * params.padding < params.kernel || w + 2 * params.padding < params.kernel) {
        throw ShapeError("conv2d: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                         " with padding " + std::to_string(params.padding) +
                         " is smaller than kernel " + std::to_string(params.kernel));
    }
    const std::int64_t oh = params.out_size(h);
    const std::int64_t ow = params.out_size(w);
    const std::int64_t c_out = params.out_channels;
    const std::int64_t hw = oh * ow;
    const std::int64_t krows = c_in * params.kernel * params.kernel;
    const bool pointwise =
        params.kernel == 1 && params.stride == 1 && params.padding == 0;

    auto out = Tensor<T>::create({n, c_out, oh, ow});
    {
        std::vector<T> col;
        if (!pointwise) {
            col.resize(static_cast<std::size_t>(krows * hw));
        }
        const T* in_ptr = input->data();
        const T* w_ptr = weight->data();
        const T* b_ptr = bias->data();
        T* out_ptr = out->data();
        for (std::int64_t s = 0; s < n; ++s) {
            const T* img = in_ptr + s * c_in * h * w;
            const T* cmat = img;
            if (!pointwise) {
                detail::im2col(img, col.data(), c_in, h, w, params, oh, ow);
                cmat = col.data();
            }
            T* oimg = out_ptr + s * c_out * hw;
            for (std::int64_t o = 0; o < c_out; ++o) {
                std::fill(oimg + o * hw, oimg + (o + 1) * hw, b_ptr[o]);
            }
            detail::matmul_acc(w_ptr, cmat, oimg, c_out, krows, hw);
        }
    }
    check_finite(*out, "conv2d");

    if (any_requires_grad<T>({&input, &weight, &bias})) {
        out->set_autograd(
            {input, weight, bias},
            [input, weight, bias, params, n, c_in, h, w, oh, ow, c_out, hw, krows,
             pointwise](const Tensor<T>& out_node) {
                std::span<const T> dout = out_node.grad();
                const bool need_dw = weight->requires_grad();
                const bool need_dx = input->requires_grad();
                const bool need_db = bias->requires_grad();
                std::vector<T> col;
                std::vector<T> doutT(static_cast<std::size_t>(hw * c_out));
                std::vector<T> dwT;
                std::vector<T> dcol;
                if (!pointwise && (need_dw || need_dx)) {
                    col.resize(static_cast<std::size_t>(krows * hw));
                }
                if (need_dw) {
                    dwT.assign(static_cast<std::size_t>(krows * c_out), T(0));
                }
                if (need_dx && !pointwise) {
                    dcol.resize(static_cast<std::size_t>(krows * hw));
                }
                for (std::int64_t s = 0; s < n; ++s) {
                    const T* img = input->data() + s * c_in * h * w;
                    const T* dout_s = dout.data() + s * c_out * hw;
                    if (need_db) {
                        T* db = bias->grad_data();
                        for (std::int64_t o = 0; o < c_out; ++o) {
                            T acc = T(0);
                            for (std::int64_t x = 0; x < hw; ++x) {
                                acc += dout_s[o * hw + x];
                            }
                            db[o] += acc;
                        }
                    }
                    if (need_dw) {
                        const T* cmat = img;
                        if (!pointwise) {
                            detail::im2col(img, col.data(), c_in, h, w, params, oh, ow);
                            cmat = col.data();
                        }
                        detail::transpose(dout_s, doutT.data(), c_out, hw);
                        detail::matmul_acc(cmat, doutT.data(), dwT.data(), krows, hw, c_out);
                    }
                    if (need_dx) {
                        T* dimg = input->grad_data() + s * c_in * h * w;
                        if (pointwise) {
                            detail::matmul_atb_acc(weight->data(), dout_s, dimg, c_out, krows, hw);
                        } else {
                            std::fill(dcol.begin(), dcol.end(), T(0));
                            detail::matmul_atb_acc(weight->data(), dout_s, dcol.data(), c_out,
                                                   krows, hw);
                            detail::col2im_add(dcol.data(), dimg, c_in, h, w, params, oh, ow);
                        }
                    }
                }
                if (need_dw) {
                    T* dw = weight->grad_data();
                    for (std::int64_t r = 0; r < krows; ++r) {
                        for (std::int64_t o = 0; o < c_out; ++o) {
                            dw[o * krows + r] += dwT[r * c_out + o];
                        }
                    }
                }
            });
    }
    return out;
}

template <class T>
struct BatchNormState {
    std::vector<T> running_mean;
    std::vector<T> running_var;

    explicit BatchNormState(std::int64_t channels = 0)
        : running_mean(static_cast<std::size_t>(channels), T(0)),
          running_var(static_cast<std::size_t>(channels), T(1)) {}
};

/// Per-channel batch normalization over (n, h, w). Train mode normalizes by
/// the biased batch statistics and folds them into the running state with the
/// given momentum; eval mode normalizes by the running state. The running
/// update uses the same biased variance the normalization uses, so running
/// statistics converge exactly to the batch statistics on a repeated batch.
template <class T>
TensorPtr<T> batchnorm2d(const TensorPtr<T>& input, const TensorPtr<T>& gamma,
                         const TensorPtr<T>& beta, BatchNormState<T>& state, Mode mode,
                         T eps = static_cast<T>(1e-5), T momentum = static_cast<T>(0.1)) {
    if (input->rank() != 4) {
        throw ShapeError("batchnorm2d: input must be 4-d [n,c,h,w], got " +
                         shape_str(input->shape()));
    }
    const std::int64_t n = input->dim(0);
    const std::int64_t c = input->dim(1);
    const std::int64_t hw = input->dim(2) * input->dim(3);
    if (gamma->shape() != Shape{c} || beta->shape() != Shape{c}) {
        throw ShapeError("batchnorm2d: gamma/beta must have shape [" + std::to_string(c) + "]");
    }
    if (state.running_mean.size() != static_cast<std::size_t>(c)) {
        throw ShapeError("batchnorm2d: running state has " +
                         std::to_string(state.running_mean.size()) + " channels, input has " +
                         std::to_string(c));
    }
    const std::int64_t m = n * hw;
    if (mode == Mode::kTrain && m < 2) {
        throw ShapeError("batchnorm2d: train mode needs at least 2 values per channel, got " +
                         std::to_string(m));
    }

    std::vector<T> mean(static_cast<std::size_t>(c), T(0));
    std::vector<T> inv_std(static_cast<std::size_t>(c), T(0));
    const T* x = input->data();
    if (mode == Mode::kTrain) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            T acc = T(0);
            for (std::int64_t s = 0; s < n; ++s) {
                const T* seg = x + (s * c + ch) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    acc += seg[i];
                }
            }
            const T mu = acc / static_cast<T>(m);
            T var_acc = T(0);
            for (std::int64_t s = 0; s < n; ++s) {
                const T* seg = x + (s * c + ch) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    const T d = seg[i] - mu;
                    var_acc += d * d;
                }
            }
            const T var = var_acc / static_cast<T>(m);
            mean[ch] = mu;
            inv_std[ch] = T(1) / std::sqrt(var + eps);
            state.running_mean[ch] = (T(1) - momentum) * state.running_mean[ch] + momentum * mu;
            state.running_var[ch] = (T(1) - momentum) * state.running_var[ch] + momentum * var;
        }
    } else {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean[ch];
            inv_std[ch] = T(1) / std::sqrt(state.running_var[ch] + eps);
        }
    }

    auto out = Tensor<T>::create(input->shape());
    {
        T* y = out->data();
        const T* g = gamma->data();
        const T* b = beta->data();
        for (std::int64_t s = 0; s < n; ++s) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T* seg = x + (s * c + ch) * hw;
                T* oseg = y + (s * c + ch) * hw;
                const T mu = mean[ch];
                const T is = inv_std[ch];
                const T gc = g[ch];
                const T bc = b[ch];
                for (std::int64_t i = 0; i < hw; ++i) {
                    oseg[i] = gc * ((seg[i] - mu) * is) + bc;
                }
            }
        }
    }
    check_finite(*out, "batchnorm2d");

    if (any_requires_grad<T>({&input, &gamma, &beta})) {
        out->set_autograd(
            {input, gamma, beta},
            [input, gamma, beta, mode, mean = std::move(mean), inv_std = std::move(inv_std), n, c,
             hw](const Tensor<T>& out_node) {
                std::span<const T> dy = out_node.grad();
                const std::int64_t m = n * hw;
                const T* x = input->data();
                const T* g = gamma->data();
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const T mu = mean[ch];
                    const T is = inv_std[ch];
                    T s1 = T(0);
                    T s2 = T(0);
                    for (std::int64_t s = 0; s < n; ++s) {
                        const std::int64_t base = (s * c + ch) * hw;
                        for (std::int64_t i = 0; i < hw; ++i) {
                            const T d = dy[base + i];
                            s1 += d;
                            s2 += d * (x[base + i] - mu) * is;
                        }
                    }
                    if (gamma->requires_grad()) {
                        gamma->grad_data()[ch] += s2;
                    }
                    if (beta->requires_grad()) {
                        beta->grad_data()[ch] += s1;
                    }
                    if (input->requires_grad()) {
                        T* dx = input->grad_data();
                        const T gc_is = g[ch] * is;
                        if (mode == Mode::kTrain) {
                            const T mean_dy = s1 / static_cast<T>(m);
                            const T mean_dyx = s2 / static_cast<T>(m);
                            for (std::int64_t s = 0; s < n; ++s) {
                                const std::int64_t base = (s * c + ch) * hw;
                                for (std::int64_t i = 0; i < hw; ++i) {
                                    const T xh = (x[base + i] - mu) * is;
                                    dx[base + i] += gc_is * (dy[base + i] - mean_dy - xh * mean_dyx);
                                }
                            }
                        } else {
                            for (std::int64_t s = 0; s < n; ++s) {
                                const std::int64_t base = (s * c + ch) * hw;
                                for (std::int64_t i = 0; i < hw; ++i) {
                                    dx[base + i] += gc_is * dy[base + i];
                                }
                            }
                        }
                    }
                }
            });
    }
    return out;
}

template <class T>
TensorPtr<T> relu(const TensorPtr<T>& input) {
    auto out = Tensor<T>::create(input->shape());
    const T* x = input->data();
    T* y = out->data();
    const std::int64_t count = input->numel();
    for (std::int64_t i = 0; i < count; ++i) {
        y[i] = x[i] > T(0) ? x[i] : T(0);
    }
    if (input->requires_grad()) {
        out->set_autograd({input}, [input, count](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            const T* x = input->data();
            T* dx = input->grad_data();
            for (std::int64_t i = 0; i < count; ++i) {
                if (x[i] > T(0)) {
                    dx[i] += dy[i];
                }
            }
        });
    }
    return out;
}

/// y = x W^T + b with x [n, d_in], W [d_out, d_in], b [d_out].
template <class T>
TensorPtr<T> linear(const TensorPtr<T>& input, const TensorPtr<T>& weight,
                    const TensorPtr<T>& bias) {
    if (input->rank() != 2) {
        throw ShapeError("linear: input must be 2-d [n,d_in], got " + shape_str(input->shape()));
    }
    if (weight->rank() != 2) {
        throw ShapeError("linear: weight must be 2-d [d_out,d_in], got " +
                         shape_str(weight->shape()));
    }
    const std::int64_t n = input->dim(0);
    const std::int64_t d_in = input->dim(1);
    const std::int64_t d_out = weight->dim(0);
    if (weight->dim(1) != d_in) {
        throw ShapeError("linear: input feature dim " + std::to_string(d_in) +
                         " != weight d_in " + std::to_string(weight->dim(1)));
    }
    if (bias->shape() != Shape{d_out}) {
        throw ShapeError("linear: bias shape " + shape_str(bias->shape()) + " != expected [" +
                         std::to_string(d_out) + "]");
    }

    auto out = Tensor<T>::create({n, d_out});
    {
        std::vector<T> wT(static_cast<std::size_t>(d_in * d_out));
        detail::transpose(weight->data(), wT.data(), d_out, d_in);
        T* y = out->data();
        const T* b = bias->data();
        for (std::int64_t i = 0; i < n; ++i) {
            std::memcpy(y + i * d_out, b, static_cast<std::size_t>(d_out) * sizeof(T));
        }
        detail::matmul_acc(input->data(), wT.data(), y, n, d_in, d_out);
    }
    check_finite(*out, "linear");

    if (any_requires_grad<T>({&input, &weight, &bias})) {
        out->set_autograd({input, weight, bias},
                          [input, weight, bias, n, d_in, d_out](const Tensor<T>& out_node) {
                              std::span<const T> dy = out_node.grad();
                              if (input->requires_grad()) {
                                  detail::matmul_acc(dy.data(), weight->data(), input->grad_data(),
                                                     n, d_out, d_in);
                              }
                              if (weight->requires_grad()) {
                                  detail::matmul_atb_acc(dy.data(), input->data(),
                                                         weight->grad_data(), n, d_out, d_in);
                              }
                              if (bias->requires_grad()) {
                                  T* db = bias->grad_data();
                                  for (std::int64_t i = 0; i < n; ++i) {
                                      for (std::int64_t o = 0; o < d_out; ++o) {
                                          db[o] += dy[i * d_out + o];
                                      }
                                  }
                              }
                          });
    }
    return out;
}

/// Averages input cell ranges [floor(i*h/h_o), ceil((i+1)*h/h_o)) per output
/// cell, the usual adaptive binning.
template <class T>
TensorPtr<T> adaptive_avg_pool2d(const TensorPtr<T>& input, std::int64_t out_h,
                                 std::int64_t out_w) {
    if (input->rank() != 4) {
        throw ShapeError("adaptive_avg_pool2d: input must be 4-d, got " +
                         shape_str(input->shape()));
    }
    const std::int64_t n = input->dim(0);
    const std::int64_t c = input->dim(1);
    const std::int64_t h = input->dim(2);
    const std::int64_t w = input->dim(3);
    if (out_h < 1 || out_w < 1 || out_h > h || out_w > w) {
        throw ShapeError("adaptive_avg_pool2d: output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " not within input " + std::to_string(h) + "x" +
                         std::to_string(w));
    }

    auto out = Tensor<T>::create({n, c, out_h, out_w});
    const T* x = input->data();
    T* y = out->data();
    for (std::int64_t s = 0; s < n; ++s) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T* plane = x + (s * c + ch) * h * w;
            T* oplane = y + (s * c + ch) * out_h * out_w;
            for (std::int64_t i = 0; i < out_h; ++i) {
                const std::int64_t r0 = (i * h) / out_h;
                const std::int64_t r1 = ((i + 1) * h + out_h - 1) / out_h;
                for (std::int64_t j = 0; j < out_w; ++j) {
                    const std::int64_t c0 = (j * w) / out_w;
                    const std::int64_t c1 = ((j + 1) * w + out_w - 1) / out_w;
                    T acc = T(0);
                    for (std::int64_t r = r0; r < r1; ++r) {
                        for (std::int64_t cc = c0; cc < c1; ++cc) {
                            acc += plane[r * w + cc];
                        }
                    }
                    oplane[i * out_w + j] = acc / static_cast<T>((r1 - r0) * (c1 - c0));
                }
            }
        }
    }

    if (input->requires_grad()) {
        out->set_autograd({input}, [input, n, c, h, w, out_h, out_w](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            T* dx = input->grad_data();
            for (std::int64_t s = 0; s < n; ++s) {
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    T* dplane = dx + (s * c + ch) * h * w;
                    const T* doplane = dy.data() + (s * c + ch) * out_h * out_w;
                    for (std::int64_t i = 0; i < out_h; ++i) {
                        const std::int64_t r0 = (i * h) / out_h;
                        const std::int64_t r1 = ((i + 1) * h + out_h - 1) / out_h;
                        for (std::int64_t j = 0; j < out_w; ++j) {
                            const std::int64_t c0 = (j * w) / out_w;
                            const std::int64_t c1 = ((j + 1) * w + out_w - 1) / out_w;
                            const T g = doplane[i * out_w + j] /
                                        static_cast<T>((r1 - r0) * (c1 - c0));
                            for (std::int64_t r = r0; r < r1; ++r) {
                                for (std::int64_t cc = c0; cc < c1; ++cc) {
                                    dplane[r * w + cc] += g;
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

namespace detail {

/// Corner-aligned source coordinates and lerp weights for one output axis.
template <class T>
struct LerpAxis {
    std::vector<std::int64_t> lo, hi;
    std::vector<T> frac;
};

template <class T>
LerpAxis<T> lerp_axis(std::int64_t in, std::int64_t out) {
    LerpAxis<T> ax;
    ax.lo.resize(static_cast<std::size_t>(out));
    ax.hi.resize(static_cast<std::size_t>(out));
    ax.frac.resize(static_cast<std::size_t>(out));
    for (std::int64_t i = 0; i < out; ++i) {
        double src = 0.0;
        if (out > 1) {
            src = static_cast<double>(i) * static_cast<double>(in - 1) /
                  static_cast<double>(out - 1);
        }
        const std::int64_t lo = static_cast<std::int64_t>(src);
        ax.lo[static_cast<std::size_t>(i)] = lo;
        ax.hi[static_cast<std::size_t>(i)] = std::min(lo + 1, in - 1);
        ax.frac[static_cast<std::size_t>(i)] = static_cast<T>(src - static_cast<double>(lo));
    }
    return ax;
}

}  // namespace detail

/// Corner-aligned bilinear upsampling. Constant inputs stay exactly constant
/// and a 1x1 input broadcasts its single value.
template <class T>
TensorPtr<T> bilinear_upsample(const TensorPtr<T>& input, std::int64_t out_h, std::int64_t out_w) {
    if (input->rank() != 4) {
        throw ShapeError("bilinear_upsample: input must be 4-d, got " + shape_str(input->shape()));
    }
    const std::int64_t n = input->dim(0);
    const std::int64_t c = input->dim(1);
    const std::int64_t h = input->dim(2);
    const std::int64_t w = input->dim(3);
    if (out_h < h || out_w < w) {
        throw ShapeError("bilinear_upsample: output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " would downscale input " + std::to_string(h) +
                         "x" + std::to_string(w));
    }

    const auto ay = detail::lerp_axis<T>(h, out_h);
    const auto ax = detail::lerp_axis<T>(w, out_w);
    auto out = Tensor<T>::create({n, c, out_h, out_w});
    const T* xp = input->data();
    T* y = out->data();
    for (std::int64_t s = 0; s < n; ++s) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T* plane = xp + (s * c + ch) * h * w;
            T* oplane = y + (s * c + ch) * out_h * out_w;
            for (std::int64_t i = 0; i < out_h; ++i) {
                const std::int64_t y0 = ay.lo[static_cast<std::size_t>(i)];
                const std::int64_t y1 = ay.hi[static_cast<std::size_t>(i)];
                const T fy = ay.frac[static_cast<std::size_t>(i)];
                for (std::int64_t j = 0; j < out_w; ++j) {
                    const std::int64_t x0 = ax.lo[static_cast<std::size_t>(j)];
                    const std::int64_t x1 = ax.hi[static_cast<std::size_t>(j)];
                    const T fx = ax.frac[static_cast<std::size_t>(j)];
                    const T v00 = plane[y0 * w + x0];
                    const T v01 = plane[y0 * w + x1];
                    const T v10 = plane[y1 * w + x0];
                    const T v11 = plane[y1 * w + x1];
                    oplane[i * out_w + j] = (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) +
                                            fy * ((T(1) - fx) * v10 + fx * v11);
                }
            }
        }
    }

    if (input->requires_grad()) {
        out->set_autograd({input}, [input, n, c, h, w, out_h, out_w, ay,
                                    ax](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            T* dx = input->grad_data();
            for (std::int64_t s = 0; s < n; ++s) {
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    T* dplane = dx + (s * c + ch) * h * w;
                    const T* doplane = dy.data() + (s * c + ch) * out_h * out_w;
                    for (std::int64_t i = 0; i < out_h; ++i) {
                        const std::int64_t y0 = ay.lo[static_cast<std::size_t>(i)];
                        const std::int64_t y1 = ay.hi[static_cast<std::size_t>(i)];
                        const T fy = ay.frac[static_cast<std::size_t>(i)];
                        for (std::int64_t j = 0; j < out_w; ++j) {
                            const std::int64_t x0 = ax.lo[static_cast<std::size_t>(j)];
                            const std::int64_t x1 = ax.hi[static_cast<std::size_t>(j)];
                            const T fx = ax.frac[static_cast<std::size_t>(j)];
                            const T g = doplane[i * out_w + j];
                            dplane[y0 * w + x0] += (T(1) - fy) * (T(1) - fx) * g;
                            dplane[y0 * w + x1] += (T(1) - fy) * fx * g;
                            dplane[y1 * w + x0] += fy * (T(1) - fx) * g;
                            dplane[y1 * w + x1] += fy * fx * g;
                        }
                    }
                }
            }
        });
    }
    return out;
}

/// Inverted dropout with an explicit random stream. Eval mode and p == 0
/// return the input node unchanged and consume no randomness.
template <class T>
TensorPtr<T> dropout(const TensorPtr<T>& input, double p, Mode mode, RandomStream& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ConfigError("dropout: p must be in [0, 1), got " + std::to_string(p));
    }
    if (mode == Mode::kEval || p == 0.0) {
        return input;
    }
    const std::int64_t count = input->numel();
    auto mask = std::make_shared<std::vector<T>>(static_cast<std::size_t>(count));
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (std::int64_t i = 0; i < count; ++i) {
        (*mask)[static_cast<std::size_t>(i)] = rng.uniform() < p ? T(0) : keep_scale;
    }

    auto out = Tensor<T>::create(input->shape());
    const T* x = input->data();
    T* y = out->data();
    for (std::int64_t i = 0; i < count; ++i) {
        y[i] = x[i] * (*mask)[static_cast<std::size_t>(i)];
    }
    if (input->requires_grad()) {
        out->set_autograd({input}, [input, mask, count](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            T* dx = input->grad_data();
            for (std::int64_t i = 0; i < count; ++i) {
                dx[i] += dy[i] * (*mask)[static_cast<std::size_t>(i)];
            }
        });
    }
    return out;
}

/// Concatenates along the channel axis in argument order.
template <class T>
TensorPtr<T> concat_channels(const std::vector<TensorPtr<T>>& inputs) {
    if (inputs.empty()) {
        throw ShapeError("concat_channels: no inputs");
    }
    const std::int64_t n = inputs[0]->dim(0);
    const std::int64_t h = inputs[0]->dim(2);
    const std::int64_t w = inputs[0]->dim(3);
    std::int64_t c_total = 0;
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
        const auto& t = inputs[idx];
        if (t->rank() != 4) {
            throw ShapeError("concat_channels: input " + std::to_string(idx) +
                             " must be 4-d, got " + shape_str(t->shape()));
        }
        if (t->dim(0) != n || t->dim(2) != h || t->dim(3) != w) {
            throw ShapeError("concat_channels: input " + std::to_string(idx) + " shape " +
                             shape_str(t->shape()) + " does not match leading input " +
                             shape_str(inputs[0]->shape()) + " outside the channel axis");
        }
        c_total += t->dim(1);
    }

    auto out = Tensor<T>::create({n, c_total, h, w});
    const std::int64_t hw = h * w;
    T* y = out->data();
    for (std::int64_t s = 0; s < n; ++s) {
        std::int64_t c_off = 0;
        for (const auto& t : inputs) {
            const std::int64_t ci = t->dim(1);
            std::memcpy(y + (s * c_total + c_off) * hw, t->data() + s * ci * hw,
                        static_cast<std::size_t>(ci * hw) * sizeof(T));
            c_off += ci;
        }
    }

    bool needs = false;
    for (const auto& t : inputs) {
        needs = needs || t->requires_grad();
    }
    if (needs) {
        out->set_autograd(std::vector<TensorPtr<T>>(inputs),
                          [inputs, n, c_total, hw](const Tensor<T>& out_node) {
                              std::span<const T> dy = out_node.grad();
                              for (std::int64_t s = 0; s < n; ++s) {
                                  std::int64_t c_off = 0;
                                  for (const auto& t : inputs) {
                                      const std::int64_t ci = t->dim(1);
                                      if (t->requires_grad()) {
                                          T* dx = t->grad_data() + s * ci * hw;
                                          const T* src = dy.data() + (s * c_total + c_off) * hw;
                                          for (std::int64_t i = 0; i < ci * hw; ++i) {
                                              dx[i] += src[i];
                                          }
                                      }
                                      c_off += ci;
                                  }
                              }
                          });
    }
    return out;
}

/// Numerically stable row-wise log-softmax.
template <class T>
TensorPtr<T> log_softmax(const TensorPtr<T>& input) {
    if (input->rank() != 2) {
        throw ShapeError("log_softmax: input must be 2-d [n,C], got " + shape_str(input->shape()));
    }
    const std::int64_t n = input->dim(0);
    const std::int64_t c = input->dim(1);
    auto out = Tensor<T>::create(input->shape());
    const T* x = input->data();
    T* y = out->data();
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = x + i * c;
        T* orow = y + i * c;
        T mx = row[0];
        for (std::int64_t j = 1; j < c; ++j) {
            mx = std::max(mx, row[j]);
        }
        T acc = T(0);
        for (std::int64_t j = 0; j < c; ++j) {
            acc += std::exp(row[j] - mx);
        }
        const T lse = mx + std::log(acc);
        for (std::int64_t j = 0; j < c; ++j) {
            orow[j] = row[j] - lse;
        }
    }
    check_finite(*out, "log_softmax");

    if (input->requires_grad()) {
        out->set_autograd({input}, [input, n, c](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            std::span<const T> lsm = out_node.values();
            T* dx = input->grad_data();
            for (std::int64_t i = 0; i < n; ++i) {
                T row_sum = T(0);
                for (std::int64_t j = 0; j < c; ++j) {
                    row_sum += dy[i * c + j];
                }
                for (std::int64_t j = 0; j < c; ++j) {
                    dx[i * c + j] += dy[i * c + j] - std::exp(lsm[i * c + j]) * row_sum;
                }
            }
        });
    }
    return out;
}

template <class T>
TensorPtr<T> reshape(const TensorPtr<T>& input, Shape new_shape) {
    if (shape_numel(new_shape) != input->numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(input->shape()) + " as " +
                         shape_str(new_shape));
    }
    auto out = Tensor<T>::from_values(std::move(new_shape),
                                      std::vector<T>(input->values().begin(),
                                                     input->values().end()));
    if (input->requires_grad()) {
        out->set_autograd({input}, [input](const Tensor<T>& out_node) {
            input->accumulate_grad(out_node.grad());
        });
    }
    return out;
}

template <class T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape() != b->shape()) {
        throw ShapeError("add: shape " + shape_str(a->shape()) + " != " + shape_str(b->shape()));
    }
    auto out = Tensor<T>::create(a->shape());
    const std::int64_t count = a->numel();
    const T* ap = a->data();
    const T* bp = b->data();
    T* y = out->data();
    for (std::int64_t i = 0; i < count; ++i) {
        y[i] = ap[i] + bp[i];
    }
    check_finite(*out, "add");
    if (any_requires_grad<T>({&a, &b})) {
        out->set_autograd({a, b}, [a, b](const Tensor<T>& out_node) {
            if (a->requires_grad()) {
                a->accumulate_grad(out_node.grad());
            }
            if (b->requires_grad()) {
                b->accumulate_grad(out_node.grad());
            }
        });
    }
    return out;
}

template <class T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape() != b->shape()) {
        throw ShapeError("mul: shape " + shape_str(a->shape()) + " != " + shape_str(b->shape()));
    }
    auto out = Tensor<T>::create(a->shape());
    const std::int64_t count = a->numel();
    const T* ap = a->data();
    const T* bp = b->data();
    T* y = out->data();
    for (std::int64_t i = 0; i < count; ++i) {
        y[i] = ap[i] * bp[i];
    }
    check_finite(*out, "mul");
    if (any_requires_grad<T>({&a, &b})) {
        out->set_autograd({a, b}, [a, b, count](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            const T* ap = a->data();
            const T* bp = b->data();
            if (a->requires_grad()) {
                T* da = a->grad_data();
                for (std::int64_t i = 0; i < count; ++i) {
                    da[i] += bp[i] * dy[i];
                }
            }
            if (b->requires_grad()) {
                T* db = b->grad_data();
                for (std::int64_t i = 0; i < count; ++i) {
                    db[i] += ap[i] * dy[i];
                }
            }
        });
    }
    return out;
}

/// Multiplication by a plain (non-learnable) scalar constant.
template <class T>
TensorPtr<T> scale(const TensorPtr<T>& input, T factor) {
    auto out = Tensor<T>::create(input->shape());
    const std::int64_t count = input->numel();
    const T* x = input->data();
    T* y = out->data();
    for (std::int64_t i = 0; i < count; ++i) {
        y[i] = x[i] * factor;
    }
    check_finite(*out, "scale");
    if (input->requires_grad()) {
        out->set_autograd({input}, [input, factor, count](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            T* dx = input->grad_data();
            for (std::int64_t i = 0; i < count; ++i) {
                dx[i] += factor * dy[i];
            }
        });
    }
    return out;
}

template <class T>
TensorPtr<T> sum(const TensorPtr<T>& input) {
    T acc = T(0);
    for (T v : input->values()) {
        acc += v;
    }
    auto out = Tensor<T>::scalar(acc);
    check_finite(*out, "sum");
    if (input->requires_grad()) {
        out->set_autograd({input}, [input](const Tensor<T>& out_node) {
            const T g = out_node.grad()[0];
            T* dx = input->grad_data();
            const std::int64_t count = input->numel();
            for (std::int64_t i = 0; i < count; ++i) {
                dx[i] += g;
            }
        });
    }
    return out;
}

/// Convex combination of two same-shape branches with weights
/// softmax(logits); logits holds the two learnable aggregation scalars.
template <class T>
TensorPtr<T> weighted_pair_sum(const TensorPtr<T>& a, const TensorPtr<T>& b,
                               const TensorPtr<T>& logits) {
    if (a->shape() != b->shape()) {
        throw ShapeError("weighted_pair_sum: branch shapes differ: " + shape_str(a->shape()) +
                         " vs " + shape_str(b->shape()));
    }
    if (logits->numel() != 2) {
        throw ShapeError("weighted_pair_sum: logits must hold 2 values, got " +
                         std::to_string(logits->numel()));
    }
    const T l0 = logits->values()[0];
    const T l1 = logits->values()[1];
    const T mx = std::max(l0, l1);
    const T e0 = std::exp(l0 - mx);
    const T e1 = std::exp(l1 - mx);
    const T w0 = e0 / (e0 + e1);
    const T w1 = e1 / (e0 + e1);

    auto out = Tensor<T>::create(a->shape());
    const std::int64_t count = a->numel();
    const T* ap = a->data();
    const T* bp = b->data();
    T* y = out->data();
    for (std::int64_t i = 0; i < count; ++i) {
        y[i] = w0 * ap[i] + w1 * bp[i];
    }
    check_finite(*out, "weighted_pair_sum");

    if (any_requires_grad<T>({&a, &b, &logits})) {
        out->set_autograd({a, b, logits}, [a, b, logits, w0, w1, count](const Tensor<T>& out_node) {
            std::span<const T> dy = out_node.grad();
            const T* ap = a->data();
            const T* bp = b->data();
            T s0 = T(0);
            T s1 = T(0);
            T* da = a->requires_grad() ? a->grad_data() : nullptr;
            T* db = b->requires_grad() ? b->grad_data() : nullptr;
            for (std::int64_t i = 0; i < count; ++i) {
                const T g = dy[i];
                if (da != nullptr) {
                    da[i] += w0 * g;
                }
                if (db != nullptr) {
                    db[i] += w1 * g;
                }
                s0 += g * ap[i];
                s1 += g * bp[i];
            }
            if (logits->requires_grad()) {
                const T mixed = w0 * s0 + w1 * s1;
                T* dl = logits->grad_data();
                dl[0] += w0 * (s0 - mixed);
                dl[1] += w1 * (s1 - mixed);
            }
        });
    }
    return out;
}

/// Softmax of a plain vector of logits; no graph participation.
template <class T>
std::vector<T> softmax_probs(std::span<const T> logits) {
    std::vector<T> probs(logits.size());
    T mx = logits[0];
    for (T v : logits) {
        mx = std::max(mx, v);
    }
    T acc = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        acc += probs[i];
    }
    for (T& p : probs) {
        p /= acc;
    }
    return probs;
}

}  // namespace cnet
