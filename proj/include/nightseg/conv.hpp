#pragma once

#include <cstring>

#include "nightseg/autodiff.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nightseg {

// im2col/GEMM convolutions in CHW layout. The weight layouts are chosen so
// the flat parameter tensors are usable as GEMM operands directly:
// conv2d weights [Cout,Cin,kh,kw] give rows of A, transposed-conv weights
// [Cin,Cout,kh,kw] give the [Cin x Cout*k*k] view. Every parallel loop
// assigns each result row to exactly one thread, so outputs are
// bit-identical for any thread count.

namespace conv_detail {

// range of grid indices g with 0 <= g*stride - pad + k < extent
inline void valid_range(int extent, int grid, int stride, int pad, int k, int& lo, int& hi) {
    int off = k - pad;
    lo = off < 0 ? (-off + stride - 1) / stride : 0;
    int max_g = extent - 1 - off;
    hi = max_g < 0 ? 0 : std::min(grid, max_g / stride + 1);
    if (lo > hi) lo = hi;
}

// col[(c*k+ky)*k+kx, gy*gw+gx] = src[c, gy*s-p+ky, gx*s-p+kx], zero outside
template <typename T>
void im2col(const T* src, int channels, int h, int w, int k, int stride, int pad, int gh, int gw,
            T* col) {
    const size_t cols = size_t(gh) * gw;
    std::memset(col, 0, size_t(channels) * k * k * cols * sizeof(T));
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* crow = col + (size_t(c) * k * k + size_t(ky) * k + kx) * cols;
                int lo, hi;
                valid_range(w, gw, stride, pad, kx, lo, hi);
                const int off = kx - pad;
                for (int gy = 0; gy < gh; ++gy) {
                    int sy = gy * stride - pad + ky;
                    if (sy < 0 || sy >= h) continue;
                    const T* srow = src + (size_t(c) * h + sy) * w;
                    T* dst = crow + size_t(gy) * gw;
                    for (int gx = lo; gx < hi; ++gx) dst[gx] = srow[gx * stride + off];
                }
            }
}

// adjoint of im2col: dst[c, gy*s-p+ky, gx*s-p+kx] += col[...]
template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, int stride, int pad, int gh,
                int gw, T* dst) {
    const size_t cols = size_t(gh) * gw;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* crow = col + (size_t(c) * k * k + size_t(ky) * k + kx) * cols;
                int lo, hi;
                valid_range(w, gw, stride, pad, kx, lo, hi);
                const int off = kx - pad;
                for (int gy = 0; gy < gh; ++gy) {
                    int sy = gy * stride - pad + ky;
                    if (sy < 0 || sy >= h) continue;
                    T* drow = dst + (size_t(c) * h + sy) * w;
                    const T* s = crow + size_t(gy) * gw;
                    for (int gx = lo; gx < hi; ++gx) drow[gx * stride + off] += s[gx];
                }
            }
}

// C[m,n] (+)= A[m,l] * B[l,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int l, int n, bool accumulate) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < m; ++i) {
        T* crow = c + size_t(i) * n;
        if (!accumulate) std::memset(crow, 0, size_t(n) * sizeof(T));
        const T* arow = a + size_t(i) * l;
        int p = 0;
        for (; p + 4 <= l; p += 4) {
            const T a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
            const T* b0 = b + size_t(p) * n;
            const T* b1 = b0 + n;
            const T* b2 = b1 + n;
            const T* b3 = b2 + n;
            for (int j = 0; j < n; ++j) crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < l; ++p) {
            const T av = arow[p];
            const T* brow = b + size_t(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[l,n] (+)= A^T[l,m] * B[m,n]  with A stored [m,l]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int l, int n, bool accumulate) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < l; ++i) {
        T* crow = c + size_t(i) * n;
        if (!accumulate) std::memset(crow, 0, size_t(n) * sizeof(T));
        int p = 0;
        for (; p + 4 <= m; p += 4) {
            const T a0 = a[size_t(p) * l + i], a1 = a[size_t(p + 1) * l + i];
            const T a2 = a[size_t(p + 2) * l + i], a3 = a[size_t(p + 3) * l + i];
            const T* b0 = b + size_t(p) * n;
            const T* b1 = b0 + n;
            const T* b2 = b1 + n;
            const T* b3 = b2 + n;
            for (int j = 0; j < n; ++j) crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < m; ++p) {
            const T av = a[size_t(p) * l + i];
            const T* brow = b + size_t(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,l] += A[m,n] * B^T[n,l] with B stored [l,n]. One operand is
// transposed into scratch so the hot loop stays unit-stride (the naive
// dot-product form does not vectorize without float reassociation); which
// operand depends on the row count.
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, int m, int l, int n) {
    if (m >= 16) {
        // compute C'[l,m] = B * A^T with A transposed, then fold into C
        std::vector<T> at(size_t(n) * m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) at[size_t(j) * m + i] = a[size_t(i) * n + j];
        std::vector<T> ct(size_t(l) * m, T(0));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int p = 0; p < l; ++p) {
            const T* brow = b + size_t(p) * n;
            T* crow = ct.data() + size_t(p) * m;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                const T b0 = brow[j], b1 = brow[j + 1], b2 = brow[j + 2], b3 = brow[j + 3];
                const T* a0 = at.data() + size_t(j) * m;
                const T* a1 = a0 + m;
                const T* a2 = a1 + m;
                const T* a3 = a2 + m;
                for (int i = 0; i < m; ++i)
                    crow[i] += b0 * a0[i] + b1 * a1[i] + b2 * a2[i] + b3 * a3[i];
            }
            for (; j < n; ++j) {
                const T bv = brow[j];
                const T* arow = at.data() + size_t(j) * m;
                for (int i = 0; i < m; ++i) crow[i] += bv * arow[i];
            }
        }
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < l; ++p) c[size_t(i) * l + p] += ct[size_t(p) * m + i];
        return;
    }
    std::vector<T> bt(size_t(n) * l);
    for (int p = 0; p < l; ++p)
        for (int j = 0; j < n; ++j) bt[size_t(j) * l + p] = b[size_t(p) * n + j];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < m; ++i) {
        const T* arow = a + size_t(i) * n;
        T* crow = c + size_t(i) * l;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            const T a0 = arow[j], a1 = arow[j + 1], a2 = arow[j + 2], a3 = arow[j + 3];
            const T* b0 = bt.data() + size_t(j) * l;
            const T* b1 = b0 + l;
            const T* b2 = b1 + l;
            const T* b3 = b2 + l;
            for (int p = 0; p < l; ++p) crow[p] += a0 * b0[p] + a1 * b1[p] + a2 * b2[p] + a3 * b3[p];
        }
        for (; j < n; ++j) {
            const T av = arow[j];
            const T* brow = bt.data() + size_t(j) * l;
            for (int p = 0; p < l; ++p) crow[p] += av * brow[p];
        }
    }
}

}  // namespace conv_detail

template <typename T>
NodePtr<T> conv2d(const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b, int stride,
                  int pad) {
    require(x->value.shape.size() == 3 && w->value.shape.size() == 4, "conv2d: bad shapes");
    const int cin = x->value.shape[0], ih = x->value.shape[1], iw = x->value.shape[2];
    const int cout = w->value.shape[0], kh = w->value.shape[2], kw = w->value.shape[3];
    require(w->value.shape[1] == cin && kh == kw, "conv2d: channel/kernel mismatch");
    const int k = kh;
    const int oh = (ih + 2 * pad - k) / stride + 1;
    const int ow = (iw + 2 * pad - k) / stride + 1;
    require(oh >= 1 && ow >= 1, "conv2d: output would be empty");
    const int patch = cin * k * k;
    const size_t cols = size_t(oh) * ow;

    Tensor<T> out({cout, oh, ow});
    auto col = std::make_shared<std::vector<T>>(size_t(patch) * cols);
    conv_detail::im2col(x->value.ptr(), cin, ih, iw, k, stride, pad, oh, ow, col->data());
    conv_detail::gemm_nn(w->value.ptr(), col->data(), out.ptr(), cout, patch, int(cols), false);
    for (int co = 0; co < cout; ++co) {
        T* orow = out.ptr() + size_t(co) * cols;
        const T bias = b->value[co];
        for (size_t i = 0; i < cols; ++i) orow[i] += bias;
    }

    return ad::make<T>(std::move(out), {x, w, b},
                       [x, w, b, col, cin, ih, iw, cout, k, oh, ow, stride, pad, patch,
                        cols](Node<T>& self) {
        const T* gd = self.grad.ptr();
        if (x->requires_grad) {
            std::vector<T> gcol(size_t(patch) * cols);
            conv_detail::gemm_tn(w->value.ptr(), gd, gcol.data(), cout, patch, int(cols), false);
            conv_detail::col2im_add(gcol.data(), cin, ih, iw, k, stride, pad, oh, ow,
                                    x->grad.ptr());
        }
        if (w->requires_grad) {
            conv_detail::gemm_nt_acc(gd, col->data(), w->grad.ptr(), cout, patch, int(cols));
        }
        if (b->requires_grad) {
            T* gb = b->grad.ptr();
            for (int co = 0; co < cout; ++co) {
                T acc = 0;
                const T* g0 = gd + size_t(co) * cols;
                for (size_t i = 0; i < cols; ++i) acc += g0[i];
                gb[co] += acc;
            }
        }
    });
}

// Transposed convolution; weight layout [Cin,Cout,kh,kw],
// out = (in-1)*stride - 2*pad + k.
template <typename T>
NodePtr<T> conv_transpose2d(const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                            int stride, int pad) {
    require(x->value.shape.size() == 3 && w->value.shape.size() == 4,
            "conv_transpose2d: bad shapes");
    const int cin = x->value.shape[0], ih = x->value.shape[1], iw = x->value.shape[2];
    require(w->value.shape[0] == cin, "conv_transpose2d: channel mismatch");
    const int cout = w->value.shape[1], kh = w->value.shape[2], kw = w->value.shape[3];
    require(kh == kw, "conv_transpose2d: kernel must be square");
    const int k = kh;
    const int oh = (ih - 1) * stride - 2 * pad + k;
    const int ow = (iw - 1) * stride - 2 * pad + k;
    require(oh >= 1 && ow >= 1, "conv_transpose2d: output would be empty");
    const int patch = cout * k * k;
    const size_t cells = size_t(ih) * iw;

    Tensor<T> out({cout, oh, ow});
    {
        std::vector<T> tmp(size_t(patch) * cells);
        conv_detail::gemm_tn(w->value.ptr(), x->value.ptr(), tmp.data(), cin, patch, int(cells),
                             false);
        std::fill(out.data.begin(), out.data.end(), T(0));
        conv_detail::col2im_add(tmp.data(), cout, oh, ow, k, stride, pad, ih, iw, out.ptr());
        for (int co = 0; co < cout; ++co) {
            T* orow = out.ptr() + size_t(co) * oh * ow;
            const T bias = b->value[co];
            for (int i = 0; i < oh * ow; ++i) orow[i] += bias;
        }
    }

    return ad::make<T>(std::move(out), {x, w, b},
                       [x, w, b, cin, ih, iw, cout, k, oh, ow, stride, pad, patch,
                        cells](Node<T>& self) {
        const T* gd = self.grad.ptr();
        std::vector<T> colT(size_t(patch) * cells);
        conv_detail::im2col(gd, cout, oh, ow, k, stride, pad, ih, iw, colT.data());
        if (x->requires_grad) {
            conv_detail::gemm_nn(w->value.ptr(), colT.data(), x->grad.ptr(), cin, patch,
                                 int(cells), true);
        }
        if (w->requires_grad) {
            conv_detail::gemm_nt_acc(x->value.ptr(), colT.data(), w->grad.ptr(), cin, patch,
                                     int(cells));
        }
        if (b->requires_grad) {
            T* gb = b->grad.ptr();
            for (int co = 0; co < cout; ++co) {
                T acc = 0;
                const T* g0 = gd + size_t(co) * oh * ow;
                for (int i = 0; i < oh * ow; ++i) acc += g0[i];
                gb[co] += acc;
            }
        }
    });
}

}  // namespace nightseg
