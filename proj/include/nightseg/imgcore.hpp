#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "nightseg/tensor.hpp"

namespace nightseg {

// Shared image math used by the losses and both mixing branches.
// Everything here is a pure function of its inputs.

template <typename T>
Tensor<T> average_pool(const Image<T>& img, int k) {
    require(img.shape.size() == 3, "average_pool: expected [C,H,W]");
    const int c = img.shape[0], h = img.shape[1], w = img.shape[2];
    require(k >= 1, "average_pool: window must be >= 1");
    if (h % k != 0 || w % k != 0)
        throw DimensionError("average_pool: image dimensions not divisible by window size");
    Tensor<T> out({c, h / k, w / k});
    const T inv = T(1) / static_cast<T>(k * k);
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < h / k; ++oy)
            for (int ox = 0; ox < w / k; ++ox) {
                T acc = 0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) acc += img.at(ch, oy * k + dy, ox * k + dx);
                out.at(ch, oy, ox) = acc * inv;
            }
    return out;
}

// Forward differences; the trailing column/row is zero so constants map to
// exactly zero.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> spatial_gradients(const Image<T>& img) {
    require(img.shape.size() == 3, "spatial_gradients: expected [C,H,W]");
    const int c = img.shape[0], h = img.shape[1], w = img.shape[2];
    Tensor<T> gx(img.shape), gy(img.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                gx.at(ch, y, x) = (x + 1 < w) ? img.at(ch, y, x + 1) - img.at(ch, y, x) : T(0);
                gy.at(ch, y, x) = (y + 1 < h) ? img.at(ch, y + 1, x) - img.at(ch, y, x) : T(0);
            }
    return {gx, gy};
}

// Mirror-without-edge ("reflect 101") index folding; degenerates to 0 for
// single-element axes.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

template <typename T>
std::array<T, kSsimWindow> gaussian_window() {
    std::array<T, kSsimWindow> w{};
    double sum = 0.0;
    const int r = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        double d = i - r;
        double v = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        w[static_cast<size_t>(i)] = static_cast<T>(v);
        sum += v;
    }
    for (auto& v : w) v = static_cast<T>(static_cast<double>(v) / sum);
    return w;
}

// Separable reflect-padded Gaussian filter, applied per channel.
template <typename T>
Tensor<T> gauss_blur(const Tensor<T>& in) {
    const auto k = gaussian_window<T>();
    const int r = kSsimWindow / 2;
    const int c = in.shape[0], h = in.shape[1], w = in.shape[2];
    Tensor<T> tmp(in.shape), out(in.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                T acc = 0;
                for (int t = -r; t <= r; ++t)
                    acc += k[static_cast<size_t>(t + r)] * in.at(ch, y, reflect_index(x + t, w));
                tmp.at(ch, y, x) = acc;
            }
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                T acc = 0;
                for (int t = -r; t <= r; ++t)
                    acc += k[static_cast<size_t>(t + r)] * tmp.at(ch, reflect_index(y + t, h), x);
                out.at(ch, y, x) = acc;
            }
    return out;
}

}  // namespace detail

// Per-pixel SSIM with the standard 11x11 Gaussian window (sigma 1.5) and
// stabilizers C1=(0.01*L)^2, C2=(0.03*L)^2 for dynamic range L=1.
template <typename T>
Tensor<T> ssim_map(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) throw DimensionError("ssim_map: shape mismatch");
    require(a.shape.size() == 3, "ssim_map: expected [C,H,W]");
    const T c1 = T(0.01) * T(0.01);
    const T c2 = T(0.03) * T(0.03);

    Tensor<T> aa(a.shape), bb(a.shape), ab(a.shape);
    for (int64_t i = 0; i < a.numel(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    Tensor<T> mu_a = detail::gauss_blur(a);
    Tensor<T> mu_b = detail::gauss_blur(b);
    Tensor<T> m_aa = detail::gauss_blur(aa);
    Tensor<T> m_bb = detail::gauss_blur(bb);
    Tensor<T> m_ab = detail::gauss_blur(ab);

    Tensor<T> out(a.shape);
    for (int64_t i = 0; i < a.numel(); ++i) {
        T ma = mu_a[i], mb = mu_b[i];
        T va = m_aa[i] - ma * ma;
        T vb = m_bb[i] - mb * mb;
        T cov = m_ab[i] - ma * mb;
        out[i] = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return out;
}

// Per-pixel argmax class and its probability. Ties break toward the lowest
// class id.
template <typename T>
ConfidenceMap<T> argmax_confidence(const ProbMap<T>& p) {
    require(p.shape.size() == 3, "argmax_confidence: expected [C,H,W]");
    const int c = p.shape[0], h = p.shape[1], w = p.shape[2];
    ConfidenceMap<T> out;
    out.labels = LabelMap({h, w});
    out.conf = Tensor<T>({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            T bv = p.at(0, y, x);
            for (int ch = 1; ch < c; ++ch) {
                T v = p.at(ch, y, x);
                if (v > bv) {
                    bv = v;
                    best = ch;
                }
            }
            out.labels.at(y, x) = static_cast<uint8_t>(best);
            out.conf.at(y, x) = bv;
        }
    return out;
}

// One-hot encoding; ignore pixels (255) produce an all-zero column.
template <typename T>
Tensor<T> one_hot(const LabelMap& y, int num_classes) {
    require(y.shape.size() == 2, "one_hot: expected [H,W]");
    const int h = y.shape[0], w = y.shape[1];
    Tensor<T> out({num_classes, h, w});
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
            uint8_t v = y.at(yy, xx);
            if (v == kIgnoreId) continue;
            if (v >= num_classes)
                throw LabelError("one_hot: label id " + std::to_string(int(v)) +
                                 " out of range for C=" + std::to_string(num_classes));
            out.at(int(v), yy, xx) = T(1);
        }
    return out;
}

}  // namespace nightseg
