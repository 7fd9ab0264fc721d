#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "nightseg/imgcore.hpp"
#include "nightseg/tensor.hpp"

namespace nightseg {

// Reverse-mode autodiff over Tensor<T>. Graphs are built per training step
// and released afterwards; parameter nodes are long-lived leaves whose
// gradients accumulate until explicitly zeroed. Backward functions only
// gather into their own write targets, so the heavy ops can run their
// loops in parallel and still produce bit-identical results regardless of
// thread count.

template <typename T>
struct Node;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<NodePtr<T>> parents;
    std::function<void(Node<T>&)> backward_fn;

    explicit Node(Tensor<T> v) : value(std::move(v)) {}

    void ensure_grad() {
        if (grad.shape != value.shape) grad = Tensor<T>(value.shape);
    }
    void zero_grad() {
        if (grad.shape == value.shape)
            std::fill(grad.data.begin(), grad.data.end(), T(0));
    }
};

template <typename T>
NodePtr<T> constant(Tensor<T> v) {
    return std::make_shared<Node<T>>(std::move(v));
}

template <typename T>
NodePtr<T> parameter(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>(std::move(v));
    n->requires_grad = true;
    n->ensure_grad();
    return n;
}

// Value copy that does not participate in backward.
template <typename T>
NodePtr<T> detach(const NodePtr<T>& x) {
    return constant(x->value);
}

namespace ad {

template <typename T>
NodePtr<T> make(Tensor<T> v, std::vector<NodePtr<T>> parents, std::function<void(Node<T>&)> bw) {
    auto n = std::make_shared<Node<T>>(std::move(v));
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(bw);
    }
    return n;
}

}  // namespace ad

// Runs reverse-mode accumulation from `root`, seeding d(root)/d(root) with
// `seed` (broadcast over root's elements). Interior gradients live only for
// the duration of the call graph; parameter leaves keep accumulating.
template <typename T>
void backward(const NodePtr<T>& root, T seed = T(1)) {
    // iterative topological order over the requires_grad subgraph
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    if (!root->requires_grad) return;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // Interior gradients are scratch space, re-zeroed per call; leaf
    // (parameter) gradients keep accumulating until the optimizer clears them.
    for (Node<T>* n : order) {
        if (n == root.get()) continue;
        n->ensure_grad();
        if (n->backward_fn) n->zero_grad();
    }
    root->ensure_grad();
    root->zero_grad();
    for (auto& g : root->grad.data) g = seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// elementwise ops

template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.same_shape(b->value), "add: shape mismatch");
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    return ad::make<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
        if (a->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
        if (b->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i];
    });
}

template <typename T>
NodePtr<T> sub(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.same_shape(b->value), "sub: shape mismatch");
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    return ad::make<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
        if (a->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
        if (b->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] -= self.grad[i];
    });
}

template <typename T>
NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.same_shape(b->value), "mul: shape mismatch");
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    return ad::make<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
        if (a->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * b->value[i];
        if (b->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i] * a->value[i];
    });
}

template <typename T>
NodePtr<T> div(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.same_shape(b->value), "div: shape mismatch");
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] / b->value[i];
    return ad::make<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
        if (a->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] / b->value[i];
        if (b->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) {
                T d = b->value[i];
                b->grad[i] -= self.grad[i] * a->value[i] / (d * d);
            }
    });
}

template <typename T>
NodePtr<T> mul_scalar(const NodePtr<T>& a, T s) {
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
    return ad::make<T>(std::move(out), {a}, [a, s](Node<T>& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * s;
    });
}

template <typename T>
NodePtr<T> add_scalar(const NodePtr<T>& a, T s) {
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
    return ad::make<T>(std::move(out), {a}, [a](Node<T>& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    });
}

// s - x
template <typename T>
NodePtr<T> sub_from_scalar(T s, const NodePtr<T>& a) {
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = s - a->value[i];
    return ad::make<T>(std::move(out), {a}, [a](Node<T>& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] -= self.grad[i];
    });
}

template <typename T>
NodePtr<T> square(const NodePtr<T>& a) {
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * a->value[i];
    return ad::make<T>(std::move(out), {a}, [a](Node<T>& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            a->grad[i] += self.grad[i] * T(2) * a->value[i];
    });
}

// |x|, subgradient 0 at the origin
template <typename T>
NodePtr<T> abs_val(const NodePtr<T>& a) {
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(a->value[i]);
    return ad::make<T>(std::move(out), {a}, [a](Node<T>& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i) {
            T v = a->value[i];
            T s = (v > T(0)) ? T(1) : (v < T(0) ? T(-1) : T(0));
            a->grad[i] += self.grad[i] * s;
        }
    });
}

template <typename T>
NodePtr<T> relu(const NodePtr<T>& a) {
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] > T(0) ? a->value[i] : T(0);
    return ad::make<T>(std::move(out), {a}, [a](Node<T>& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            if (a->value[i] > T(0)) a->grad[i] += self.grad[i];
    });
}

// log(max(x, eps)); the clamp keeps cross-entropy finite near 0
template <typename T>
NodePtr<T> log_clamped(const NodePtr<T>& a, T eps) {
    Tensor<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(std::max(a->value[i], eps));
    return ad::make<T>(std::move(out), {a}, [a, eps](Node<T>& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            if (a->value[i] > eps) a->grad[i] += self.grad[i] / a->value[i];
    });
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
NodePtr<T> sum(const NodePtr<T>& a) {
    T acc = 0;
    for (int64_t i = 0; i < a->value.numel(); ++i) acc += a->value[i];
    Tensor<T> out({1});
    out[0] = acc;
    return ad::make<T>(std::move(out), {a}, [a](Node<T>& self) {
        T g = self.grad[0];
        for (int64_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += g;
    });
}

template <typename T>
NodePtr<T> mean(const NodePtr<T>& a) {
    const T inv = T(1) / static_cast<T>(a->value.numel());
    return mul_scalar(sum(a), inv);
}

// scale * sum_i(x_i * w_i) with a constant weight tensor
template <typename T>
NodePtr<T> weighted_sum(const NodePtr<T>& a, Tensor<T> w, T scale) {
    require(a->value.same_shape(w), "weighted_sum: weight shape mismatch");
    T acc = 0;
    for (int64_t i = 0; i < a->value.numel(); ++i) acc += a->value[i] * w[i];
    Tensor<T> out({1});
    out[0] = acc * scale;
    auto wp = std::make_shared<Tensor<T>>(std::move(w));
    return ad::make<T>(std::move(out), {a}, [a, wp, scale](Node<T>& self) {
        T g = self.grad[0] * scale;
        for (int64_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += g * (*wp)[i];
    });
}

// out[y,x] = P[labels[y,x], y, x]; positions where labels==255 yield 1 and
// receive no gradient.
template <typename T>
NodePtr<T> gather_channel(const NodePtr<T>& p, LabelMap labels) {
    require(p->value.shape.size() == 3, "gather_channel: expected [C,H,W]");
    const int c = p->value.shape[0], h = p->value.shape[1], w = p->value.shape[2];
    require(labels.shape[0] == h && labels.shape[1] == w, "gather_channel: label shape mismatch");
    Tensor<T> out({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            uint8_t l = labels.at(y, x);
            if (l == kIgnoreId) {
                out.at(y, x) = T(1);
            } else {
                require(int(l) < c, "gather_channel: label out of range");
                out.at(y, x) = p->value.at(int(l), y, x);
            }
        }
    auto lp = std::make_shared<LabelMap>(std::move(labels));
    return ad::make<T>(std::move(out), {p}, [p, lp, h, w](Node<T>& self) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                uint8_t l = lp->at(y, x);
                if (l != kIgnoreId) p->grad.at(int(l), y, x) += self.grad.at(y, x);
            }
    });
}

// channel softmax over [C,H,W]
template <typename T>
NodePtr<T> softmax_channels(const NodePtr<T>& a) {
    require(a->value.shape.size() == 3, "softmax_channels: expected [C,H,W]");
    const int c = a->value.shape[0], h = a->value.shape[1], w = a->value.shape[2];
    Tensor<T> out(a->value.shape);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            T mx = a->value.at(0, y, x);
            for (int ch = 1; ch < c; ++ch) mx = std::max(mx, a->value.at(ch, y, x));
            T denom = 0;
            for (int ch = 0; ch < c; ++ch) {
                T e = std::exp(a->value.at(ch, y, x) - mx);
                out.at(ch, y, x) = e;
                denom += e;
            }
            T inv = T(1) / denom;
            for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) *= inv;
        }
    auto n = ad::make<T>(std::move(out), {a}, [a, c, h, w](Node<T>& self) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                T dot = 0;
                for (int ch = 0; ch < c; ++ch) dot += self.grad.at(ch, y, x) * self.value.at(ch, y, x);
                for (int ch = 0; ch < c; ++ch)
                    a->grad.at(ch, y, x) +=
                        self.value.at(ch, y, x) * (self.grad.at(ch, y, x) - dot);
            }
    });
    return n;
}

// ---------------------------------------------------------------------------
// spatial ops

// forward differences matching imgcore::spatial_gradients
template <typename T>
NodePtr<T> gradient_x(const NodePtr<T>& a) {
    const int c = a->value.shape[0], h = a->value.shape[1], w = a->value.shape[2];
    Tensor<T> out(a->value.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x + 1 < w; ++x)
                out.at(ch, y, x) = a->value.at(ch, y, x + 1) - a->value.at(ch, y, x);
    return ad::make<T>(std::move(out), {a}, [a, c, h, w](Node<T>& self) {
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    T g = 0;
                    if (x + 1 < w) g -= self.grad.at(ch, y, x);
                    if (x >= 1) g += self.grad.at(ch, y, x - 1);
                    a->grad.at(ch, y, x) += g;
                }
    });
}

template <typename T>
NodePtr<T> gradient_y(const NodePtr<T>& a) {
    const int c = a->value.shape[0], h = a->value.shape[1], w = a->value.shape[2];
    Tensor<T> out(a->value.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y + 1 < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(ch, y, x) = a->value.at(ch, y + 1, x) - a->value.at(ch, y, x);
    return ad::make<T>(std::move(out), {a}, [a, c, h, w](Node<T>& self) {
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    T g = 0;
                    if (y + 1 < h) g -= self.grad.at(ch, y, x);
                    if (y >= 1) g += self.grad.at(ch, y - 1, x);
                    a->grad.at(ch, y, x) += g;
                }
    });
}

template <typename T>
NodePtr<T> avg_pool_node(const NodePtr<T>& a, int k) {
    Tensor<T> out = average_pool(a->value, k);
    const int c = a->value.shape[0], oh = out.shape[1], ow = out.shape[2];
    const T inv = T(1) / static_cast<T>(k * k);
    return ad::make<T>(std::move(out), {a}, [a, c, oh, ow, k, inv](Node<T>& self) {
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T g = self.grad.at(ch, oy, ox) * inv;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx)
                            a->grad.at(ch, oy * k + dy, ox * k + dx) += g;
                }
    });
}

// Broadcast each cell back over its kxk block (adjoint of block summation).
template <typename T>
NodePtr<T> upsample_block(const NodePtr<T>& a, int k) {
    const int c = a->value.shape[0], ih = a->value.shape[1], iw = a->value.shape[2];
    Tensor<T> out({c, ih * k, iw * k});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < ih * k; ++y)
            for (int x = 0; x < iw * k; ++x) out.at(ch, y, x) = a->value.at(ch, y / k, x / k);
    return ad::make<T>(std::move(out), {a}, [a, c, ih, iw, k](Node<T>& self) {
        for (int ch = 0; ch < c; ++ch)
            for (int iy = 0; iy < ih; ++iy)
                for (int ix = 0; ix < iw; ++ix) {
                    T g = 0;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx)
                            g += self.grad.at(ch, iy * k + dy, ix * k + dx);
                    a->grad.at(ch, iy, ix) += g;
                }
    });
}

// Reflect-101 padding as a differentiable op; the adjoint folds padded
// positions back onto their mirror sources.
template <typename T>
NodePtr<T> pad_reflect(const NodePtr<T>& a, int pad) {
    const int c = a->value.shape[0], h = a->value.shape[1], w = a->value.shape[2];
    Tensor<T> out({c, h + 2 * pad, w + 2 * pad});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h + 2 * pad; ++y) {
            int sy = reflect_index(y - pad, h);
            for (int x = 0; x < w + 2 * pad; ++x)
                out.at(ch, y, x) = a->value.at(ch, sy, reflect_index(x - pad, w));
        }
    return ad::make<T>(std::move(out), {a}, [a, c, h, w, pad](Node<T>& self) {
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h + 2 * pad; ++y) {
                int sy = reflect_index(y - pad, h);
                for (int x = 0; x < w + 2 * pad; ++x)
                    a->grad.at(ch, sy, reflect_index(x - pad, w)) += self.grad.at(ch, y, x);
            }
    });
}

// Valid-mode separable correlation with a symmetric 1D kernel, per channel.
// Both passes are row-wise axpy loops.
template <typename T>
NodePtr<T> sep_filter_valid(const NodePtr<T>& a, std::vector<T> kernel) {
    const int c = a->value.shape[0], h = a->value.shape[1], w = a->value.shape[2];
    const int kn = static_cast<int>(kernel.size());
    const int oh = h - kn + 1, ow = w - kn + 1;
    require(oh >= 1 && ow >= 1, "sep_filter_valid: kernel larger than input");
    auto kp = std::make_shared<std::vector<T>>(std::move(kernel));

    Tensor<T> tmp({c, oh, w});
    const T* in = a->value.ptr();
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y) {
            T* trow = tmp.ptr() + (size_t(ch) * oh + y) * w;
            std::fill(trow, trow + w, T(0));
            for (int t = 0; t < kn; ++t) {
                const T kv = (*kp)[size_t(t)];
                const T* irow = in + (size_t(ch) * h + y + t) * w;
                for (int x = 0; x < w; ++x) trow[x] += kv * irow[x];
            }
        }
    Tensor<T> out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y) {
            const T* trow = tmp.ptr() + (size_t(ch) * oh + y) * w;
            T* orow = out.ptr() + (size_t(ch) * oh + y) * ow;
            std::fill(orow, orow + ow, T(0));
            for (int t = 0; t < kn; ++t) {
                const T kv = (*kp)[size_t(t)];
                for (int x = 0; x < ow; ++x) orow[x] += kv * trow[x + t];
            }
        }
    return ad::make<T>(std::move(out), {a}, [a, kp, c, h, w, kn, oh, ow](Node<T>& self) {
        // adjoint: full correlation with the same (symmetric) kernel,
        // separable again
        const T* gd = self.grad.ptr();
        Tensor<T> tmp2({c, oh, w});
        std::fill(tmp2.data.begin(), tmp2.data.end(), T(0));
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y) {
                const T* grow = gd + (size_t(ch) * oh + y) * ow;
                T* trow = tmp2.ptr() + (size_t(ch) * oh + y) * w;
                for (int t = 0; t < kn; ++t) {
                    const T kv = (*kp)[size_t(t)];
                    for (int x = 0; x < ow; ++x) trow[x + t] += kv * grow[x];
                }
            }
        T* ga = a->grad.ptr();
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y) {
                const T* trow = tmp2.ptr() + (size_t(ch) * oh + y) * w;
                for (int t = 0; t < kn; ++t) {
                    const T kv = (*kp)[size_t(t)];
                    T* garow = ga + (size_t(ch) * h + y + t) * w;
                    for (int x = 0; x < w; ++x) garow[x] += kv * trow[x];
                }
            }
    });
}

// Reflect-padded Gaussian blur (graph version of imgcore's filter).
template <typename T>
NodePtr<T> gauss_blur_node(const NodePtr<T>& a) {
    auto win = detail::gaussian_window<T>();
    std::vector<T> k(win.begin(), win.end());
    return sep_filter_valid(pad_reflect(a, detail::kSsimWindow / 2), std::move(k));
}

// Bilinear resize (half-pixel centers, clamped), as used after the
// segmenter's stride-4 trunk.
template <typename T>
NodePtr<T> upsample_bilinear(const NodePtr<T>& a, int out_h, int out_w) {
    const int c = a->value.shape[0], ih = a->value.shape[1], iw = a->value.shape[2];
    struct Tap {
        int y0, y1, x0, x1;
        T wy, wx;
    };
    auto taps = std::make_shared<std::vector<Tap>>();
    taps->resize(static_cast<size_t>(out_h) * out_w);
    const double sy = static_cast<double>(ih) / out_h;
    const double sx = static_cast<double>(iw) / out_w;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double fy = (y + 0.5) * sy - 0.5;
            double fx = (x + 0.5) * sx - 0.5;
            fy = std::min(std::max(fy, 0.0), double(ih - 1));
            fx = std::min(std::max(fx, 0.0), double(iw - 1));
            Tap t;
            t.y0 = static_cast<int>(fy);
            t.x0 = static_cast<int>(fx);
            t.y1 = std::min(t.y0 + 1, ih - 1);
            t.x1 = std::min(t.x0 + 1, iw - 1);
            t.wy = static_cast<T>(fy - t.y0);
            t.wx = static_cast<T>(fx - t.x0);
            (*taps)[static_cast<size_t>(y) * out_w + x] = t;
        }
    Tensor<T> out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                const Tap& t = (*taps)[static_cast<size_t>(y) * out_w + x];
                T v00 = a->value.at(ch, t.y0, t.x0), v01 = a->value.at(ch, t.y0, t.x1);
                T v10 = a->value.at(ch, t.y1, t.x0), v11 = a->value.at(ch, t.y1, t.x1);
                T top = v00 + (v01 - v00) * t.wx;
                T bot = v10 + (v11 - v10) * t.wx;
                out.at(ch, y, x) = top + (bot - top) * t.wy;
            }
    return ad::make<T>(std::move(out), {a}, [a, taps, c, out_h, out_w](Node<T>& self) {
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < out_h; ++y)
                for (int x = 0; x < out_w; ++x) {
                    const Tap& t = (*taps)[static_cast<size_t>(y) * out_w + x];
                    T g = self.grad.at(ch, y, x);
                    T w00 = (T(1) - t.wy) * (T(1) - t.wx), w01 = (T(1) - t.wy) * t.wx;
                    T w10 = t.wy * (T(1) - t.wx), w11 = t.wy * t.wx;
                    a->grad.at(ch, t.y0, t.x0) += g * w00;
                    a->grad.at(ch, t.y0, t.x1) += g * w01;
                    a->grad.at(ch, t.y1, t.x0) += g * w10;
                    a->grad.at(ch, t.y1, t.x1) += g * w11;
                }
    });
}

}  // namespace nightseg
