#pragma once

#include <string>
#include <vector>

#include "nightseg/conv.hpp"
#include "nightseg/rng.hpp"

namespace nightseg {

template <typename T>
struct NamedParam {
    std::string name;
    NodePtr<T> node;
};

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double bound) {
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

// He-style uniform init, bound 1/sqrt(fan_in).
template <typename T>
struct Conv2dLayer {
    NodePtr<T> w, b;
    int stride = 1, pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int cin, int cout, int k, int stride_, int pad_, Rng rng)
        : stride(stride_), pad(pad_) {
        Tensor<T> wt({cout, cin, k, k});
        Tensor<T> bt({cout});
        double bound = 1.0 / std::sqrt(double(cin) * k * k);
        fill_uniform(wt, rng, bound);
        fill_uniform(bt, rng, bound);
        w = parameter(std::move(wt));
        b = parameter(std::move(bt));
    }

    void zero_init() {
        std::fill(w->value.data.begin(), w->value.data.end(), T(0));
        std::fill(b->value.data.begin(), b->value.data.end(), T(0));
    }

    NodePtr<T> operator()(const NodePtr<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <typename T>
struct ConvT2dLayer {
    NodePtr<T> w, b;
    int stride = 2, pad = 1;

    ConvT2dLayer() = default;
    ConvT2dLayer(int cin, int cout, int k, int stride_, int pad_, Rng rng)
        : stride(stride_), pad(pad_) {
        Tensor<T> wt({cin, cout, k, k});
        Tensor<T> bt({cout});
        double bound = 1.0 / std::sqrt(double(cin) * k * k);
        fill_uniform(wt, rng, bound);
        fill_uniform(bt, rng, bound);
        w = parameter(std::move(wt));
        b = parameter(std::move(bt));
    }

    void zero_init() {
        std::fill(w->value.data.begin(), w->value.data.end(), T(0));
        std::fill(b->value.data.begin(), b->value.data.end(), T(0));
    }

    NodePtr<T> operator()(const NodePtr<T>& x) const {
        return conv_transpose2d(x, w, b, stride, pad);
    }
};

// Relighting network f: three stride-2 convs down (16/32/64 channels),
// three transposed convs back up, ReLU activations. The final layer is
// zero-initialized so f(I) = 0 at initialization and enhancement starts
// from the identity. Input height/width must be divisible by 8.
template <typename T>
struct RelightNet {
    Conv2dLayer<T> c1, c2, c3;
    ConvT2dLayer<T> d1, d2, d3;

    RelightNet() = default;
    RelightNet(uint64_t seed, std::string_view tag) {
        auto sub = [&](const char* l) { return Rng::stream(seed, "init/" + std::string(tag) + "/" + l); };
        c1 = Conv2dLayer<T>(3, 16, 3, 2, 1, sub("c1"));
        c2 = Conv2dLayer<T>(16, 32, 3, 2, 1, sub("c2"));
        c3 = Conv2dLayer<T>(32, 64, 3, 2, 1, sub("c3"));
        d1 = ConvT2dLayer<T>(64, 32, 2, 2, 0, sub("d1"));
        d2 = ConvT2dLayer<T>(32, 16, 2, 2, 0, sub("d2"));
        d3 = ConvT2dLayer<T>(16, 3, 2, 2, 0, sub("d3"));
        d3.zero_init();
    }

    NodePtr<T> operator()(const NodePtr<T>& x) const {
        auto h1 = relu(c1(x));
        auto h2 = relu(c2(h1));
        auto h3 = relu(c3(h2));
        auto u1 = relu(d1(h3));
        auto u2 = relu(d2(u1));
        return d3(u2);
    }

    std::vector<NamedParam<T>> params(const std::string& prefix) const {
        return {{prefix + "/c1.w", c1.w}, {prefix + "/c1.b", c1.b}, {prefix + "/c2.w", c2.w},
                {prefix + "/c2.b", c2.b}, {prefix + "/c3.w", c3.w}, {prefix + "/c3.b", c3.b},
                {prefix + "/d1.w", d1.w}, {prefix + "/d1.b", d1.b}, {prefix + "/d2.w", d2.w},
                {prefix + "/d2.b", d2.b}, {prefix + "/d3.w", d3.w}, {prefix + "/d3.b", d3.b}};
    }
};

// Segmentation network M: four conv blocks (the first two stride-2),
// a 1x1 class head at 1/4 resolution, bilinear upsample back to the input
// size, channel softmax. Input height/width must be divisible by 4.
template <typename T>
struct SegNet {
    int num_classes = 0;
    Conv2dLayer<T> b1, b2, b3, b4, head;

    SegNet() = default;
    SegNet(int classes, uint64_t seed, std::string_view tag) : num_classes(classes) {
        auto sub = [&](const char* l) { return Rng::stream(seed, "init/" + std::string(tag) + "/" + l); };
        b1 = Conv2dLayer<T>(3, 16, 3, 2, 1, sub("b1"));
        b2 = Conv2dLayer<T>(16, 24, 3, 2, 1, sub("b2"));
        b3 = Conv2dLayer<T>(24, 24, 3, 1, 1, sub("b3"));
        b4 = Conv2dLayer<T>(24, 24, 3, 1, 1, sub("b4"));
        head = Conv2dLayer<T>(24, classes, 1, 1, 0, sub("head"));
    }

    NodePtr<T> logits(const NodePtr<T>& x) const {
        auto h = relu(b1(x));
        h = relu(b2(h));
        h = relu(b3(h));
        h = relu(b4(h));
        auto l = head(h);
        return upsample_bilinear(l, x->value.shape[1], x->value.shape[2]);
    }

    NodePtr<T> operator()(const NodePtr<T>& x) const { return softmax_channels(logits(x)); }

    std::vector<NamedParam<T>> params(const std::string& prefix) const {
        return {{prefix + "/b1.w", b1.w},     {prefix + "/b1.b", b1.b},
                {prefix + "/b2.w", b2.w},     {prefix + "/b2.b", b2.b},
                {prefix + "/b3.w", b3.w},     {prefix + "/b3.b", b3.b},
                {prefix + "/b4.w", b4.w},     {prefix + "/b4.b", b4.b},
                {prefix + "/head.w", head.w}, {prefix + "/head.b", head.b}};
    }
};

// Output-space discriminator: four stride-2 convs over a ProbMap, raw
// 1-channel scores at 1/16 resolution (no output activation; the
// least-squares objectives consume raw values). Input must be >= 16 px.
template <typename T>
struct Discriminator {
    Conv2dLayer<T> l1, l2, l3, l4;

    Discriminator() = default;
    Discriminator(int in_channels, uint64_t seed, std::string_view tag) {
        auto sub = [&](const char* l) { return Rng::stream(seed, "init/" + std::string(tag) + "/" + l); };
        l1 = Conv2dLayer<T>(in_channels, 12, 4, 2, 1, sub("l1"));
        l2 = Conv2dLayer<T>(12, 16, 4, 2, 1, sub("l2"));
        l3 = Conv2dLayer<T>(16, 16, 4, 2, 1, sub("l3"));
        l4 = Conv2dLayer<T>(16, 1, 4, 2, 1, sub("l4"));
    }

    NodePtr<T> operator()(const NodePtr<T>& p) const {
        auto h = relu(l1(p));
        h = relu(l2(h));
        h = relu(l3(h));
        return l4(h);
    }

    std::vector<NamedParam<T>> params(const std::string& prefix) const {
        return {{prefix + "/l1.w", l1.w}, {prefix + "/l1.b", l1.b}, {prefix + "/l2.w", l2.w},
                {prefix + "/l2.b", l2.b}, {prefix + "/l3.w", l3.w}, {prefix + "/l3.b", l3.b},
                {prefix + "/l4.w", l4.w}, {prefix + "/l4.b", l4.b}};
    }
};

}  // namespace nightseg
