#pragma once

#include "nightseg/mixing.hpp"
#include "nightseg/nn.hpp"

namespace nightseg {

// Segmentation losses. P arguments are channel-softmax ProbMap nodes
// produced by SegNet.

inline constexpr double kLogEps = 1e-8;

template <typename T>
NodePtr<T> seg_forward(const SegNet<T>& net, const NodePtr<T>& image) {
    return net(image);
}

template <typename T>
NodePtr<T> seg_forward(const SegNet<T>& net, const Image<T>& image) {
    return net(constant(image));
}

// Cross-entropy normalized by N*C; ignore-labeled pixels contribute zero
// while still counting toward N.
template <typename T>
NodePtr<T> loss_ce(const NodePtr<T>& p, const LabelMap& y) {
    require(p->value.shape.size() == 3, "loss_ce: expected [C,H,W]");
    const int c = p->value.shape[0], h = p->value.shape[1], w = p->value.shape[2];
    if (y.shape[0] != h || y.shape[1] != w) throw DimensionError("loss_ce: label shape mismatch");
    Tensor<T> weights({h, w});
    for (int64_t i = 0; i < y.numel(); ++i) weights[i] = (y[i] == kIgnoreId) ? T(0) : T(1);
    auto gathered = gather_channel(p, y);
    auto logp = log_clamped(gathered, static_cast<T>(kLogEps));
    const T scale = T(-1) / static_cast<T>(int64_t(h) * w * c);
    return weighted_sum(logp, std::move(weights), scale);
}

// Mixed-sample cross-entropy (same formula; the pseudo half of the mixed
// label is a plain value by construction, so no gradient reaches the night
// forward pass that produced it).
template <typename T>
NodePtr<T> loss_mixed_ce(const NodePtr<T>& p_m, const LabelMap& y_m) {
    return loss_ce(p_m, y_m);
}

// Focal self-supervision: the day prediction acts as a detached teacher.
// Per pixel with c* = argmax P_d: (1 - p_d)^gamma * (-log p_n[c*]),
// averaged over pixels.
template <typename T>
NodePtr<T> loss_focal_ssl(const ProbMap<T>& p_day, const NodePtr<T>& p_night, double gamma) {
    require(p_day.shape.size() == 3, "loss_focal_ssl: expected [C,H,W]");
    if (!p_day.same_shape(p_night->value)) throw DimensionError("loss_focal_ssl: shape mismatch");
    ConfidenceMap<T> day = argmax_confidence(p_day);
    const int h = p_day.shape[1], w = p_day.shape[2];
    Tensor<T> weights({h, w});
    for (int64_t i = 0; i < weights.numel(); ++i)
        weights[i] = static_cast<T>(std::pow(1.0 - static_cast<double>(day.conf[i]), gamma));
    auto gathered = gather_channel(p_night, day.labels);
    auto logp = log_clamped(gathered, static_cast<T>(kLogEps));
    const T scale = T(-1) / static_cast<T>(int64_t(h) * w);
    return weighted_sum(logp, std::move(weights), scale);
}

template <typename T>
NodePtr<T> loss_focal_ssl(const NodePtr<T>& p_day, const NodePtr<T>& p_night, double gamma) {
    return loss_focal_ssl(p_day->value, p_night, gamma);
}

}  // namespace nightseg
