#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "nightseg/imgcore.hpp"
#include "nightseg/rng.hpp"
#include "nightseg/tensor.hpp"

namespace nightseg {

struct EmptyClassesError : std::runtime_error {
    explicit EmptyClassesError(const std::string& m) : std::runtime_error(m) {}
};

// Small set of class ids, kept sorted for reproducible iteration.
struct ClassSet {
    std::vector<int> ids;

    ClassSet() = default;
    ClassSet(std::initializer_list<int> l) : ids(l) { normalize(); }
    explicit ClassSet(std::vector<int> v) : ids(std::move(v)) { normalize(); }

    bool contains(int c) const { return std::binary_search(ids.begin(), ids.end(), c); }
    size_t size() const { return ids.size(); }
    void normalize() {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    }
};

inline std::vector<int> classes_present(const LabelMap& y) {
    std::set<int> s;
    for (auto v : y.data)
        if (v != kIgnoreId) s.insert(int(v));
    return {s.begin(), s.end()};
}

// Draw ceil(n/2) of the classes present in y, uniformly without replacement.
inline ClassSet sample_half_classes(const LabelMap& y, Rng& rng) {
    std::vector<int> present = classes_present(y);
    if (present.empty()) throw EmptyClassesError("sample_half_classes: label map is all-ignore");
    const size_t take = (present.size() + 1) / 2;
    // partial Fisher-Yates over the sorted class list
    for (size_t i = 0; i < take; ++i) {
        size_t j = i + static_cast<size_t>(rng.below(present.size() - i));
        std::swap(present[i], present[j]);
    }
    present.resize(take);
    return ClassSet(std::move(present));
}

inline BinaryMask mask_from_classes(const LabelMap& y, const ClassSet& cs) {
    BinaryMask m(y.shape);
    for (int64_t i = 0; i < y.numel(); ++i) {
        uint8_t v = y[i];
        m[i] = (v != kIgnoreId && cs.contains(int(v))) ? 1 : 0;
    }
    return m;
}

// Mask of pixels whose (detached) day prediction falls in the dynamic set.
template <typename T>
BinaryMask dynamic_mask(const ConfidenceMap<T>& day_pred, const ClassSet& dynamic) {
    BinaryMask m(day_pred.labels.shape);
    for (int64_t i = 0; i < m.numel(); ++i) m[i] = dynamic.contains(int(day_pred.labels[i])) ? 1 : 0;
    return m;
}

template <typename T>
Image<T> mix_images(const Image<T>& a, const Image<T>& b, const BinaryMask& m) {
    if (!a.same_shape(b)) throw DimensionError("mix_images: image shape mismatch");
    require(a.shape.size() == 3, "mix_images: expected [C,H,W]");
    if (m.shape[0] != a.shape[1] || m.shape[1] != a.shape[2])
        throw DimensionError("mix_images: mask shape mismatch");
    Image<T> out(a.shape);
    const int c = a.shape[0], h = a.shape[1], w = a.shape[2];
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(ch, y, x) = m.at(y, x) ? a.at(ch, y, x) : b.at(ch, y, x);
    return out;
}

// Mixed label: ground truth under the mask, argmax pseudo-label elsewhere.
// The pseudo-label side is a plain value, so it never carries gradient.
template <typename T>
LabelMap mix_labels(const LabelMap& y_s, const ProbMap<T>& p_n, const BinaryMask& m) {
    if (y_s.shape[0] != p_n.shape[1] || y_s.shape[1] != p_n.shape[2] || !y_s.same_shape(m))
        throw DimensionError("mix_labels: shape mismatch");
    ConfidenceMap<T> pseudo = argmax_confidence(p_n);
    LabelMap out(y_s.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = m[i] ? y_s[i] : pseudo.labels[i];
    return out;
}

}  // namespace nightseg
