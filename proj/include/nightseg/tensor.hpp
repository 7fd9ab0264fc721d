#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace nightseg {

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& m) : std::runtime_error(m) {}
};
struct LabelError : std::runtime_error {
    explicit LabelError(const std::string& m) : std::runtime_error(m) {}
};

// Dense row-major tensor. Images are [3,H,W], probability maps [C,H,W],
// label maps and masks [H,W].
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), T{}) {}
    Tensor(std::vector<int> s, T fill) : shape(std::move(s)), data(count(shape), fill) {}

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, T v) { return Tensor(std::move(s), v); }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw DimensionError("negative dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // [C,H,W] indexing
    T& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    const T& at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    // [H,W] indexing
    T& at(int y, int x) { return data[static_cast<size_t>(y) * shape[1] + x]; }
    const T& at(int y, int x) const { return data[static_cast<size_t>(y) * shape[1] + x]; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

inline void require(bool cond, const char* what) {
    if (!cond) throw DimensionError(what);
}

// Conventions shared across modules.
template <typename T>
using Image = Tensor<T>;  // [3,H,W], values nominally in [0,1]

using LabelMap = Tensor<uint8_t>;    // [H,W], class ids in [0,C) or 255
using BinaryMask = Tensor<uint8_t>;  // [H,W], values {0,1}

template <typename T>
using ProbMap = Tensor<T>;  // [C,H,W], per-pixel channel sum 1

inline constexpr uint8_t kIgnoreId = 255;

template <typename T>
struct ConfidenceMap {
    LabelMap labels;   // argmax class per pixel
    Tensor<T> conf;    // probability of that class
};

template <typename T>
int image_height(const Tensor<T>& t) {
    return t.shape.size() == 3 ? t.shape[1] : t.shape[0];
}
template <typename T>
int image_width(const Tensor<T>& t) {
    return t.shape.size() == 3 ? t.shape[2] : t.shape[1];
}

}  // namespace nightseg
