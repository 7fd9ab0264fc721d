#pragma once

#include <cmath>
#include <vector>

#include "nightseg/nn.hpp"

namespace nightseg {

// SGD with momentum and decoupled-from-nothing classic weight decay:
// v = mu*v + (g + wd*theta); theta -= lr*v.
template <typename T>
struct SgdMomentum {
    std::vector<NodePtr<T>> params;
    std::vector<Tensor<T>> velocity;
    T momentum{};
    T weight_decay{};

    SgdMomentum() = default;
    SgdMomentum(std::vector<NodePtr<T>> p, T mom, T wd)
        : params(std::move(p)), momentum(mom), weight_decay(wd) {
        for (const auto& pr : params) velocity.emplace_back(pr->value.shape);
    }

    void zero_grad() {
        for (auto& p : params) {
            p->ensure_grad();
            p->zero_grad();
        }
    }

    void step(T lr) {
        for (size_t k = 0; k < params.size(); ++k) {
            auto& p = *params[k];
            auto& v = velocity[k];
            for (int64_t i = 0; i < p.value.numel(); ++i) {
                T g = p.grad[i] + weight_decay * p.value[i];
                v[i] = momentum * v[i] + g;
                p.value[i] -= lr * v[i];
            }
        }
    }
};

template <typename T>
struct Adam {
    std::vector<NodePtr<T>> params;
    std::vector<Tensor<T>> m, v;
    T beta1{}, beta2{}, eps{};
    int64_t t = 0;

    Adam() = default;
    Adam(std::vector<NodePtr<T>> p, T b1, T b2, T eps_)
        : params(std::move(p)), beta1(b1), beta2(b2), eps(eps_) {
        for (const auto& pr : params) {
            m.emplace_back(pr->value.shape);
            v.emplace_back(pr->value.shape);
        }
    }

    void zero_grad() {
        for (auto& p : params) {
            p->ensure_grad();
            p->zero_grad();
        }
    }

    void step(T lr) {
        ++t;
        const T bc1 = T(1) - static_cast<T>(std::pow(double(beta1), double(t)));
        const T bc2 = T(1) - static_cast<T>(std::pow(double(beta2), double(t)));
        for (size_t k = 0; k < params.size(); ++k) {
            auto& p = *params[k];
            for (int64_t i = 0; i < p.value.numel(); ++i) {
                T g = p.grad[i];
                m[k][i] = beta1 * m[k][i] + (T(1) - beta1) * g;
                v[k][i] = beta2 * v[k][i] + (T(1) - beta2) * g * g;
                T mh = m[k][i] / bc1;
                T vh = v[k][i] / bc2;
                p.value[i] -= lr * mh / (std::sqrt(vh) + eps);
            }
        }
    }
};

}  // namespace nightseg
