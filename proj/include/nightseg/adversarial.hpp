#pragma once

#include "nightseg/nn.hpp"

namespace nightseg {

// Least-squares adversarial objectives over segmentation outputs.
// Reductions are per-map means so loss magnitudes do not depend on the
// realism-map resolution.

template <typename T>
NodePtr<T> disc_forward(const Discriminator<T>& d, const NodePtr<T>& prob) {
    return d(prob);
}

template <typename T>
NodePtr<T> lsgan_to_one(const NodePtr<T>& map) {
    return mean(square(add_scalar(map, T(-1))));
}

template <typename T>
NodePtr<T> lsgan_to_zero(const NodePtr<T>& map) {
    return mean(square(map));
}

// Generator side: both target-domain predictions should look real.
template <typename T>
NodePtr<T> loss_adv_gen(const NodePtr<T>& dd_day, const NodePtr<T>& dn_night) {
    return add(lsgan_to_one(dd_day), lsgan_to_one(dn_night));
}

// Discriminator side: the source prediction is real for both
// discriminators, the day/night predictions are fake. Callers must pass
// maps computed from detached ProbMaps.
template <typename T>
NodePtr<T> loss_disc(const NodePtr<T>& dd_src, const NodePtr<T>& dn_src, const NodePtr<T>& dd_day,
                     const NodePtr<T>& dn_night) {
    return add(add(lsgan_to_one(dd_src), lsgan_to_one(dn_src)),
               add(lsgan_to_zero(dd_day), lsgan_to_zero(dn_night)));
}

}  // namespace nightseg
