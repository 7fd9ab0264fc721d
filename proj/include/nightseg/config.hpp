#pragma once

#include <string>
#include <vector>

#include "nightseg/mixing.hpp"

namespace nightseg {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

enum class TrainMode { Baseline, M2F, F2M, BiMix };

std::string to_string(TrainMode m);
TrainMode mode_from_string(const std::string& s);

// Flat training configuration. File format is one `key = value` per line
// with '#' comments; CLI flags override file values.
struct Config {
    // loss weights
    double mu1 = 0.001;  // mixed cross-entropy (Trans2Seg)
    double mu2 = 0.001;  // consistency (Seg2Trans)
    double mu3 = 1.0;    // focal self-supervision
    double alpha_tv = 10.0;
    double alpha_exp = 1.0;
    double alpha_ssim = 1.0;
    double gamma = 1.0;  // focal exponent
    int pool_k = 32;

    // optimization
    double base_lr = 2.5e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-8;
    double disc_lr = 1e-4;
    double poly_power = 0.9;
    int batch_size = 2;
    int max_iters = 3000;      // adaptation steps
    int pretrain_iters = 1500;

    // problem setup
    TrainMode mode = TrainMode::BiMix;
    bool relight_enabled = true;
    uint64_t seed = 0;
    int image_size = 96;
    int num_classes = 8;
    std::vector<int> dynamic_classes = {4, 5};  // car, person

    // bookkeeping
    int eval_every = 500;

    ClassSet dynamic_set() const { return ClassSet(dynamic_classes); }

    // Canonical `key = value` serialization (sorted keys); basis of the
    // config digest.
    std::string canonical_text() const;
    std::string digest() const;
    // Digest over the fields a checkpoint must agree on to be loadable:
    // image size, class count, dynamic set, relighting on/off, and the
    // network architecture revision.
    std::string compat_digest() const;

    void set(const std::string& key, const std::string& value);
    static Config from_file(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace nightseg
