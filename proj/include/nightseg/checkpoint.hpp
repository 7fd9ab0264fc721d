#pragma once

#include <string>

#include "nightseg/config.hpp"
#include "nightseg/nn.hpp"
#include "nightseg/optim.hpp"

namespace nightseg {

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};
struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& m) : std::runtime_error(m) {}
};

// The four networks plus their parameter registry.
struct Models {
    RelightNet<float> relight;
    SegNet<float> seg;
    Discriminator<float> disc_day;
    Discriminator<float> disc_night;

    static Models create(const Config& cfg);

    std::vector<NamedParam<float>> generator_params() const;      // relight + seg
    std::vector<NamedParam<float>> discriminator_params() const;  // both discriminators
    std::vector<NamedParam<float>> all_params() const;
};

// Checkpoint directory layout: params.bin (named float32 arrays,
// little-endian, shape-prefixed) + manifest.json {format_version,
// iteration, adam_t, config_digest, compat_digest, checksum}.
void save_checkpoint(const std::string& dir, const Models& models,
                     const SgdMomentum<float>& gen_opt, const Adam<float>& disc_opt,
                     int64_t iteration, const Config& cfg);

struct CheckpointInfo {
    int64_t iteration = 0;
};

// Validates the container checksum, array shapes, then the compatibility
// digest (the latter can be overridden with allow_config_mismatch).
CheckpointInfo load_checkpoint(const std::string& dir, Models& models, SgdMomentum<float>* gen_opt,
                               Adam<float>* disc_opt, const Config& cfg,
                               bool allow_config_mismatch = false);

}  // namespace nightseg
