#pragma once

#include <functional>
#include <optional>

#include "nightseg/checkpoint.hpp"
#include "nightseg/eval.hpp"
#include "nightseg/synthdata.hpp"

namespace nightseg {

struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& m) : std::runtime_error(m) {}
};
struct PairingError : std::runtime_error {
    explicit PairingError(const std::string& m) : std::runtime_error(m) {}
};

// base * (1 - iter/max_iters)^power
double poly_lr(int64_t iter, double base, int64_t max_iters, double power = 0.9);

struct StepReport {
    int64_t iter = 0;
    double lr = 0;
    double l_enhance = 0, l_tv = 0, l_exp = 0, l_ssim = 0;
    double l_M = 0, l_adv = 0, l_D = 0;
    double l_f2m = 0, l_m2f = 0, l_ssl = 0;
    double total = 0;

    std::string to_json_line() const;
};

// Recombination of the weighted components; the trainer's reported total
// is computed exactly this way.
double total_objective(const StepReport& r, const Config& cfg);

struct BatchSample {
    const Image<float>* source = nullptr;
    const LabelMap* source_label = nullptr;
    const Image<float>* day = nullptr;
    const Image<float>* night = nullptr;
};

// Intermediate tensors of the first batch sample, captured on request so
// tests can recompute every loss equation independently.
struct StepTrace {
    Image<float> i_s, i_d, i_n;
    LabelMap y_s;
    Image<float> re_s, re_d, re_n, en_s, en_d, en_n;
    Tensor<float> p_s, p_d, p_n;
    bool has_f2m = false;
    BinaryMask mix_mask;
    Image<float> i_mix;
    Image<float> en_mix;
    Tensor<float> p_m;
    LabelMap y_m;
    bool has_m2f = false;
    BinaryMask dyn_mask;
    Image<float> i_mix2;
    Image<float> re_mix2;
    Tensor<float> dd_day, dn_night;                    // generator-side realism maps
    Tensor<float> dd_src, dn_src, dd_fake_d, dn_fake_n;  // discriminator-side maps
};

struct TrainState {
    Config cfg;
    Models models;
    SgdMomentum<float> gen_opt;
    Adam<float> disc_opt;

    explicit TrainState(const Config& c);
};

// One adaptation iteration: generator forward/backward + SGD step, then a
// discriminator pass on detached predictions + Adam step. `iter` keys the
// per-step rng substreams and the poly schedule.
StepReport train_step(TrainState& st, const std::vector<BatchSample>& batch, int64_t iter,
                      StepTrace* trace = nullptr);

// Source-only supervised phase (cross-entropy on raw source images; the
// relighting net stays out of the graph).
void pretrain(TrainState& st, const Dataset& data,
              const std::function<void(const StepReport&)>& on_step = {});

struct AdaptHooks {
    std::function<void(const StepReport&)> on_step;
    std::function<void(int64_t, const ConfusionMatrix::MiouResult&)> on_eval;
    std::function<void(int64_t)> on_checkpoint;  // called when a snapshot should be persisted
};

// Runs train_step from start_iter to cfg.max_iters with deterministic
// epoch-shuffled cycling over both datasets.
void adapt(TrainState& st, const Dataset& data, int64_t start_iter, const AdaptHooks& hooks = {});

LabelMap predict(const Models& models, const Config& cfg, const Image<float>& image);
ConfusionMatrix evaluate_night_test(const Models& models, const Config& cfg, const Dataset& data);

// Deterministic epoch-shuffled cycling: position -> dataset index.
int cycled_index(int64_t pos, int n, uint64_t seed, const std::string& name);

std::vector<BatchSample> assemble_batch(const Dataset& data, const Config& cfg, int64_t iter);

}  // namespace nightseg
