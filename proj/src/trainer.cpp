#include "nightseg/trainer.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "nightseg/adversarial.hpp"
#include "nightseg/enhancement.hpp"
#include "nightseg/segmentation.hpp"

using nlohmann::json;

namespace nightseg {

double poly_lr(int64_t iter, double base, int64_t max_iters, double power) {
    if (iter < 0 || iter > max_iters) throw RangeError("poly_lr: iteration outside [0, max_iters]");
    return base * std::pow(1.0 - double(iter) / double(max_iters), power);
}

std::string StepReport::to_json_line() const {
    json j;
    j["iter"] = iter;
    j["lr"] = lr;
    j["l_enhance"] = l_enhance;
    j["l_tv"] = l_tv;
    j["l_exp"] = l_exp;
    j["l_ssim"] = l_ssim;
    j["l_M"] = l_M;
    j["l_adv"] = l_adv;
    j["l_D"] = l_D;
    j["l_f2m"] = l_f2m;
    j["l_m2f"] = l_m2f;
    j["l_ssl"] = l_ssl;
    j["total"] = total;
    return j.dump();
}

double total_objective(const StepReport& r, const Config& cfg) {
    return r.l_enhance + r.l_M + r.l_D + r.l_adv + cfg.mu1 * r.l_f2m + cfg.mu2 * r.l_m2f +
           cfg.mu3 * r.l_ssl;
}

TrainState::TrainState(const Config& c)
    : cfg(c),
      models(Models::create(c)),
      gen_opt(
          [&] {
              std::vector<NodePtr<float>> ps;
              for (auto& p : models.generator_params()) ps.push_back(p.node);
              return ps;
          }(),
          float(c.momentum), float(c.weight_decay)),
      disc_opt(
          [&] {
              std::vector<NodePtr<float>> ps;
              for (auto& p : models.discriminator_params()) ps.push_back(p.node);
              return ps;
          }(),
          float(c.adam_beta1), float(c.adam_beta2), float(c.adam_eps)) {}

namespace {

double value_of(const NodePtr<float>& n) { return n ? double(n->value[0]) : 0.0; }

NodePtr<float> weighted_accum(NodePtr<float> acc, const NodePtr<float>& term, double w) {
    if (!term || w == 0.0) return acc;
    auto scaled = mul_scalar(term, float(w));
    return acc ? add(acc, scaled) : scaled;
}

}  // namespace

StepReport train_step(TrainState& st, const std::vector<BatchSample>& batch, int64_t iter,
                      StepTrace* trace) {
    const Config& cfg = st.cfg;
    if (batch.empty()) throw DataError("train_step: empty batch");
    for (const auto& s : batch)
        if (!s.source || !s.source_label || !s.day || !s.night)
            throw PairingError("train_step: every sample needs source, label and a day/night pair");
    if (iter >= cfg.max_iters) throw RangeError("train_step: iteration past max_iters");

    const bool f2m_active =
        (cfg.mode == TrainMode::F2M || cfg.mode == TrainMode::BiMix) && cfg.mu1 > 0.0;
    const bool m2f_active = (cfg.mode == TrainMode::M2F || cfg.mode == TrainMode::BiMix) &&
                            cfg.mu2 > 0.0 && cfg.relight_enabled;
    const float inv_b = 1.0f / float(batch.size());

    StepReport rep;
    rep.iter = iter;
    rep.lr = poly_lr(iter, cfg.base_lr, cfg.max_iters, cfg.poly_power);
    const double disc_lr = poly_lr(iter, cfg.disc_lr, cfg.max_iters, cfg.poly_power);

    // detached prediction values for the discriminator pass
    std::vector<Tensor<float>> ps_vals, pd_vals, pn_vals;

    st.gen_opt.zero_grad();
    for (size_t j = 0; j < batch.size(); ++j) {
        const BatchSample& s = batch[j];
        auto i_s = constant(*s.source);
        auto i_d = constant(*s.day);
        auto i_n = constant(*s.night);

        NodePtr<float> en_s, en_d, en_n;
        Enhanced<float> e_s, e_d, e_n;
        EnhancementLoss<float> enh;
        if (cfg.relight_enabled) {
            e_s = enhance(st.models.relight, i_s);
            e_d = enhance(st.models.relight, i_d);
            e_n = enhance(st.models.relight, i_n);
            enh = loss_enhance_from<float>({{i_s, e_s}, {i_d, e_d}, {i_n, e_n}},
                                           {cfg.alpha_tv, cfg.alpha_exp, cfg.alpha_ssim},
                                           cfg.pool_k);
            en_s = e_s.en;
            en_d = e_d.en;
            en_n = e_n.en;
        } else {
            en_s = i_s;
            en_d = i_d;
            en_n = i_n;
        }

        auto p_s = st.models.seg(en_s);
        auto p_d = st.models.seg(en_d);
        auto p_n = st.models.seg(en_n);
        ps_vals.push_back(p_s->value);
        pd_vals.push_back(p_d->value);
        pn_vals.push_back(p_n->value);

        auto l_m = loss_ce(p_s, *s.source_label);
        auto l_ssl = loss_focal_ssl(p_d->value, p_n, cfg.gamma);
        auto dd_day = st.models.disc_day(p_d);
        auto dn_night = st.models.disc_night(p_n);
        auto l_adv = loss_adv_gen(dd_day, dn_night);

        // Trans2Seg: class-guided mix of raw source and night images
        NodePtr<float> l_f2m;
        BinaryMask mix_mask;
        Image<float> i_mix_val;
        LabelMap y_m;
        NodePtr<float> en_mix;
        if (f2m_active) {
            Rng cm_rng = Rng::stream(cfg.seed, "classmix", uint64_t(iter), uint64_t(j));
            auto cs = sample_half_classes(*s.source_label, cm_rng);
            mix_mask = mask_from_classes(*s.source_label, cs);
            i_mix_val = mix_images(*s.source, *s.night, mix_mask);
            auto i_mix = constant(i_mix_val);
            en_mix = cfg.relight_enabled ? enhance(st.models.relight, i_mix).en : i_mix;
            auto p_m = st.models.seg(en_mix);
            y_m = mix_labels(*s.source_label, p_n->value, mix_mask);
            l_f2m = loss_mixed_ce(p_m, y_m);
            if (trace && j == 0) {
                trace->has_f2m = true;
                trace->mix_mask = mix_mask;
                trace->i_mix = i_mix_val;
                trace->en_mix = en_mix->value;
                trace->p_m = p_m->value;
                trace->y_m = y_m;
            }
        }

        // Seg2Trans: dynamic-object mix of raw day and night images,
        // guided by the detached day prediction
        NodePtr<float> l_m2f;
        if (m2f_active) {
            auto day_conf = argmax_confidence(p_d->value);
            BinaryMask dmask = dynamic_mask(day_conf, cfg.dynamic_set());
            Image<float> i_mix2_val = mix_images(*s.day, *s.night, dmask);
            auto i_mix2 = constant(i_mix2_val);
            auto re_mix2 = relight(st.models.relight, i_mix2);
            l_m2f = loss_consistency(re_mix2, e_d.re);
            if (trace && j == 0) {
                trace->has_m2f = true;
                trace->dyn_mask = dmask;
                trace->i_mix2 = i_mix2_val;
                trace->re_mix2 = re_mix2->value;
            }
        }

        NodePtr<float> total;
        total = weighted_accum(total, enh.total, 1.0);
        total = weighted_accum(total, l_m, 1.0);
        total = weighted_accum(total, l_adv, 1.0);
        total = weighted_accum(total, l_f2m, cfg.mu1);
        total = weighted_accum(total, l_m2f, cfg.mu2);
        total = weighted_accum(total, l_ssl, cfg.mu3);
        backward(total, inv_b);

        if (cfg.relight_enabled) {
            rep.l_tv += value_of(enh.tv) * inv_b;
            rep.l_exp += value_of(enh.exp) * inv_b;
            rep.l_ssim += value_of(enh.ssim) * inv_b;
            rep.l_enhance += value_of(enh.total) * inv_b;
        }
        rep.l_M += value_of(l_m) * inv_b;
        rep.l_adv += value_of(l_adv) * inv_b;
        rep.l_ssl += value_of(l_ssl) * inv_b;
        rep.l_f2m += value_of(l_f2m) * inv_b;
        rep.l_m2f += value_of(l_m2f) * inv_b;

        if (trace && j == 0) {
            trace->i_s = *s.source;
            trace->i_d = *s.day;
            trace->i_n = *s.night;
            trace->y_s = *s.source_label;
            if (cfg.relight_enabled) {
                trace->re_s = e_s.re->value;
                trace->re_d = e_d.re->value;
                trace->re_n = e_n.re->value;
            }
            trace->en_s = en_s->value;
            trace->en_d = en_d->value;
            trace->en_n = en_n->value;
            trace->p_s = p_s->value;
            trace->p_d = p_d->value;
            trace->p_n = p_n->value;
            trace->dd_day = dd_day->value;
            trace->dn_night = dn_night->value;
        }
    }
    st.gen_opt.step(float(rep.lr));

    // Discriminator pass on detached predictions: source is real for both
    // discriminators, day/night are fake.
    st.disc_opt.zero_grad();
    for (size_t j = 0; j < batch.size(); ++j) {
        auto dd_s = st.models.disc_day(constant(ps_vals[j]));
        auto dn_s = st.models.disc_night(constant(ps_vals[j]));
        auto dd_d = st.models.disc_day(constant(pd_vals[j]));
        auto dn_n = st.models.disc_night(constant(pn_vals[j]));
        auto l_d = loss_disc(dd_s, dn_s, dd_d, dn_n);
        backward(l_d, inv_b);
        rep.l_D += value_of(l_d) * inv_b;
        if (trace && j == 0) {
            trace->dd_src = dd_s->value;
            trace->dn_src = dn_s->value;
            trace->dd_fake_d = dd_d->value;
            trace->dn_fake_n = dn_n->value;
        }
    }
    st.disc_opt.step(float(disc_lr));

    rep.total = total_objective(rep, cfg);
    return rep;
}

int cycled_index(int64_t pos, int n, uint64_t seed, const std::string& name) {
    require(n > 0, "cycled_index: empty dataset");
    int64_t epoch = pos / n;
    // Deterministic per-epoch permutation so both sets cycle independently.
    std::vector<int> perm(static_cast<size_t>(n), 0);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = Rng::stream(seed, "order/" + name, uint64_t(epoch));
    rng.shuffle(perm);
    return perm[size_t(pos % n)];
}

std::vector<BatchSample> assemble_batch(const Dataset& data, const Config& cfg, int64_t iter) {
    if (data.day_images.size() != data.night_images.size())
        throw PairingError("assemble_batch: day/night splits differ in size");
    std::vector<BatchSample> batch(size_t(cfg.batch_size));
    for (int j = 0; j < cfg.batch_size; ++j) {
        int64_t pos = iter * cfg.batch_size + j;
        int si = cycled_index(pos, int(data.source_images.size()), cfg.seed, "source");
        int ti = cycled_index(pos, int(data.day_images.size()), cfg.seed, "target");
        batch[size_t(j)] = {&data.source_images[size_t(si)], &data.source_labels[size_t(si)],
                            &data.day_images[size_t(ti)], &data.night_images[size_t(ti)]};
    }
    return batch;
}

void pretrain(TrainState& st, const Dataset& data,
              const std::function<void(const StepReport&)>& on_step) {
    if (data.source_images.empty()) throw DataError("pretrain: empty source dataset");
    const Config& cfg = st.cfg;
    const float inv_b = 1.0f / float(cfg.batch_size);
    for (int64_t iter = 0; iter < cfg.pretrain_iters; ++iter) {
        StepReport rep;
        rep.iter = iter;
        rep.lr = poly_lr(iter, cfg.base_lr, cfg.pretrain_iters, cfg.poly_power);
        st.gen_opt.zero_grad();
        for (int j = 0; j < cfg.batch_size; ++j) {
            int64_t pos = iter * cfg.batch_size + j;
            int si = cycled_index(pos, int(data.source_images.size()), cfg.seed, "source");
            auto p = st.models.seg(constant(data.source_images[size_t(si)]));
            auto l = loss_ce(p, data.source_labels[size_t(si)]);
            backward(l, inv_b);
            rep.l_M += value_of(l) * inv_b;
        }
        st.gen_opt.step(float(rep.lr));
        rep.total = rep.l_M;
        if (on_step) on_step(rep);
    }
}

void adapt(TrainState& st, const Dataset& data, int64_t start_iter, const AdaptHooks& hooks) {
    const Config& cfg = st.cfg;
    if (data.day_images.empty()) throw DataError("adapt: no day/night pairs");
    for (int64_t iter = start_iter; iter < cfg.max_iters; ++iter) {
        auto batch = assemble_batch(data, cfg, iter);
        StepReport rep = train_step(st, batch, iter);
        if (hooks.on_step) hooks.on_step(rep);
        bool boundary = cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0;
        bool last = iter + 1 == cfg.max_iters;
        if (boundary || last) {
            if (hooks.on_eval && !data.test_images.empty()) {
                auto cm = evaluate_night_test(st.models, cfg, data);
                hooks.on_eval(iter + 1, cm.miou());
            }
            if (hooks.on_checkpoint) hooks.on_checkpoint(iter + 1);
        }
    }
}

LabelMap predict(const Models& models, const Config& cfg, const Image<float>& image) {
    auto x = constant(image);
    NodePtr<float> input = cfg.relight_enabled ? enhance(models.relight, x).en : x;
    auto p = models.seg(input);
    return argmax_confidence(p->value).labels;
}

ConfusionMatrix evaluate_night_test(const Models& models, const Config& cfg, const Dataset& data) {
    ConfusionMatrix cm(cfg.num_classes);
    for (size_t i = 0; i < data.test_images.size(); ++i)
        cm.accumulate(predict(models, cfg, data.test_images[i]), data.test_labels[i]);
    return cm;
}

}  // namespace nightseg
