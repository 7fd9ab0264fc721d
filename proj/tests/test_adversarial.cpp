#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nightseg/adversarial.hpp"
#include "nightseg/gradcheck.hpp"

using namespace nightseg;

namespace {

NodePtr<double> const_map(double v, int h = 4, int w = 4) {
    return constant(Tensor<double>({1, h, w}, v));
}

}  // namespace

TEST_CASE("discriminator output shape is input/16 with one channel") {
    Discriminator<double> d(8, 3, "disc");
    auto p = constant(Tensor<double>({8, 96, 96}, 0.125));
    auto out = disc_forward(d, p);
    CHECK(out->value.shape == std::vector<int>{1, 6, 6});

    auto p2 = constant(Tensor<double>({8, 32, 32}, 0.125));
    CHECK(disc_forward(d, p2)->value.shape == std::vector<int>{1, 2, 2});
}

TEST_CASE("zero-weight discriminator maps everything to zero") {
    Discriminator<double> d(4, 3, "disc");
    for (auto& p : d.params("d")) std::fill(p.node->value.data.begin(), p.node->value.data.end(), 0.0);
    auto out = disc_forward(d, constant(Tensor<double>({4, 16, 16}, 0.25)));
    for (auto v : out->value.data) CHECK(v == 0.0);
}

TEST_CASE("hand-set one-layer discriminator on a 2x2 input") {
    // single k=4 s=2 p=1 layer: one output tap over the padded 2x2 input
    auto x = constant(Tensor<double>({1, 2, 2}));
    x->value.data = {1.0, 2.0, 3.0, 4.0};
    auto w = parameter(Tensor<double>({1, 1, 4, 4}, 0.0));
    // taps (ky,kx) land on input (ky-1, kx-1); set distinct weights there
    w->value.data[size_t(1 * 4 + 1)] = 0.5;   // hits x(0,0)
    w->value.data[size_t(1 * 4 + 2)] = -1.0;  // hits x(0,1)
    w->value.data[size_t(2 * 4 + 1)] = 2.0;   // hits x(1,0)
    w->value.data[size_t(2 * 4 + 2)] = 0.25;  // hits x(1,1)
    auto b = parameter(Tensor<double>({1}, 0.125));
    auto out = conv2d(x, w, b, 2, 1);
    CHECK(out->value.numel() == 1);
    CHECK(out->value[0] == doctest::Approx(0.5 * 1 - 1 * 2 + 2 * 3 + 0.25 * 4 + 0.125));
}

TEST_CASE("generator adversarial loss on constant maps") {
    CHECK(loss_adv_gen(const_map(1.0), const_map(1.0))->value[0] == doctest::Approx(0.0));
    CHECK(loss_adv_gen(const_map(0.0), const_map(0.0))->value[0] == doctest::Approx(2.0));
    CHECK(loss_adv_gen(const_map(0.5), const_map(0.5))->value[0] == doctest::Approx(0.5));
}

TEST_CASE("discriminator loss on constant maps") {
    // perfect discrimination: real maps at 1, fake maps at 0
    CHECK(loss_disc(const_map(1.0), const_map(1.0), const_map(0.0), const_map(0.0))->value[0] ==
          doctest::Approx(0.0));
    CHECK(loss_disc(const_map(1.0), const_map(1.0), const_map(1.0), const_map(1.0))->value[0] ==
          doctest::Approx(2.0));
    CHECK(loss_disc(const_map(0.5), const_map(0.5), const_map(0.5), const_map(0.5))->value[0] ==
          doctest::Approx(1.0));
}

TEST_CASE("adversarial loss vanishes only at all-ones maps") {
    Rng rng = Rng::stream(4, "adv");
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<double> t({1, 3, 3});
        bool all_ones = true;
        for (auto& v : t.data) {
            v = rng.uniform(-0.5, 1.5);
            if (v != 1.0) all_ones = false;
        }
        double l = loss_adv_gen(constant(t), const_map(1.0, 3, 3))->value[0];
        if (!all_ones) CHECK(l > 0.0);
    }
    CHECK(loss_adv_gen(const_map(1.0, 3, 3), const_map(1.0, 3, 3))->value[0] == 0.0);
}

TEST_CASE("adversarial losses pass 64-bit finite-difference checks") {
    GradCheckOptions opt;
    opt.seeds = 5;
    for (const char* name : {"adv_gen", "disc"}) {
        opt.only = name;
        auto results = run_gradchecks(opt);
        REQUIRE(results.size() == 1);
        INFO(results[0].name, " max rel err ", results[0].max_rel_err);
        CHECK(results[0].pass);
    }
}

TEST_CASE("gradcheck harness reports an injected corruption") {
    GradCheckOptions opt;
    opt.seeds = 1;
    opt.only = "disc";
    opt.corrupt = true;
    auto results = run_gradchecks(opt);
    REQUIRE(results.size() == 1);
    CHECK_FALSE(results[0].pass);
}
