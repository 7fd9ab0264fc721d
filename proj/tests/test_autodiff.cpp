#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "nightseg/autodiff.hpp"
#include "nightseg/conv.hpp"
#include "nightseg/nn.hpp"
#include "nightseg/rng.hpp"

using namespace nightseg;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1, double hi = 1) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Central finite differences on every element of `param` against the
// autodiff gradient of the scalar produced by `build`.
double max_rel_err(const NodePtr<double>& param,
                   const std::function<NodePtr<double>()>& build, double h = 1e-6) {
    auto loss = build();
    std::fill(param->grad.data.begin(), param->grad.data.end(), 0.0);
    backward(loss);
    double worst = 0;
    for (int64_t i = 0; i < param->value.numel(); ++i) {
        double keep = param->value[i];
        param->value[i] = keep + h;
        double up = build()->value[0];
        param->value[i] = keep - h;
        double dn = build()->value[0];
        param->value[i] = keep;
        double fd = (up - dn) / (2 * h);
        double ad = param->grad[i];
        double denom = std::max({std::abs(fd), std::abs(ad), 1e-8});
        worst = std::max(worst, std::abs(fd - ad) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
    Rng rng = Rng::stream(1, "fd-elem");
    auto x = parameter(random_tensor({2, 4, 4}, rng, 0.2, 1.0));
    auto y = constant(random_tensor({2, 4, 4}, rng, 0.2, 1.0));

    CHECK(max_rel_err(x, [&] { return sum(mul(x, y)); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(div(y, x)); }) < 1e-5);
    CHECK(max_rel_err(x, [&] { return sum(square(sub(x, y))); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(abs_val(sub(x, y))); }) < 1e-5);
    CHECK(max_rel_err(x, [&] { return sum(relu(add_scalar(x, -0.55))); }) < 1e-4);
    CHECK(max_rel_err(x, [&] { return sum(log_clamped(x, 1e-8)); }) < 1e-5);
    CHECK(max_rel_err(x, [&] { return mean(sub_from_scalar(1.0, mul_scalar(x, 3.0))); }) < 1e-6);
}

TEST_CASE("softmax and gather match finite differences") {
    Rng rng = Rng::stream(2, "fd-soft");
    auto logits = parameter(random_tensor({4, 3, 3}, rng));
    LabelMap labels({3, 3});
    for (auto& v : labels.data) v = uint8_t(rng.below(4));
    labels.at(1, 1) = kIgnoreId;
    Tensor<double> w({3, 3}, 1.0);
    w.at(1, 1) = 0.0;

    CHECK(max_rel_err(logits, [&] {
              auto p = softmax_channels(logits);
              auto g = gather_channel(p, labels);
              return weighted_sum(log_clamped(g, 1e-8), w, -1.0 / 9);
          }) < 1e-5);
}

TEST_CASE("spatial ops match finite differences") {
    Rng rng = Rng::stream(3, "fd-sp");
    auto x = parameter(random_tensor({2, 8, 8}, rng));

    CHECK(max_rel_err(x, [&] { return sum(square(gradient_x(x))); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(square(gradient_y(x))); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(square(avg_pool_node(x, 2))); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(square(upsample_block(avg_pool_node(x, 4), 4))); }) <
          1e-6);
    CHECK(max_rel_err(x, [&] { return sum(square(pad_reflect(x, 5))); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(square(gauss_blur_node(x))); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(square(upsample_bilinear(x, 16, 16))); }) < 1e-6);
    CHECK(max_rel_err(x, [&] { return sum(square(upsample_bilinear(x, 5, 11))); }) < 1e-6);
}

TEST_CASE("conv2d forward matches a hand computation") {
    // 1 input channel, 2x2 input, k=2, stride 1, no padding
    auto x = constant(Tensor<double>({1, 2, 2}));
    x->value.data = {1, 2, 3, 4};
    auto w = parameter(Tensor<double>({1, 1, 2, 2}));
    w->value.data = {0.5, -1, 2, 0.25};
    auto b = parameter(Tensor<double>({1}));
    b->value.data = {0.125};
    auto out = conv2d(x, w, b, 1, 0);
    CHECK(out->value.numel() == 1);
    CHECK(out->value[0] == doctest::Approx(0.5 * 1 - 1 * 2 + 2 * 3 + 0.25 * 4 + 0.125));
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng = Rng::stream(4, "fd-conv");
    for (auto [stride, pad, k] : {std::tuple{1, 1, 3}, {2, 1, 3}, {2, 1, 4}, {1, 0, 1}}) {
        auto x = parameter(random_tensor({3, 8, 8}, rng));
        auto w = parameter(random_tensor({4, 3, k, k}, rng, -0.5, 0.5));
        auto b = parameter(random_tensor({4}, rng, -0.5, 0.5));
        auto build = [&] { return sum(square(conv2d(x, w, b, stride, pad))); };
        CHECK(max_rel_err(w, build) < 1e-5);
        CHECK(max_rel_err(x, build) < 1e-5);
        CHECK(max_rel_err(b, build) < 1e-5);
    }
}

TEST_CASE("conv_transpose2d shape and gradients") {
    Rng rng = Rng::stream(5, "fd-deconv");
    auto x = parameter(random_tensor({3, 4, 4}, rng));
    auto w = parameter(random_tensor({3, 2, 4, 4}, rng, -0.5, 0.5));
    auto b = parameter(random_tensor({2}, rng, -0.5, 0.5));
    auto out = conv_transpose2d(x, w, b, 2, 1);
    CHECK(out->value.shape == std::vector<int>{2, 8, 8});
    auto build = [&] { return sum(square(conv_transpose2d(x, w, b, 2, 1))); };
    CHECK(max_rel_err(w, build) < 1e-5);
    CHECK(max_rel_err(x, build) < 1e-5);
    CHECK(max_rel_err(b, build) < 1e-5);
}

TEST_CASE("transpose conv inverts conv shapes for the relight trunk") {
    Rng rng = Rng::stream(6, "shapes");
    RelightNet<double> net(7, "relight");
    auto x = constant(random_tensor({3, 16, 16}, rng, 0, 1));
    auto res = net(x);
    CHECK(res->value.shape == std::vector<int>{3, 16, 16});
    // zero-initialized final layer: residual is exactly zero
    for (auto v : res->value.data) CHECK(v == 0.0);
}

TEST_CASE("parameter gradients accumulate across backward calls") {
    Rng rng = Rng::stream(7, "accum");
    auto x = parameter(random_tensor({2, 2}, rng));
    auto l1 = sum(square(x));
    backward(l1);
    Tensor<double> g1 = x->grad;
    auto l2 = sum(square(x));
    backward(l2);
    for (int64_t i = 0; i < g1.numel(); ++i)
        CHECK(x->grad[i] == doctest::Approx(2 * g1[i]).epsilon(1e-12));
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng = Rng::stream(8, "detach");
    auto x = parameter(random_tensor({2, 2}, rng));
    auto y = mul(detach(x), x);
    backward(sum(y));
    for (int64_t i = 0; i < x.get()->value.numel(); ++i)
        CHECK(x->grad[i] == doctest::Approx(x->value[i]));  // only the live factor
}

TEST_CASE("backward seed scales gradients") {
    auto x = parameter(Tensor<double>({3}, 2.0));
    backward(sum(square(x)), 0.5);
    for (int64_t i = 0; i < 3; ++i) CHECK(x->grad[i] == doctest::Approx(2.0));
}
