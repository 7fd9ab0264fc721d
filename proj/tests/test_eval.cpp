#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "nightseg/eval.hpp"
#include "nightseg/rng.hpp"

using namespace nightseg;

TEST_CASE("accumulate counts matching pixels and skips ignored ground truth") {
    ConfusionMatrix cm(4);
    LabelMap pred({2, 5}, 2), gt({2, 5}, 2);
    cm.accumulate(pred, gt);
    CHECK(cm.at(2, 2) == 10);
    CHECK(cm.total() == 10);

    LabelMap ig({2, 5}, kIgnoreId);
    cm.accumulate(pred, ig);
    CHECK(cm.total() == 10);
}

TEST_CASE("row sums equal the ground-truth class histogram") {
    Rng rng = Rng::stream(1, "cm");
    const int C = 5;
    LabelMap pred({20, 20}), gt({20, 20});
    for (auto& v : pred.data) v = uint8_t(rng.below(C));
    for (auto& v : gt.data) {
        uint64_t r = rng.below(C + 1);
        v = r == C ? kIgnoreId : uint8_t(r);
    }
    ConfusionMatrix cm(C);
    cm.accumulate(pred, gt);
    std::vector<int64_t> hist(C, 0);
    for (auto v : gt.data)
        if (v != kIgnoreId) ++hist[v];
    for (int c = 0; c < C; ++c) {
        int64_t row = 0;
        for (int j = 0; j < C; ++j) row += cm.at(c, j);
        CHECK(row == hist[size_t(c)]);
    }
}

TEST_CASE("accumulate rejects shape mismatches") {
    ConfusionMatrix cm(3);
    LabelMap a({2, 2}), b({2, 3});
    CHECK_THROWS_AS(cm.accumulate(a, b), DimensionError);
}

TEST_CASE("perfect prediction scores one everywhere") {
    Rng rng = Rng::stream(2, "cm");
    LabelMap gt({10, 10});
    for (auto& v : gt.data) v = uint8_t(rng.below(4));
    ConfusionMatrix cm(4);
    cm.accumulate(gt, gt);
    auto r = cm.miou();
    CHECK(r.miou == doctest::Approx(1.0));
    for (auto v : r.per_class)
        if (v) CHECK(*v == doctest::Approx(1.0));
}

TEST_CASE("two-class toy matrix") {
    // prediction constant class 0, ground truth half 0 / half 1
    ConfusionMatrix cm(2);
    LabelMap pred({2, 4}, 0), gt({2, 4});
    for (int x = 0; x < 4; ++x) {
        gt.at(0, x) = 0;
        gt.at(1, x) = 1;
    }
    cm.accumulate(pred, gt);
    auto r = cm.miou();
    CHECK(*r.per_class[0] == doctest::Approx(0.5));
    CHECK(*r.per_class[1] == doctest::Approx(0.0));
    CHECK(r.miou == doctest::Approx(0.25));
}

TEST_CASE("disjoint prediction and ground truth score zero") {
    ConfusionMatrix cm(4);
    LabelMap pred({3, 3}, 2), gt({3, 3}, 3);
    cm.accumulate(pred, gt);
    auto r = cm.miou();
    CHECK(r.miou == doctest::Approx(0.0));
    CHECK(*r.per_class[2] == doctest::Approx(0.0));
    CHECK(*r.per_class[3] == doctest::Approx(0.0));
    CHECK_FALSE(r.per_class[0].has_value());  // absent classes excluded
    CHECK_FALSE(r.per_class[1].has_value());
}

TEST_CASE("batched accumulation equals single-pass and merge is commutative") {
    Rng rng = Rng::stream(3, "cm");
    const int C = 6;
    auto rand_map = [&](int n) {
        LabelMap m({n, n});
        for (auto& v : m.data) v = uint8_t(rng.below(C));
        return m;
    };
    ConfusionMatrix whole(C), part1(C), part2(C);
    auto p1 = rand_map(8), g1 = rand_map(8), p2 = rand_map(12), g2 = rand_map(12);
    whole.accumulate(p1, g1);
    whole.accumulate(p2, g2);
    part1.accumulate(p1, g1);
    part2.accumulate(p2, g2);
    ConfusionMatrix merged_a = part1;
    merged_a.merge(part2);
    ConfusionMatrix merged_b = part2;
    merged_b.merge(part1);
    for (int i = 0; i < C; ++i)
        for (int j = 0; j < C; ++j) {
            CHECK(merged_a.at(i, j) == whole.at(i, j));
            CHECK(merged_b.at(i, j) == whole.at(i, j));
        }
    CHECK(merged_a.miou().miou == whole.miou().miou);
}

TEST_CASE("miou is invariant under a simultaneous class relabeling") {
    Rng rng = Rng::stream(4, "cm");
    const int C = 5;
    LabelMap pred({16, 16}), gt({16, 16});
    for (auto& v : pred.data) v = uint8_t(rng.below(C));
    for (auto& v : gt.data) v = uint8_t(rng.below(C));
    ConfusionMatrix cm(C);
    cm.accumulate(pred, gt);

    std::vector<int> perm = {3, 0, 4, 1, 2};
    LabelMap pred2 = pred, gt2 = gt;
    for (auto& v : pred2.data) v = uint8_t(perm[v]);
    for (auto& v : gt2.data) v = uint8_t(perm[v]);
    ConfusionMatrix cm2(C);
    cm2.accumulate(pred2, gt2);

    auto r1 = cm.miou(), r2 = cm2.miou();
    CHECK(r1.miou == doctest::Approx(r2.miou).epsilon(1e-12));
    for (int c = 0; c < C; ++c)
        CHECK(*r1.per_class[size_t(c)] ==
              doctest::Approx(*r2.per_class[size_t(perm[size_t(c)])]).epsilon(1e-12));
}

TEST_CASE("empty matrix raises an evaluation error") {
    ConfusionMatrix cm(3);
    CHECK_THROWS_AS(cm.miou(), EmptyEvalError);
}

TEST_CASE("report json carries per-class names and pixel count") {
    ConfusionMatrix cm(2);
    LabelMap pred({2, 2}, 0), gt({2, 2}, 0);
    cm.accumulate(pred, gt);
    auto j = nlohmann::json::parse(cm.report_json({"road", "sky"}));
    CHECK(j.at("miou").get<double>() == doctest::Approx(1.0));
    CHECK(j.at("pixel_count").get<int>() == 4);
    CHECK(j.at("per_class_iou").at("road").get<double>() == doctest::Approx(1.0));
    CHECK(j.at("per_class_iou").at("sky").is_null());
}
