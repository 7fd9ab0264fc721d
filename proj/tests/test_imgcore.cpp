#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nightseg/imgcore.hpp"
#include "nightseg/rng.hpp"

using namespace nightseg;

namespace {

Image<double> random_image(int h, int w, Rng& rng) {
    Image<double> img({3, h, w});
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

// Windowed SSIM evaluated directly per pixel, independent of the separable
// filter path used by ssim_map.
double brute_ssim_at(const Image<double>& a, const Image<double>& b, int ch, int py, int px) {
    const int h = a.shape[1], w = a.shape[2];
    auto win = detail::gaussian_window<double>();
    const int r = detail::kSsimWindow / 2;
    double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            double wgt = win[size_t(dy + r)] * win[size_t(dx + r)];
            double va = a.at(ch, reflect_index(py + dy, h), reflect_index(px + dx, w));
            double vb = b.at(ch, reflect_index(py + dy, h), reflect_index(px + dx, w));
            ma += wgt * va;
            mb += wgt * vb;
            maa += wgt * va * va;
            mbb += wgt * vb * vb;
            mab += wgt * va * vb;
        }
    const double c1 = 1e-4, c2 = 9e-4;
    double va = maa - ma * ma, vb = mbb - mb * mb, cov = mab - ma * mb;
    return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

}  // namespace

TEST_CASE("average_pool constants and block means") {
    Image<double> img({3, 96, 96}, 0.4);
    auto pooled = average_pool(img, 32);
    CHECK(pooled.shape == std::vector<int>{3, 3, 3});
    for (auto v : pooled.data) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));

    Image<double> tiny({1, 2, 2});
    tiny.at(0, 0, 0) = 0;
    tiny.at(0, 0, 1) = 1;
    tiny.at(0, 1, 0) = 2;
    tiny.at(0, 1, 1) = 3;
    auto p2 = average_pool(tiny, 2);
    CHECK(p2.numel() == 1);
    CHECK(p2[0] == doctest::Approx(1.5));
}

TEST_CASE("average_pool rejects non-divisible dimensions") {
    Image<double> img({3, 33, 32});
    CHECK_THROWS_AS(average_pool(img, 32), DimensionError);
}

TEST_CASE("average_pool preserves the image mean") {
    Rng rng = Rng::stream(7, "pool");
    auto img = random_image(64, 64, rng);
    for (int k : {2, 4, 8, 32}) {
        auto pooled = average_pool(img, k);
        double m1 = 0, m2 = 0;
        for (auto v : img.data) m1 += v;
        for (auto v : pooled.data) m2 += v;
        m1 /= double(img.numel());
        m2 /= double(pooled.numel());
        CHECK(m1 == doctest::Approx(m2).epsilon(1e-6));
    }
}

TEST_CASE("spatial_gradients on constants, ramps, degenerate sizes") {
    Image<double> c({3, 5, 7}, 0.3);
    auto [gx, gy] = spatial_gradients(c);
    for (auto v : gx.data) CHECK(v == 0.0);
    for (auto v : gy.data) CHECK(v == 0.0);

    const int w = 8;
    Image<double> ramp({3, 4, w});
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < w; ++x) ramp.at(ch, y, x) = double(x) / w;
    auto [rx, ry] = spatial_gradients(ramp);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < w; ++x)
                CHECK(rx.at(ch, y, x) == doctest::Approx(x + 1 < w ? 1.0 / w : 0.0));
    for (auto v : ry.data) CHECK(v == doctest::Approx(0.0));

    Image<double> one({3, 1, 1}, 0.9);
    auto [ox, oy] = spatial_gradients(one);
    CHECK(ox[0] == 0.0);
    CHECK(oy[0] == 0.0);
}

TEST_CASE("spatial_gradients is linear") {
    Rng rng = Rng::stream(11, "grad");
    auto u = random_image(9, 13, rng);
    auto v = random_image(9, 13, rng);
    Image<double> s(u.shape);
    for (int64_t i = 0; i < s.numel(); ++i) s[i] = u[i] + v[i];
    auto [gsx, gsy] = spatial_gradients(s);
    auto [gux, guy] = spatial_gradients(u);
    auto [gvx, gvy] = spatial_gradients(v);
    for (int64_t i = 0; i < s.numel(); ++i) {
        CHECK(gsx[i] == doctest::Approx(gux[i] + gvx[i]).epsilon(1e-12));
        CHECK(gsy[i] == doctest::Approx(guy[i] + gvy[i]).epsilon(1e-12));
    }
}

TEST_CASE("ssim_map of an image with itself is one") {
    Rng rng = Rng::stream(3, "ssim");
    auto img = random_image(16, 16, rng);
    auto s = ssim_map(img, img);
    for (auto v : s.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ssim_map constant images match the closed form") {
    Image<double> a({3, 16, 16}, 0.2);
    Image<double> b({3, 16, 16}, 0.8);
    const double c1 = 1e-4, c2 = 9e-4;
    // zero variances: ssim = (2*mu_a*mu_b + c1)*c2 / ((mu_a^2+mu_b^2+c1)*c2)
    double expected = (2 * 0.2 * 0.8 + c1) / (0.2 * 0.2 + 0.8 * 0.8 + c1);
    auto s = ssim_map(a, b);
    for (auto v : s.data) CHECK(v == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("ssim_map against the brute-force windowed oracle") {
    Rng rng = Rng::stream(5, "ssim-oracle");
    auto a = random_image(16, 16, rng);
    Image<double> b(a.shape);
    for (int64_t i = 0; i < a.numel(); ++i) b[i] = 1.0 - a[i];
    auto s = ssim_map(a, b);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                CHECK(s.at(ch, y, x) ==
                      doctest::Approx(brute_ssim_at(a, b, ch, y, x)).epsilon(1e-9));
                CHECK(s.at(ch, y, x) < 1.0);  // a vs 1-a is never identical locally
            }
}

TEST_CASE("ssim_map symmetry and upper bound") {
    Rng rng = Rng::stream(9, "ssim-sym");
    auto a = random_image(12, 20, rng);
    auto b = random_image(12, 20, rng);
    auto s1 = ssim_map(a, b);
    auto s2 = ssim_map(b, a);
    for (int64_t i = 0; i < s1.numel(); ++i) {
        CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-6));
        CHECK(s1[i] <= 1.0 + 1e-6);
    }
}

TEST_CASE("ssim_map shape mismatch") {
    Image<double> a({3, 8, 8}), b({3, 8, 9});
    CHECK_THROWS_AS(ssim_map(a, b), DimensionError);
}

TEST_CASE("argmax_confidence dominant channel and tie-break") {
    ProbMap<double> p({4, 2, 2});
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            p.at(0, y, x) = 0.003;
            p.at(1, y, x) = 0.004;
            p.at(2, y, x) = 0.99;
            p.at(3, y, x) = 0.003;
        }
    auto cm = argmax_confidence(p);
    for (int64_t i = 0; i < cm.labels.numel(); ++i) {
        CHECK(cm.labels[i] == 2);
        CHECK(cm.conf[i] == doctest::Approx(0.99));
    }

    ProbMap<double> u({4, 1, 1}, 0.25);
    auto cu = argmax_confidence(u);
    CHECK(cu.labels[0] == 0);
    CHECK(cu.conf[0] == doctest::Approx(0.25));
}

TEST_CASE("argmax_confidence matches an exhaustive scan") {
    Rng rng = Rng::stream(13, "argmax");
    const int c = 6, h = 9, w = 7;
    ProbMap<double> p({c, h, w});
    for (auto& v : p.data) v = rng.uniform();
    // normalize per pixel
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int ch = 0; ch < c; ++ch) s += p.at(ch, y, x);
            for (int ch = 0; ch < c; ++ch) p.at(ch, y, x) /= s;
        }
    auto cm = argmax_confidence(p);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double bv = p.at(0, y, x);
            for (int ch = 1; ch < c; ++ch)
                if (p.at(ch, y, x) > bv) {
                    bv = p.at(ch, y, x);
                    best = ch;
                }
            CHECK(int(cm.labels.at(y, x)) == best);
            CHECK(cm.conf.at(y, x) == doctest::Approx(bv));
        }
}

TEST_CASE("one_hot basics, ignore handling, range errors") {
    LabelMap y({3, 4}, 1);
    auto oh = one_hot<double>(y, 3);
    for (int yy = 0; yy < 3; ++yy)
        for (int xx = 0; xx < 4; ++xx) {
            CHECK(oh.at(0, yy, xx) == 0.0);
            CHECK(oh.at(1, yy, xx) == 1.0);
            CHECK(oh.at(2, yy, xx) == 0.0);
        }

    LabelMap ig({2, 2}, kIgnoreId);
    auto ohi = one_hot<double>(ig, 3);
    for (auto v : ohi.data) CHECK(v == 0.0);

    LabelMap bad({1, 1}, 7);
    CHECK_THROWS_AS(one_hot<double>(bad, 3), LabelError);
}

TEST_CASE("one_hot then argmax recovers non-ignored labels") {
    Rng rng = Rng::stream(17, "onehot");
    const int C = 5;
    LabelMap y({10, 10});
    for (auto& v : y.data) {
        uint64_t r = rng.below(C + 1);
        v = (r == uint64_t(C)) ? kIgnoreId : uint8_t(r);
    }
    auto oh = one_hot<double>(y, C);
    // bias channel 0 slightly so all-zero (ignored) columns argmax to 0
    auto cm = argmax_confidence(oh);
    for (int64_t i = 0; i < y.numel(); ++i)
        if (y[i] != kIgnoreId) CHECK(int(cm.labels[i]) == int(y[i]));
}
