#include "nightseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "nightseg/hash.hpp"
#include "nightseg/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nightseg {

namespace {

struct Hsv {
    float h, s, v;
};

Hsv rgb_to_hsv(float r, float g, float b) {
    float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    float d = mx - mn;
    float h = 0;
    if (d > 0) {
        if (mx == r)
            h = std::fmod((g - b) / d, 6.0f);
        else if (mx == g)
            h = (b - r) / d + 2.0f;
        else
            h = (r - g) / d + 4.0f;
        h /= 6.0f;
        if (h < 0) h += 1.0f;
    }
    return {h, mx > 0 ? d / mx : 0.0f, mx};
}

RgbColor hsv_to_rgb(float h, float s, float v) {
    float c = v * s;
    float hh = h * 6.0f;
    float x = c * (1.0f - std::abs(std::fmod(hh, 2.0f) - 1.0f));
    float r = 0, g = 0, b = 0;
    if (hh < 1) {
        r = c; g = x;
    } else if (hh < 2) {
        r = x; g = c;
    } else if (hh < 3) {
        g = c; b = x;
    } else if (hh < 4) {
        g = x; b = c;
    } else if (hh < 5) {
        r = x; b = c;
    } else {
        r = c; b = x;
    }
    float m = v - c;
    return {r + m, g + m, b + m};
}

RgbColor hue_shift(const RgbColor& c, float dh, float dsat) {
    Hsv hsv = rgb_to_hsv(c.r, c.g, c.b);
    float h = std::fmod(hsv.h + dh + 1.0f, 1.0f);
    float s = std::min(std::max(hsv.s + dsat, 0.0f), 1.0f);
    return hsv_to_rgb(h, s, hsv.v);
}

// Base colors for the labeled source domain.
const std::array<RgbColor, kNumClasses>& palette_source() {
    static const std::array<RgbColor, kNumClasses> p = {{
        {0.33f, 0.33f, 0.35f},  // road
        {0.62f, 0.76f, 0.92f},  // sky
        {0.56f, 0.42f, 0.33f},  // building
        {0.21f, 0.52f, 0.24f},  // vegetation
        {0.80f, 0.22f, 0.17f},  // car
        {0.76f, 0.32f, 0.58f},  // person
        {0.16f, 0.17f, 0.19f},  // pole
        {0.93f, 0.79f, 0.14f},  // sign
    }};
    return p;
}

// Day target palette: the same scene grammar under a mild hue/saturation
// shift, so the two domains are related but not identical.
const std::array<RgbColor, kNumClasses>& palette_day() {
    static const std::array<RgbColor, kNumClasses> p = [] {
        std::array<RgbColor, kNumClasses> out{};
        const auto& src = palette_source();
        for (int i = 0; i < kNumClasses; ++i) out[size_t(i)] = hue_shift(src[size_t(i)], 0.045f, -0.05f);
        return out;
    }();
    return p;
}

void paint_rect(Image<float>& img, LabelMap& lab, const SceneObject& o, const RgbColor& base) {
    const int h = lab.shape[0], w = lab.shape[1];
    for (int y = std::max(0, o.y0); y <= std::min(h - 1, o.y1); ++y)
        for (int x = std::max(0, o.x0); x <= std::min(w - 1, o.x1); ++x) {
            if (o.ellipse) {
                float cy = 0.5f * (o.y0 + o.y1), cx = 0.5f * (o.x0 + o.x1);
                float ry = 0.5f * (o.y1 - o.y0) + 0.5f, rx = 0.5f * (o.x1 - o.x0) + 0.5f;
                float dy = (y - cy) / ry, dx = (x - cx) / rx;
                if (dy * dy + dx * dx > 1.0f) continue;
            }
            lab.at(y, x) = o.class_id;
            img.at(0, y, x) = std::clamp(base.r + o.jitter.r, 0.0f, 1.0f);
            img.at(1, y, x) = std::clamp(base.g + o.jitter.g, 0.0f, 1.0f);
            img.at(2, y, x) = std::clamp(base.b + o.jitter.b, 0.0f, 1.0f);
        }
}

std::pair<Image<float>, LabelMap> render_base(const SceneSpec& spec,
                                              const std::array<RgbColor, kNumClasses>& pal,
                                              const std::vector<bool>* removed) {
    const int h = spec.height, w = spec.width;
    Image<float> img({3, h, w});
    LabelMap lab({h, w});
    const int horizon = h - spec.road_rows;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            uint8_t cls = y < horizon ? kSky : kRoad;
            lab.at(y, x) = cls;
            const RgbColor& c = pal[cls];
            img.at(0, y, x) = c.r;
            img.at(1, y, x) = c.g;
            img.at(2, y, x) = c.b;
        }
    for (size_t i = 0; i < spec.objects.size(); ++i) {
        if (removed && (*removed)[i]) continue;
        const SceneObject& o = spec.objects[i];
        paint_rect(img, lab, o, pal[o.class_id]);
    }
    return {std::move(img), std::move(lab)};
}

template <typename F>
void shift_into(int h, int w, int dy, int dx, F&& assign) {
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int sy = std::clamp(y - dy, 0, h - 1);
            int sx = std::clamp(x - dx, 0, w - 1);
            assign(y, x, sy, sx);
        }
}

}  // namespace

const std::vector<std::string>& class_names() {
    static const std::vector<std::string> names = {"road",   "sky",    "building", "vegetation",
                                                   "car",    "person", "pole",     "sign"};
    return names;
}

const std::array<std::array<float, 3>, kNumClasses>& class_palette() {
    static const std::array<std::array<float, 3>, kNumClasses> p = [] {
        std::array<std::array<float, 3>, kNumClasses> out{};
        for (int i = 0; i < kNumClasses; ++i) {
            const RgbColor& c = palette_source()[size_t(i)];
            out[size_t(i)] = {c.r, c.g, c.b};
        }
        return out;
    }();
    return p;
}

SceneSpec sample_scene(Rng& rng, int height, int width) {
    SceneSpec spec;
    spec.height = height;
    spec.width = width;
    spec.sky_rows = int(std::lround(rng.uniform(0.25, 0.40) * height));
    spec.road_rows = int(std::lround(rng.uniform(0.30, 0.45) * height));
    const int horizon = height - spec.road_rows;
    const auto sx = [&](int v) { return std::max(1, v * width / 96); };

    auto jitter = [&]() -> RgbColor {
        float s = float(rng.uniform(-0.06, 0.06));
        return {s + float(rng.uniform(-0.02, 0.02)), s + float(rng.uniform(-0.02, 0.02)),
                s + float(rng.uniform(-0.02, 0.02))};
    };

    int n_buildings = rng.range(2, 5);
    for (int i = 0; i < n_buildings; ++i) {
        SceneObject o;
        o.class_id = kBuilding;
        int bw = sx(rng.range(12, 28));
        int top = std::min(horizon - 4, spec.sky_rows + int(rng.below(uint64_t(std::max(1, horizon - spec.sky_rows)))));
        o.x0 = int(rng.below(uint64_t(std::max(1, width - bw))));
        o.x1 = o.x0 + bw - 1;
        o.y0 = top;
        o.y1 = horizon - 1;
        o.jitter = jitter();
        spec.objects.push_back(o);
    }
    int n_veg = rng.range(1, 3);
    for (int i = 0; i < n_veg; ++i) {
        SceneObject o;
        o.class_id = kVegetation;
        o.ellipse = true;
        int rx = sx(rng.range(5, 12)), ry = sx(rng.range(4, 9));
        rx = std::min(rx, (width - 1) / 2);
        int cx = rx + int(rng.below(uint64_t(std::max(1, width - 2 * rx))));
        int cy = std::max(ry, horizon - 1 - int(rng.below(uint64_t(std::max(1, ry)))));
        o.x0 = cx - rx;
        o.x1 = cx + rx;
        o.y0 = cy - ry;
        o.y1 = cy + ry;
        o.jitter = jitter();
        spec.objects.push_back(o);
    }
    int n_poles = rng.range(0, 3);
    for (int i = 0; i < n_poles; ++i) {
        SceneObject o;
        o.class_id = kPole;
        int pw = rng.range(1, 2), ph = sx(rng.range(15, 30));
        o.x0 = int(rng.below(uint64_t(std::max(1, width - pw))));
        o.x1 = o.x0 + pw - 1;
        o.y1 = std::min(height - 1, horizon + rng.range(0, spec.road_rows / 4));
        o.y0 = std::max(0, o.y1 - ph + 1);
        o.jitter = jitter();
        spec.objects.push_back(o);
    }
    int n_signs = rng.range(0, 2);
    for (int i = 0; i < n_signs; ++i) {
        SceneObject o;
        o.class_id = kSign;
        int s = sx(rng.range(4, 7));
        o.x0 = int(rng.below(uint64_t(std::max(1, width - s))));
        o.x1 = o.x0 + s - 1;
        o.y0 = std::max(0, horizon - 10 - rng.range(0, 18));
        o.y1 = o.y0 + s - 1;
        o.jitter = jitter();
        spec.objects.push_back(o);
    }
    // dynamic objects: bounding boxes stay inside road rows
    int n_cars = rng.range(0, 3);
    for (int i = 0; i < n_cars; ++i) {
        SceneObject o;
        o.class_id = kCar;
        int cw = sx(rng.range(12, 20)), chh = sx(rng.range(6, 9));
        o.x0 = int(rng.below(uint64_t(std::max(1, width - cw))));
        o.x1 = o.x0 + cw - 1;
        o.y0 = horizon + int(rng.below(uint64_t(std::max(1, spec.road_rows - chh))));
        o.y1 = o.y0 + chh - 1;
        o.jitter = jitter();
        spec.objects.push_back(o);
    }
    int n_persons = rng.range(0, 3);
    for (int i = 0; i < n_persons; ++i) {
        SceneObject o;
        o.class_id = kPerson;
        int pw = rng.range(2, 4), ph = sx(rng.range(8, 14));
        o.x0 = int(rng.below(uint64_t(std::max(1, width - pw))));
        o.x1 = o.x0 + pw - 1;
        o.y0 = horizon + int(rng.below(uint64_t(std::max(1, spec.road_rows - ph))));
        o.y1 = o.y0 + ph - 1;
        o.jitter = jitter();
        spec.objects.push_back(o);
    }
    return spec;
}

float night_value(float day_value, int channel, const GenParams& p) {
    float v = float(p.night_gain) * std::pow(std::max(day_value, 0.0f), float(p.night_gamma));
    if (channel == 2) v += float(p.blue_cast);
    return v;
}

std::pair<Image<float>, LabelMap> render(const SceneSpec& spec, RenderMode mode, Rng& rng,
                                         const GenParams& p) {
    const int h = spec.height, w = spec.width;
    if (mode == RenderMode::Source || mode == RenderMode::Day) {
        auto [img, lab] =
            render_base(spec, mode == RenderMode::Source ? palette_source() : palette_day(), nullptr);
        double sigma = mode == RenderMode::Source ? p.noise_source : p.noise_day;
        for (auto& v : img.data) v = float(v + sigma * rng.gauss());
        return {std::move(img), std::move(lab)};
    }

    // Night: day palette, dynamic objects dropped with removal_prob, then
    // darkening, blue cast, heavier noise and a whole-frame shift.
    std::vector<bool> removed(spec.objects.size(), false);
    for (size_t i = 0; i < spec.objects.size(); ++i) {
        uint8_t c = spec.objects[i].class_id;
        if (c == kCar || c == kPerson) removed[i] = rng.bernoulli(p.removal_prob);
    }
    int dx = rng.range(-p.max_offset, p.max_offset);
    int dy = rng.range(-p.max_offset, p.max_offset);

    auto [base, lab] = render_base(spec, palette_day(), &removed);
    Image<float> dark({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) dark.at(c, y, x) = night_value(base.at(c, y, x), c, p);
    for (auto& v : dark.data) v = float(v + p.noise_night * rng.gauss());

    Image<float> img({3, h, w});
    LabelMap out_lab({h, w});
    shift_into(h, w, dy, dx, [&](int y, int x, int sy, int sx) {
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = dark.at(c, sy, sx);
        out_lab.at(y, x) = lab.at(sy, sx);
    });
    return {std::move(img), std::move(out_lab)};
}

std::string DatasetManifest::to_json() const {
    json j;
    j["format_version"] = format_version;
    j["generator_version"] = generator_version;
    j["seed"] = seed;
    j["image_size"] = image_size;
    j["counts"] = {{"source", counts.source}, {"pairs", counts.pairs}, {"test", counts.test}};
    j["class_names"] = class_names();
    json jp = json::array();
    for (const auto& [d, n] : pairs) jp.push_back({{"day", d}, {"night", n}});
    j["pairs"] = jp;
    j["content_digest"] = content_digest;
    return j.dump(2);
}

DatasetManifest DatasetManifest::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);
    json j = json::parse(f);
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    m.generator_version = j.at("generator_version").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.image_size = j.at("image_size").get<int>();
    m.counts.source = j.at("counts").at("source").get<int>();
    m.counts.pairs = j.at("counts").at("pairs").get<int>();
    m.counts.test = j.at("counts").at("test").get<int>();
    for (const auto& e : j.at("pairs"))
        m.pairs.emplace_back(e.at("day").get<std::string>(), e.at("night").get<std::string>());
    m.content_digest = j.at("content_digest").get<std::string>();
    return m;
}

namespace {

std::string file_label(const char* stem, int i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.png", stem, i);
    return buf;
}

void digest_image(std::string& acc, const Image<float>& img) {
    Tensor<uint8_t> q(img.shape);
    for (int64_t i = 0; i < img.numel(); ++i)
        q[i] = uint8_t(std::lround(std::clamp(img[i], 0.0f, 1.0f) * 255.0f));
    acc += sha256_hex(q.ptr(), size_t(q.numel()));
}

void digest_labels(std::string& acc, const LabelMap& lab) {
    acc += sha256_hex(lab.ptr(), size_t(lab.numel()));
}

}  // namespace

DatasetManifest write_dataset(const std::string& root, const DatasetCounts& counts, uint64_t seed,
                              const GenParams& params, bool force, int image_size) {
    fs::path rp(root);
    if (fs::exists(rp) && !fs::is_empty(rp)) {
        if (!force) throw OverwriteError("dataset root exists and is not empty: " + root);
        fs::remove_all(rp);
    }
    for (const char* sub : {"source/images", "source/labels", "target/day", "target/night",
                            "test/images", "test/labels"})
        fs::create_directories(rp / sub);

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.image_size = image_size;
    manifest.counts = counts;
    std::string digest_acc;

    for (int i = 0; i < counts.source; ++i) {
        Rng srng = Rng::stream(seed, "scene/source", uint64_t(i));
        auto spec = sample_scene(srng, image_size, image_size);
        Rng nrng = Rng::stream(seed, "render/source", uint64_t(i));
        auto [img, lab] = render(spec, RenderMode::Source, nrng, params);
        std::string name = file_label("src", i);
        write_png_rgb((rp / "source/images" / name).string(), img);
        write_png_gray((rp / "source/labels" / name).string(), lab);
        digest_image(digest_acc, img);
        digest_labels(digest_acc, lab);
    }
    for (int i = 0; i < counts.pairs; ++i) {
        Rng srng = Rng::stream(seed, "scene/target", uint64_t(i));
        auto spec = sample_scene(srng, image_size, image_size);
        Rng drng = Rng::stream(seed, "render/day", uint64_t(i));
        auto [day, dlab] = render(spec, RenderMode::Day, drng, params);
        Rng trng = Rng::stream(seed, "render/night", uint64_t(i));
        auto [night, nlab] = render(spec, RenderMode::Night, trng, params);
        std::string name = file_label("pair", i);
        write_png_rgb((rp / "target/day" / name).string(), day);
        write_png_rgb((rp / "target/night" / name).string(), night);
        manifest.pairs.emplace_back("target/day/" + name, "target/night/" + name);
        digest_image(digest_acc, day);
        digest_image(digest_acc, night);
    }
    for (int i = 0; i < counts.test; ++i) {
        Rng srng = Rng::stream(seed, "scene/test", uint64_t(i));
        auto spec = sample_scene(srng, image_size, image_size);
        Rng trng = Rng::stream(seed, "render/test", uint64_t(i));
        auto [img, lab] = render(spec, RenderMode::Night, trng, params);
        std::string name = file_label("test", i);
        write_png_rgb((rp / "test/images" / name).string(), img);
        write_png_gray((rp / "test/labels" / name).string(), lab);
        digest_image(digest_acc, img);
        digest_labels(digest_acc, lab);
    }

    manifest.content_digest = sha256_hex(digest_acc);
    std::ofstream mf(rp / "manifest.json");
    mf << manifest.to_json() << "\n";
    return manifest;
}

Dataset load_dataset(const std::string& root) {
    fs::path rp(root);
    if (!fs::exists(rp / "manifest.json")) throw DataError("no manifest.json under " + root);
    auto manifest = DatasetManifest::from_json_file((rp / "manifest.json").string());
    Dataset ds;
    for (int i = 0; i < manifest.counts.source; ++i) {
        std::string name = file_label("src", i);
        ds.source_images.push_back(read_png_rgb((rp / "source/images" / name).string()));
        ds.source_labels.push_back(read_png_gray((rp / "source/labels" / name).string()));
    }
    for (const auto& [day, night] : manifest.pairs) {
        ds.day_images.push_back(read_png_rgb((rp / day).string()));
        ds.night_images.push_back(read_png_rgb((rp / night).string()));
    }
    for (int i = 0; i < manifest.counts.test; ++i) {
        std::string name = file_label("test", i);
        ds.test_images.push_back(read_png_rgb((rp / "test/images" / name).string()));
        ds.test_labels.push_back(read_png_gray((rp / "test/labels" / name).string()));
    }
    if (ds.source_images.empty()) throw DataError("empty source split under " + root);
    return ds;
}

}  // namespace nightseg
