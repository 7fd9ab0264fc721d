#pragma once

#include <array>
#include <string>
#include <vector>

#include "nightseg/rng.hpp"
#include "nightseg/tensor.hpp"

namespace nightseg {

struct OverwriteError : std::runtime_error {
    explicit OverwriteError(const std::string& m) : std::runtime_error(m) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

// Procedural benchmark: labeled source scenes plus coarsely aligned
// day/night target pairs. Eight classes; cars and persons are the dynamic
// ones and may vanish at night.

enum ClassId : uint8_t {
    kRoad = 0,
    kSky = 1,
    kBuilding = 2,
    kVegetation = 3,
    kCar = 4,
    kPerson = 5,
    kPole = 6,
    kSign = 7,
};
inline constexpr int kNumClasses = 8;

const std::vector<std::string>& class_names();
const std::array<std::array<float, 3>, kNumClasses>& class_palette();  // for prediction dumps

struct RgbColor {
    float r = 0, g = 0, b = 0;
};

struct SceneObject {
    uint8_t class_id = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bounds
    bool ellipse = false;
    RgbColor jitter;  // per-instance color offset, shared across renders
};

struct SceneSpec {
    int height = 0, width = 0;
    int sky_rows = 0;   // guaranteed clear-sky band at the top
    int road_rows = 0;  // road band at the bottom
    std::vector<SceneObject> objects;  // paint order
};

enum class RenderMode { Source, Day, Night };

// Night appearance model; every knob is configurable but the defaults are
// the benchmark contract.
struct GenParams {
    double night_gain = 0.25;
    double night_gamma = 2.2;
    double blue_cast = 0.03;
    double removal_prob = 0.7;  // per dynamic object
    int max_offset = 4;         // whole-frame shift, uniform in [-k,k]^2
    double noise_source = 0.02;
    double noise_day = 0.02;
    double noise_night = 0.05;
};

SceneSpec sample_scene(Rng& rng, int height = 96, int width = 96);

std::pair<Image<float>, LabelMap> render(const SceneSpec& spec, RenderMode mode, Rng& rng,
                                         const GenParams& params = {});

// Pixelwise night transform (applied before noise and translation).
float night_value(float day_value, int channel, const GenParams& params);

struct DatasetCounts {
    int source = 400;
    int pairs = 200;
    int test = 50;
};

struct DatasetManifest {
    int format_version = 1;
    int generator_version = 1;
    uint64_t seed = 0;
    int image_size = 96;
    DatasetCounts counts;
    std::vector<std::pair<std::string, std::string>> pairs;  // day file, night file
    std::string content_digest;

    std::string to_json() const;
    static DatasetManifest from_json_file(const std::string& path);
};

DatasetManifest write_dataset(const std::string& root, const DatasetCounts& counts, uint64_t seed,
                              const GenParams& params = {}, bool force = false,
                              int image_size = 96);

// In-memory view used by the trainer.
struct Dataset {
    std::vector<Image<float>> source_images;
    std::vector<LabelMap> source_labels;
    std::vector<Image<float>> day_images;
    std::vector<Image<float>> night_images;
    std::vector<Image<float>> test_images;
    std::vector<LabelMap> test_labels;
};

Dataset load_dataset(const std::string& root);

}  // namespace nightseg
