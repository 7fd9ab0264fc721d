#include "nightseg/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "nightseg/hash.hpp"

namespace nightseg {

std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::Baseline: return "baseline";
        case TrainMode::M2F: return "m2f";
        case TrainMode::F2M: return "f2m";
        case TrainMode::BiMix: return "bimix";
    }
    return "baseline";
}

TrainMode mode_from_string(const std::string& s) {
    if (s == "baseline") return TrainMode::Baseline;
    if (s == "m2f") return TrainMode::M2F;
    if (s == "f2m") return TrainMode::F2M;
    if (s == "bimix") return TrainMode::BiMix;
    throw ConfigError("unknown mode: " + s + " (expected baseline|m2f|f2m|bimix)");
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::map<std::string, std::string> as_map(const Config& c) {
    return {
        {"mu1", fmt(c.mu1)},
        {"mu2", fmt(c.mu2)},
        {"mu3", fmt(c.mu3)},
        {"alpha_tv", fmt(c.alpha_tv)},
        {"alpha_exp", fmt(c.alpha_exp)},
        {"alpha_ssim", fmt(c.alpha_ssim)},
        {"gamma", fmt(c.gamma)},
        {"pool_k", std::to_string(c.pool_k)},
        {"base_lr", fmt(c.base_lr)},
        {"momentum", fmt(c.momentum)},
        {"weight_decay", fmt(c.weight_decay)},
        {"adam_beta1", fmt(c.adam_beta1)},
        {"adam_beta2", fmt(c.adam_beta2)},
        {"adam_eps", fmt(c.adam_eps)},
        {"disc_lr", fmt(c.disc_lr)},
        {"poly_power", fmt(c.poly_power)},
        {"batch_size", std::to_string(c.batch_size)},
        {"max_iters", std::to_string(c.max_iters)},
        {"pretrain_iters", std::to_string(c.pretrain_iters)},
        {"mode", to_string(c.mode)},
        {"relight_enabled", c.relight_enabled ? "true" : "false"},
        {"seed", std::to_string(c.seed)},
        {"image_size", std::to_string(c.image_size)},
        {"num_classes", std::to_string(c.num_classes)},
        {"dynamic_classes", join_ints(c.dynamic_classes)},
        {"eval_every", std::to_string(c.eval_every)},
    };
}

}  // namespace

std::string Config::canonical_text() const {
    std::string out;
    for (const auto& [k, v] : as_map(*this)) out += k + " = " + v + "\n";
    return out;
}

std::string Config::digest() const { return sha256_hex(canonical_text()); }

std::string Config::compat_digest() const {
    std::string s = "arch=v1\n";
    s += "image_size=" + std::to_string(image_size) + "\n";
    s += "num_classes=" + std::to_string(num_classes) + "\n";
    s += "dynamic_classes=" + join_ints(dynamic_classes) + "\n";
    s += std::string("relight_enabled=") + (relight_enabled ? "true" : "false") + "\n";
    return sha256_hex(s);
}

void Config::set(const std::string& key, const std::string& value) {
    auto d = [&] { return std::stod(value); };
    auto i = [&] { return std::stoi(value); };
    if (key == "mu1") mu1 = d();
    else if (key == "mu2") mu2 = d();
    else if (key == "mu3") mu3 = d();
    else if (key == "alpha_tv") alpha_tv = d();
    else if (key == "alpha_exp") alpha_exp = d();
    else if (key == "alpha_ssim") alpha_ssim = d();
    else if (key == "gamma") gamma = d();
    else if (key == "pool_k") pool_k = i();
    else if (key == "base_lr") base_lr = d();
    else if (key == "momentum") momentum = d();
    else if (key == "weight_decay") weight_decay = d();
    else if (key == "adam_beta1") adam_beta1 = d();
    else if (key == "adam_beta2") adam_beta2 = d();
    else if (key == "adam_eps") adam_eps = d();
    else if (key == "disc_lr") disc_lr = d();
    else if (key == "poly_power") poly_power = d();
    else if (key == "batch_size") batch_size = i();
    else if (key == "max_iters") max_iters = i();
    else if (key == "pretrain_iters") pretrain_iters = i();
    else if (key == "mode") mode = mode_from_string(value);
    else if (key == "relight_enabled") relight_enabled = (value == "true" || value == "1");
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "image_size") image_size = i();
    else if (key == "num_classes") num_classes = i();
    else if (key == "dynamic_classes") dynamic_classes = parse_ints(value);
    else if (key == "eval_every") eval_every = i();
    else throw ConfigError("unknown config key: " + key);
}

Config Config::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (!blank)
                throw ConfigError("bad config line " + std::to_string(lineno) + ": " + line);
            continue;
        }
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

void Config::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write config file: " + path);
    f << canonical_text();
}

}  // namespace nightseg
