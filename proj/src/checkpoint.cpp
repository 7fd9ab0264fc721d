#include "nightseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "nightseg/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nightseg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

Models Models::create(const Config& cfg) {
    Models m;
    m.relight = RelightNet<float>(cfg.seed, "relight");
    m.seg = SegNet<float>(cfg.num_classes, cfg.seed, "seg");
    m.disc_day = Discriminator<float>(cfg.num_classes, cfg.seed, "disc_d");
    m.disc_night = Discriminator<float>(cfg.num_classes, cfg.seed, "disc_n");
    return m;
}

std::vector<NamedParam<float>> Models::generator_params() const {
    auto out = relight.params("relight");
    auto s = seg.params("seg");
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

std::vector<NamedParam<float>> Models::discriminator_params() const {
    auto out = disc_day.params("disc_d");
    auto n = disc_night.params("disc_n");
    out.insert(out.end(), n.begin(), n.end());
    return out;
}

std::vector<NamedParam<float>> Models::all_params() const {
    auto out = generator_params();
    auto d = discriminator_params();
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

namespace {

constexpr char kMagic[4] = {'N', 'S', 'C', 'P'};
constexpr uint32_t kFormatVersion = 1;

void put_u32(std::string& buf, uint32_t v) { buf.append(reinterpret_cast<const char*>(&v), 4); }

void append_array(std::string& buf, const std::string& name, const Tensor<float>& t) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(buf, static_cast<uint32_t>(d));
    buf.append(reinterpret_cast<const char*>(t.ptr()), size_t(t.numel()) * sizeof(float));
}

struct NamedArrays {
    std::vector<std::pair<std::string, Tensor<float>>> items;
    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : items)
            if (n == name) return &t;
        return nullptr;
    }
};

NamedArrays parse_container(const std::string& buf) {
    NamedArrays out;
    size_t pos = 0;
    auto need = [&](size_t n) {
        if (pos + n > buf.size()) throw IntegrityError("checkpoint container truncated");
    };
    need(8);
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw IntegrityError("checkpoint container has wrong magic");
    uint32_t version;
    std::memcpy(&version, buf.data() + 4, 4);
    if (version != kFormatVersion)
        throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
    pos = 8;
    need(4);
    uint32_t count;
    std::memcpy(&count, buf.data() + pos, 4);
    pos += 4;
    for (uint32_t i = 0; i < count; ++i) {
        need(4);
        uint32_t nlen;
        std::memcpy(&nlen, buf.data() + pos, 4);
        pos += 4;
        need(nlen);
        std::string name(buf.data() + pos, nlen);
        pos += nlen;
        need(4);
        uint32_t ndim;
        std::memcpy(&ndim, buf.data() + pos, 4);
        pos += 4;
        std::vector<int> shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) {
            need(4);
            uint32_t dim;
            std::memcpy(&dim, buf.data() + pos, 4);
            pos += 4;
            shape[d] = static_cast<int>(dim);
        }
        Tensor<float> t(shape);
        size_t bytes = size_t(t.numel()) * sizeof(float);
        need(bytes);
        std::memcpy(t.ptr(), buf.data() + pos, bytes);
        pos += bytes;
        out.items.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

void copy_into(const NamedArrays& arrays, const std::string& name, Tensor<float>& dst) {
    const Tensor<float>* src = arrays.find(name);
    if (!src) throw CheckpointError("checkpoint missing array: " + name);
    if (src->shape != dst.shape)
        throw DimensionError("checkpoint array shape mismatch for " + name);
    dst.data = src->data;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Models& models,
                     const SgdMomentum<float>& gen_opt, const Adam<float>& disc_opt,
                     int64_t iteration, const Config& cfg) {
    fs::create_directories(dir);
    std::vector<std::pair<std::string, const Tensor<float>*>> arrays;
    auto add_params = [&](const std::vector<NamedParam<float>>& ps) {
        for (const auto& p : ps) arrays.emplace_back(p.name, &p.node->value);
    };
    auto gen = models.generator_params();
    auto disc = models.discriminator_params();
    add_params(gen);
    add_params(disc);
    for (size_t i = 0; i < gen_opt.params.size(); ++i)
        arrays.emplace_back("opt/gen/v/" + gen[i].name, &gen_opt.velocity[i]);
    for (size_t i = 0; i < disc_opt.params.size(); ++i) {
        arrays.emplace_back("opt/disc/m/" + disc[i].name, &disc_opt.m[i]);
        arrays.emplace_back("opt/disc/v/" + disc[i].name, &disc_opt.v[i]);
    }

    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kFormatVersion);
    put_u32(buf, static_cast<uint32_t>(arrays.size()));
    for (const auto& [name, t] : arrays) append_array(buf, name, *t);

    {
        std::ofstream f(fs::path(dir) / "params.bin", std::ios::binary);
        if (!f) throw CheckpointError("cannot write checkpoint container under " + dir);
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }

    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["iteration"] = iteration;
    manifest["adam_t"] = disc_opt.t;
    manifest["config_digest"] = cfg.digest();
    manifest["compat_digest"] = cfg.compat_digest();
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", crc32_of(buf.data(), buf.size()));
    manifest["checksum"] = crc;
    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

CheckpointInfo load_checkpoint(const std::string& dir, Models& models,
                               SgdMomentum<float>* gen_opt, Adam<float>* disc_opt,
                               const Config& cfg, bool allow_config_mismatch) {
    fs::path base(dir);
    std::ifstream mf(base / "manifest.json");
    if (!mf) throw CheckpointError("no manifest.json under " + dir);
    json manifest = json::parse(mf);

    std::ifstream pf(base / "params.bin", std::ios::binary);
    if (!pf) throw CheckpointError("no params.bin under " + dir);
    std::string buf((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());

    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", crc32_of(buf.data(), buf.size()));
    if (manifest.at("checksum").get<std::string>() != crc)
        throw IntegrityError("checkpoint checksum mismatch under " + dir);

    NamedArrays arrays = parse_container(buf);

    auto gen = models.generator_params();
    auto disc = models.discriminator_params();
    for (auto& p : gen) copy_into(arrays, p.name, p.node->value);
    for (auto& p : disc) copy_into(arrays, p.name, p.node->value);
    if (gen_opt)
        for (size_t i = 0; i < gen_opt->params.size(); ++i)
            copy_into(arrays, "opt/gen/v/" + gen[i].name, gen_opt->velocity[i]);
    if (disc_opt) {
        for (size_t i = 0; i < disc_opt->params.size(); ++i) {
            copy_into(arrays, "opt/disc/m/" + disc[i].name, disc_opt->m[i]);
            copy_into(arrays, "opt/disc/v/" + disc[i].name, disc_opt->v[i]);
        }
        disc_opt->t = manifest.at("adam_t").get<int64_t>();
    }

    if (manifest.at("compat_digest").get<std::string>() != cfg.compat_digest() &&
        !allow_config_mismatch)
        throw CheckpointError("checkpoint config digest mismatch (pass the override to load anyway)");

    CheckpointInfo info;
    info.iteration = manifest.at("iteration").get<int64_t>();
    return info;
}

}  // namespace nightseg
