#include "nightseg/eval.hpp"

#include <json.hpp>

namespace nightseg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes),
      counts_(size_t(num_classes) * size_t(num_classes), 0) {}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
    if (!pred.same_shape(gt)) throw DimensionError("ConfusionMatrix: shape mismatch");
    for (int64_t i = 0; i < gt.numel(); ++i) {
        uint8_t g = gt[i];
        if (g == kIgnoreId) continue;
        uint8_t p = pred[i];
        if (g >= num_classes_ || p >= num_classes_)
            throw LabelError("ConfusionMatrix: class id out of range");
        ++counts_[size_t(g) * size_t(num_classes_) + size_t(p)];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes_ != num_classes_)
        throw DimensionError("ConfusionMatrix: class count mismatch");
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (int64_t v : counts_) t += v;
    return t;
}

ConfusionMatrix::MiouResult ConfusionMatrix::miou() const {
    if (total() == 0) throw EmptyEvalError("ConfusionMatrix: no evaluated pixels");
    MiouResult r;
    r.pixel_count = total();
    r.per_class.resize(size_t(num_classes_));
    double sum = 0;
    int present = 0;
    for (int c = 0; c < num_classes_; ++c) {
        int64_t row = 0, col = 0;
        for (int j = 0; j < num_classes_; ++j) {
            row += at(c, j);
            col += at(j, c);
        }
        int64_t inter = at(c, c);
        int64_t uni = row + col - inter;
        if (uni == 0) continue;  // absent from both gt and pred
        double iou = double(inter) / double(uni);
        r.per_class[size_t(c)] = iou;
        sum += iou;
        ++present;
    }
    r.miou = present > 0 ? sum / present : 0.0;
    return r;
}

std::string ConfusionMatrix::report_json(const std::vector<std::string>& names) const {
    auto r = miou();
    nlohmann::json j;
    nlohmann::json per;
    for (int c = 0; c < num_classes_; ++c) {
        std::string name = c < int(names.size()) ? names[size_t(c)] : "class_" + std::to_string(c);
        if (r.per_class[size_t(c)])
            per[name] = *r.per_class[size_t(c)];
        else
            per[name] = nullptr;
    }
    j["per_class_iou"] = per;
    j["miou"] = r.miou;
    j["pixel_count"] = r.pixel_count;
    return j.dump(2);
}

}  // namespace nightseg
