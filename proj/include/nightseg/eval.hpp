#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nightseg/tensor.hpp"

namespace nightseg {

struct EmptyEvalError : std::runtime_error {
    explicit EmptyEvalError(const std::string& m) : std::runtime_error(m) {}
};

// Row = ground truth, column = prediction. Ignore-labeled ground truth
// pixels are skipped.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    void accumulate(const LabelMap& pred, const LabelMap& gt);
    void merge(const ConfusionMatrix& other);

    int64_t at(int gt, int pred) const { return counts_[size_t(gt) * size_t(num_classes_) + size_t(pred)]; }
    int64_t total() const;
    int num_classes() const { return num_classes_; }

    struct MiouResult {
        std::vector<std::optional<double>> per_class;  // nullopt: absent from gt and pred
        double miou = 0.0;
        int64_t pixel_count = 0;
    };
    // Classes absent from both ground truth and prediction are excluded
    // from the mean.
    MiouResult miou() const;

    std::string report_json(const std::vector<std::string>& names) const;

private:
    int num_classes_;
    std::vector<int64_t> counts_;
};

}  // namespace nightseg
