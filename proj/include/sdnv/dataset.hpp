#pragma once

#include "sdnv/linrules.hpp"

#include <string>
#include <vector>

namespace sdnv {

/// Labeled samples stored column-wise: inputs.col(i) is sample i.
struct Dataset {
    Matrix inputs;
    std::vector<int> labels;
    int classes = 0;
    Box input_bounds;
    std::string split = "train";

    Eigen::Index size() const { return inputs.cols(); }
    Eigen::Index dim() const { return inputs.rows(); }

    /// Checks label range, shape agreement and that inputs lie in bounds.
    void validate() const;

    /// Samples [first, first+count) as a new dataset.
    Dataset slice(Eigen::Index first, Eigen::Index count) const;
};

}  // namespace sdnv
