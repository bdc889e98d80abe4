#pragma once

#include "ssr/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ssr {

// Frames x dims matrix with a label per column. Used for EMG features, mel
// spectrograms and projected views alike.
struct FeatureMatrix {
  Matrix data;
  std::vector<std::string> dim_labels;
  double frame_stride_s = 0.0116;
  double frame_length_s = 0.031;

  Eigen::Index frames() const noexcept { return data.rows(); }
  Eigen::Index dims() const noexcept { return data.cols(); }

  // Throws Error(Parameter) when labels disagree with dims, timing is not
  // positive, or any entry is NaN/Inf.
  void validate() const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

}  // namespace ssr
