#pragma once

#include <string>
#include <vector>

#include "airfl/common.hpp"
#include "airfl/rng.hpp"

namespace airfl {

/// Loader output: one row per sample, integer class ids. Binary tasks carry
/// labels in {0, 1} after filtering.
struct RawDataset {
  RMat features;
  std::vector<int> labels;

  std::size_t samples() const {
    return static_cast<std::size_t>(features.rows());
  }
};

/// Read an IDX image/label pair (gzip-compressed files are inflated
/// transparently). Pixels come back row-major in [0, 1].
RawDataset load_idx(const std::string& images_path,
                    const std::string& labels_path);

/// Keep only two classes and relabel them 0/1.
RawDataset binary_task_filter(const RawDataset& raw, int class_a, int class_b);

/// Per-feature affine normalization fitted on a training split.
struct FeatureScaler {
  RVec mean;
  RVec scale;  // standard deviation, floored so constant features map to 0
};

FeatureScaler fit_feature_scaler(const RMat& features);
RMat apply_feature_scaler(const FeatureScaler& scaler, const RMat& features);

enum class PartitionPolicy { Contiguous, Strided };

/// One cell's vertically partitioned task: per-device feature blocks over
/// the same L samples in the same order, labels held apart from the blocks
/// (they belong to the BS role and never enter device-side structures).
struct VerticalDataset {
  std::vector<RMat> blocks;
  /// columns[k][c] is the original feature index of block k's column c.
  std::vector<std::vector<Eigen::Index>> columns;
  RVec labels;

  std::size_t devices() const { return blocks.size(); }
  std::size_t samples() const {
    return blocks.empty() ? 0 : static_cast<std::size_t>(blocks[0].rows());
  }
  Eigen::Index dim() const;

  /// Scatter the blocks back into the original column order.
  RMat concatenated() const;

  /// Alignment invariants: equal row counts, labels match, and the column
  /// map is a partition of the full feature index range.
  void validate() const;
};

/// Split features into K per-device blocks. Contiguous blocks have sizes
/// differing by at most one; strided assigns column c to device c mod K.
VerticalDataset vertical_partition(const RawDataset& data, std::size_t devices,
                                   PartitionPolicy policy);

/// Two Gaussian clusters at +-separation/2 along a random direction, unit
/// noise, alternating labels (exact class balance).
RawDataset make_synthetic(std::size_t samples, Eigen::Index dim,
                          double separation, Rng& rng);

/// Random subset of `count` samples without replacement, original order
/// preserved. Returns a copy when count >= samples.
RawDataset subsample(const RawDataset& data, std::size_t count, Rng& rng);

}  // namespace airfl
