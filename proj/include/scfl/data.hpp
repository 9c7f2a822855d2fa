#pragma once

#include "scfl/rng.hpp"
#include "scfl/types.hpp"

#include <string>
#include <vector>

namespace scfl {

// Global feature/label matrices. Immutable by convention after construction;
// devices hold row ranges into it instead of copies.
struct Dataset {
  Matrix features;  // m x d
  Matrix labels;    // m x o

  Index samples() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  Index label_dim() const { return labels.cols(); }
};

struct RowRange {
  Index begin = 0;
  Index size = 0;
};

// N disjoint contiguous ranges covering [0, m).
struct DevicePartition {
  std::vector<RowRange> ranges;

  Index device_count() const { return static_cast<Index>(ranges.size()); }
  MatrixView features_of(const Dataset& ds, Index device) const {
    const auto& r = ranges[static_cast<std::size_t>(device)];
    return ds.features.middleRows(r.begin, r.size);
  }
  MatrixView labels_of(const Dataset& ds, Index device) const {
    const auto& r = ranges[static_cast<std::size_t>(device)];
    return ds.labels.middleRows(r.begin, r.size);
  }
};

struct LabelSortSpec {
  Index shards_per_device = 1;
};

// Throws unless the ranges are disjoint, ordered and cover [0, m) exactly.
void validate_partition(const DevicePartition& p, Index m);

// Features uniform in [-1, 1] scaled so the max |entry| is exactly 1, labels
// X * W_true + N(0, noise_std^2). Pure function of its arguments. The drawn
// true model is written to w_true_out when given.
Dataset generate_synthetic(Seed seed, Index m, Index d, Index o, double noise_std,
                           Matrix* w_true_out = nullptr);

// Header must be f0..f{d-1},y0..y{o-1}; row order is preserved.
Dataset load_csv(const std::string& path, Index d, Index o);

void save_csv(const std::string& path, const Dataset& ds);

// Divides all features by max |X_ij| so every entry lands in [-1, 1].
// Idempotent bit-exactly. Labels are untouched.
Dataset normalize(const Dataset& ds);

// Label-sorted non-IID split: rows sorted by (first label column, original
// index), cut into N * shards_per_device shards (remainder joins the last
// shard), shards dealt to devices by a seeded permutation without
// replacement. Returns the reordered dataset; the partition ranges index
// into it, so each device's rows are contiguous.
std::pair<Dataset, DevicePartition> partition_noniid(const Dataset& ds, Index devices,
                                                     const LabelSortSpec& spec, Seed seed);

// Plain contiguous equal split in the existing row order.
DevicePartition partition_contiguous(Index m, Index devices);

}  // namespace scfl
