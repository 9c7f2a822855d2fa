#include "scfl/data.hpp"

#include "scfl/csv.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace scfl {

void validate_partition(const DevicePartition& p, Index m) {
  Index cursor = 0;
  for (const auto& r : p.ranges) {
    if (r.begin != cursor || r.size <= 0)
      throw std::invalid_argument("partition: ranges must be disjoint, ordered and cover [0, m)");
    cursor += r.size;
  }
  if (cursor != m) throw std::invalid_argument("partition: ranges do not cover [0, m)");
}

Dataset generate_synthetic(Seed seed, Index m, Index d, Index o, double noise_std,
                           Matrix* w_true_out) {
  if (m < 1 || d < 1 || o < 1) throw std::invalid_argument("generate_synthetic: m, d, o must be >= 1");
  if (noise_std < 0) throw std::invalid_argument("generate_synthetic: noise_std must be >= 0");

  Rng fx(derive_seed(seed, 1));
  Rng fw(derive_seed(seed, 2));
  Rng fn(derive_seed(seed, 3));

  Dataset ds;
  ds.features = uniform_matrix(fx, m, d, -1.0, 1.0);
  const double scale = ds.features.cwiseAbs().maxCoeff();
  if (scale > 0) ds.features /= scale;

  const Matrix w_true = normal_matrix(fw, d, o);
  ds.labels = ds.features * w_true;
  if (noise_std > 0) ds.labels += normal_matrix(fn, m, o, noise_std);
  if (w_true_out) *w_true_out = w_true;
  return ds;
}

Dataset load_csv(const std::string& path, Index d, Index o) {
  const auto table = csv::read(path);
  const std::size_t want = static_cast<std::size_t>(d + o);
  if (table.header.size() != want)
    throw std::runtime_error("load_csv: '" + path + "' has " + std::to_string(table.header.size()) +
                             " columns, expected " + std::to_string(want));
  for (Index j = 0; j < d; ++j) {
    const std::string expect = "f" + std::to_string(j);
    if (table.header[static_cast<std::size_t>(j)] != expect)
      throw std::runtime_error("load_csv: column " + std::to_string(j + 1) + " is named '" +
                               table.header[static_cast<std::size_t>(j)] + "', expected '" + expect + "'");
  }
  for (Index j = 0; j < o; ++j) {
    const std::string expect = "y" + std::to_string(j);
    if (table.header[static_cast<std::size_t>(d + j)] != expect)
      throw std::runtime_error("load_csv: column " + std::to_string(d + j + 1) + " is named '" +
                               table.header[static_cast<std::size_t>(d + j)] + "', expected '" + expect + "'");
  }
  const Index m = static_cast<Index>(table.rows.size());
  if (m == 0) throw std::runtime_error("load_csv: '" + path + "' has no data rows");

  Dataset ds;
  ds.features.resize(m, d);
  ds.labels.resize(m, o);
  for (Index i = 0; i < m; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) ds.features(i, j) = row[static_cast<std::size_t>(j)];
    for (Index j = 0; j < o; ++j) ds.labels(i, j) = row[static_cast<std::size_t>(d + j)];
  }
  return ds;
}

void save_csv(const std::string& path, const Dataset& ds) {
  csv::Table t;
  for (Index j = 0; j < ds.feature_dim(); ++j) t.header.push_back("f" + std::to_string(j));
  for (Index j = 0; j < ds.label_dim(); ++j) t.header.push_back("y" + std::to_string(j));
  t.rows.reserve(static_cast<std::size_t>(ds.samples()));
  for (Index i = 0; i < ds.samples(); ++i) {
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(ds.feature_dim() + ds.label_dim()));
    for (Index j = 0; j < ds.feature_dim(); ++j) row.push_back(ds.features(i, j));
    for (Index j = 0; j < ds.label_dim(); ++j) row.push_back(ds.labels(i, j));
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

Dataset normalize(const Dataset& ds) {
  const double scale = ds.features.cwiseAbs().maxCoeff();
  if (scale == 0) throw std::invalid_argument("normalize: all-zero feature matrix");
  Dataset out;
  out.features = ds.features / scale;
  out.labels = ds.labels;
  return out;
}

std::pair<Dataset, DevicePartition> partition_noniid(const Dataset& ds, Index devices,
                                                     const LabelSortSpec& spec, Seed seed) {
  const Index m = ds.samples();
  if (devices < 1 || devices > m) throw std::invalid_argument("partition_noniid: need 1 <= N <= m");
  if (spec.shards_per_device < 1) throw std::invalid_argument("partition_noniid: shards_per_device >= 1");

  // Stable order: first label column, then original index.
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return ds.labels(a, 0) < ds.labels(b, 0); });

  const Index shard_count = devices * spec.shards_per_device;
  if (shard_count > m) throw std::invalid_argument("partition_noniid: more shards than samples");
  const Index base = m / shard_count;
  std::vector<std::pair<Index, Index>> shards;  // (begin, size) in sorted order
  for (Index s = 0; s < shard_count; ++s) {
    const Index begin = s * base;
    const Index size = (s == shard_count - 1) ? m - begin : base;
    shards.emplace_back(begin, size);
  }

  Rng rng(derive_seed(seed, 4));
  const auto perm = random_permutation(rng, shard_count);

  // Rebuild the row order so every device owns a contiguous block.
  Dataset out;
  out.features.resize(m, ds.feature_dim());
  out.labels.resize(m, ds.label_dim());
  DevicePartition part;
  Index cursor = 0;
  for (Index dev = 0; dev < devices; ++dev) {
    const Index begin = cursor;
    for (Index s = 0; s < spec.shards_per_device; ++s) {
      const auto& shard = shards[static_cast<std::size_t>(perm[static_cast<std::size_t>(dev * spec.shards_per_device + s)])];
      for (Index i = 0; i < shard.second; ++i) {
        const Index src = order[static_cast<std::size_t>(shard.first + i)];
        out.features.row(cursor) = ds.features.row(src);
        out.labels.row(cursor) = ds.labels.row(src);
        ++cursor;
      }
    }
    part.ranges.push_back({begin, cursor - begin});
  }
  validate_partition(part, m);
  return {std::move(out), std::move(part)};
}

DevicePartition partition_contiguous(Index m, Index devices) {
  if (devices < 1 || devices > m) throw std::invalid_argument("partition_contiguous: need 1 <= N <= m");
  DevicePartition part;
  const Index base = m / devices;
  Index cursor = 0;
  for (Index dev = 0; dev < devices; ++dev) {
    const Index size = (dev == devices - 1) ? m - cursor : base;
    part.ranges.push_back({cursor, size});
    cursor += size;
  }
  validate_partition(part, m);
  return part;
}

}  // namespace scfl
