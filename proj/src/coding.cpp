#include "scfl/coding.hpp"

#include "scfl/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace scfl {

std::pair<Matrix, Matrix> draw_projection_factors(Seed seed, Index c, Index l, Index d,
                                                  double sigma2) {
  Rng rng(derive_seed(seed, 11));
  Matrix g = normal_matrix(rng, c, l);
  Matrix n = sigma2 > 0 ? normal_matrix(rng, c, d, std::sqrt(sigma2)) : Matrix::Zero(c, d);
  return {std::move(g), std::move(n)};
}

CodedShard encode_local(MatrixView local_features, MatrixView local_labels, Index c, double sigma2,
                        Seed seed) {
  if (c < 1) throw std::invalid_argument("encode_local: c must be >= 1");
  if (local_features.rows() < 1) throw std::invalid_argument("encode_local: empty local data");
  if (local_features.rows() != local_labels.rows())
    throw std::invalid_argument("encode_local: feature/label row mismatch");
  if (sigma2 < 0) throw std::invalid_argument("encode_local: sigma2 must be >= 0");

  const auto [g, n] = draw_projection_factors(seed, c, local_features.rows(), local_features.cols(), sigma2);
  CodedShard shard;
  shard.coded_features = g * local_features + n;
  shard.coded_labels = g * local_labels;
  shard.noise_level = sigma2;
  return shard;
}

GlobalCodedDataset build_global(const std::vector<CodedShard>& shards) {
  if (shards.empty()) throw std::invalid_argument("build_global: no shards");
  const Index c = shards.front().coded_count();
  const Index d = shards.front().coded_features.cols();
  const Index o = shards.front().coded_labels.cols();

  GlobalCodedDataset global;
  global.coded_features = Matrix::Zero(c, d);
  global.coded_labels = Matrix::Zero(c, o);
  for (const auto& s : shards) {
    if (s.coded_count() != c || s.coded_features.cols() != d || s.coded_labels.cols() != o)
      throw std::invalid_argument("build_global: shard shape mismatch");
    global.coded_features += s.coded_features;
    global.coded_labels += s.coded_labels;
    global.total_noise += s.noise_level;
  }
  return global;
}

AttackResult reconstruction_attack(const Matrix& coded_features, double sigma2,
                                   const Matrix& true_features,
                                   const std::vector<Index>& known_rows) {
  const Index l = true_features.rows();
  const Index d = true_features.cols();
  const Index c = coded_features.rows();
  const Index k = static_cast<Index>(known_rows.size());
  if (k < 1 || k >= l) throw std::invalid_argument("reconstruction_attack: need 1 <= k < l");
  if (coded_features.cols() != d) throw std::invalid_argument("reconstruction_attack: dim mismatch");

  Matrix known(k, d);
  std::vector<bool> is_known(static_cast<std::size_t>(l), false);
  for (Index i = 0; i < k; ++i) {
    known.row(i) = true_features.row(known_rows[static_cast<std::size_t>(i)]);
    is_known[static_cast<std::size_t>(known_rows[static_cast<std::size_t>(i)])] = true;
  }

  AttackResult res;
  // Degenerate least-squares system: the known block carries no usable
  // directions (all-zero rows being the canonical case).
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(known);
    qr.setThreshold(1e-10);
    if (qr.rank() < std::min(k, d)) {
      res.degenerate = true;
      res.normalized_error = std::numeric_limits<double>::quiet_NaN();
      return res;
    }
  }

  const Index r = l - k;
  Matrix truth(r, d);
  {
    Index row = 0;
    for (Index i = 0; i < l; ++i)
      if (!is_known[static_cast<std::size_t>(i)]) truth.row(row++) = true_features.row(i);
  }

  // Unknown-block Gram estimate from the coded second moment.
  Matrix gram = coded_features.transpose() * coded_features / static_cast<double>(c);
  gram -= sigma2 * Matrix::Identity(d, d);
  gram -= known.transpose() * known;
  gram = 0.5 * (gram + gram.transpose()).eval();

  // Best rank-r factor (Eckart-Young on the PSD part).
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  Matrix recon = Matrix::Zero(r, d);
  for (Index i = 0; i < r; ++i) {
    const Index idx = d - 1 - i;  // eigenvalues ascending
    if (idx < 0) break;
    const double lam = eig.eigenvalues()(idx);
    if (lam <= 0) continue;
    recon.row(i) = std::sqrt(lam) * eig.eigenvectors().col(idx).transpose();
  }

  // The factor is identified only up to a left orthogonal transform; align to
  // the truth before scoring.
  const Matrix cross = truth * recon.transpose();
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix q = svd.matrixU() * svd.matrixV().transpose();
  const double denom = truth.norm();
  res.normalized_error = denom > 0 ? (q * recon - truth).norm() / denom
                                   : (q * recon - truth).norm();
  return res;
}

AttackResult reconstruction_attack(const CodedShard& shard, const Matrix& true_features,
                                   const std::vector<Index>& known_rows) {
  return reconstruction_attack(shard.coded_features, shard.noise_level, true_features, known_rows);
}

AttackResult reconstruction_attack(const GlobalCodedDataset& coded, const Matrix& true_features,
                                   const std::vector<Index>& known_rows) {
  return reconstruction_attack(coded.coded_features, coded.total_noise, true_features, known_rows);
}

void save_shard_csv(const std::string& path, const CodedShard& shard, Seed seed_id) {
  csv::Table t;
  const Index d = shard.coded_features.cols();
  const Index o = shard.coded_labels.cols();
  for (Index j = 0; j < d; ++j) t.header.push_back("f" + std::to_string(j));
  for (Index j = 0; j < o; ++j) t.header.push_back("y" + std::to_string(j));
  for (Index i = 0; i < shard.coded_count(); ++i) {
    std::vector<double> row;
    for (Index j = 0; j < d; ++j) row.push_back(shard.coded_features(i, j));
    for (Index j = 0; j < o; ++j) row.push_back(shard.coded_labels(i, j));
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);

  nlohmann::json meta;
  meta["coded_count"] = shard.coded_count();
  meta["sigma2"] = shard.noise_level;
  meta["seed"] = seed_id;
  std::ofstream out(path + ".meta.json");
  if (!out) throw std::runtime_error("save_shard_csv: cannot write sidecar for '" + path + "'");
  out << meta.dump(2) << '\n';
}

CodedShard load_shard_csv(const std::string& path, Index d, Index o, Seed* seed_id) {
  const auto table = csv::read(path);
  if (table.header.size() != static_cast<std::size_t>(d + o))
    throw std::runtime_error("load_shard_csv: column count mismatch in '" + path + "'");

  std::ifstream in(path + ".meta.json");
  if (!in) throw std::runtime_error("load_shard_csv: missing sidecar '" + path + ".meta.json'");
  nlohmann::json meta = nlohmann::json::parse(in);

  CodedShard shard;
  const Index c = static_cast<Index>(table.rows.size());
  shard.coded_features.resize(c, d);
  shard.coded_labels.resize(c, o);
  for (Index i = 0; i < c; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) shard.coded_features(i, j) = row[static_cast<std::size_t>(j)];
    for (Index j = 0; j < o; ++j) shard.coded_labels(i, j) = row[static_cast<std::size_t>(d + j)];
  }
  shard.noise_level = meta.at("sigma2").get<double>();
  if (meta.at("coded_count").get<Index>() != c)
    throw std::runtime_error("load_shard_csv: sidecar coded_count disagrees with '" + path + "'");
  if (seed_id) *seed_id = meta.at("seed").get<Seed>();
  return shard;
}

}  // namespace scfl
