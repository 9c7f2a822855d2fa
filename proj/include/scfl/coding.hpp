#pragma once

#include "scfl/rng.hpp"
#include "scfl/types.hpp"

#include <string>
#include <vector>

namespace scfl {

// Per-device coded data: X~ = G X + N, Y~ = G Y.
struct CodedShard {
  Matrix coded_features;   // c x d
  Matrix coded_labels;     // c x o
  double noise_level = 0;  // sigma_i^2

  Index coded_count() const { return coded_features.rows(); }
};

// Elementwise sum of all shards; total_noise = sum of sigma_i^2.
struct GlobalCodedDataset {
  Matrix coded_features;
  Matrix coded_labels;
  double total_noise = 0;

  Index coded_count() const { return coded_features.rows(); }
};

// The projection G (c x l, iid standard normal) and noise N (c x d, iid
// N(0, sigma2)) a given encode seed produces. encode_local draws exactly
// these and discards them; this hook exists for tests and diagnostics only,
// production paths must not call it.
std::pair<Matrix, Matrix> draw_projection_factors(Seed seed, Index c, Index l, Index d,
                                                  double sigma2);

CodedShard encode_local(MatrixView local_features, MatrixView local_labels, Index c, double sigma2,
                        Seed seed);

// Fixed summation order (list order = ascending device id) for bit
// reproducibility.
GlobalCodedDataset build_global(const std::vector<CodedShard>& shards);

struct AttackResult {
  double normalized_error = 0;  // ||reconstructed - truth||_F / ||truth||_F over unknown rows
  bool degenerate = false;      // singular least-squares system (e.g. all-zero known rows)
};

// Known-sample leakage probe: least-squares completion of the raw Gram from
// the coded second moment, (1/c) X~^T X~ - sigma2 I - Xk^T Xk, followed by a
// best rank-(l-k) factorization of the remainder. The factor is determined
// only up to an orthogonal transform (a sign, when one row is unknown), so
// the score aligns it to the truth by orthogonal Procrustes before measuring
// the error. Ordinary least squares throughout, no regularization.
// true_features is used for scoring only; the reconstruction sees just the
// coded matrix, the recorded noise level and the known rows.
AttackResult reconstruction_attack(const Matrix& coded_features, double sigma2,
                                   const Matrix& true_features,
                                   const std::vector<Index>& known_rows);

AttackResult reconstruction_attack(const CodedShard& shard, const Matrix& true_features,
                                   const std::vector<Index>& known_rows);
AttackResult reconstruction_attack(const GlobalCodedDataset& coded, const Matrix& true_features,
                                   const std::vector<Index>& known_rows);

// Shards travel in the dataset CSV schema plus a JSON sidecar
// (<path>.meta.json) recording c, sigma_i^2 and the seed id.
void save_shard_csv(const std::string& path, const CodedShard& shard, Seed seed_id);
CodedShard load_shard_csv(const std::string& path, Index d, Index o, Seed* seed_id = nullptr);

}  // namespace scfl
