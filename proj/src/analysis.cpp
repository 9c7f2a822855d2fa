#include "scfl/analysis.hpp"

#include "scfl/csv.hpp"
#include "scfl/rng.hpp"

#include <fstream>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace scfl {

double spectral_smoothness(const Matrix& features, double rel_tol) {
  const Matrix gram = features.transpose() * features;
  const Index d = gram.rows();
  Vector v = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  double lambda = 0;
  for (int it = 0; it < 10000; ++it) {
    Vector w = gram * v;
    const double norm = w.norm();
    if (norm == 0) return 0;
    w /= norm;
    const double next = w.dot(gram * w);
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
    lambda = next;
    v = w;
  }
  return lambda;
}

ProblemConstants estimate_constants(const Dataset& ds, const DevicePartition& part, double phi) {
  if (phi <= 0) throw std::invalid_argument("estimate_constants: phi must be > 0");
  if (part.ranges.empty()) throw std::invalid_argument("estimate_constants: empty partition");

  ProblemConstants c;
  c.phi = phi;
  for (Index i = 0; i < part.device_count(); ++i) {
    const double x_norm = part.features_of(ds, i).norm();
    const double y_norm = part.labels_of(ds, i).norm();
    const double zeta_sq = x_norm * x_norm;
    const double kappa_sq = (x_norm * phi + y_norm) * (x_norm * phi + y_norm);
    c.alpha_sq.push_back(zeta_sq);
    c.zeta_sq.push_back(zeta_sq);
    c.kappa_sq.push_back(kappa_sq);
    c.alpha += zeta_sq;
    c.zeta_global = std::max(c.zeta_global, zeta_sq);
    c.kappa_global = std::max(c.kappa_global, kappa_sq);
  }
  c.smoothness = spectral_smoothness(ds.features);
  return c;
}

double rho1(const ProblemConstants& consts, const std::vector<double>& p,
            const std::vector<Index>& batches, const std::vector<Index>& local_sizes, Index tau) {
  const std::size_t n = consts.zeta_sq.size();
  if (p.size() != n || batches.size() != n || local_sizes.size() != n)
    throw std::invalid_argument("rho1: per-device list length mismatch");
  double arrivals = 0, sampling = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] <= 0 || p[i] > 1) throw std::invalid_argument("rho1: p_i must be in (0, 1]");
    if (batches[i] < 1) throw std::invalid_argument("rho1: batch must be >= 1");
    const double zk = consts.zeta_sq[i] * consts.kappa_sq[i];
    const double li = static_cast<double>(local_sizes[i]);
    const double bi = static_cast<double>(batches[i]);
    arrivals += (1.0 - p[i]) / p[i] * zk;
    sampling += li * (li - bi) / bi * zk;
  }
  return 2.0 * static_cast<double>(tau) * (arrivals + sampling);
}

double rho2(const ProblemConstants& consts, const std::vector<double>& sigma2s, Index c, Index m,
            Index d, Index n_dim, Index tau) {
  if (c < 1) throw std::invalid_argument("rho2: c must be >= 1");
  double sum_sigma2 = 0, sum_sigma4 = 0;
  for (double s2 : sigma2s) {
    sum_sigma2 += s2;
    sum_sigma4 += s2 * s2;
  }
  const double tc = static_cast<double>(tau) / static_cast<double>(c);
  const double md = static_cast<double>(m);
  const double dd = static_cast<double>(d);
  const double phi2 = consts.phi * consts.phi;
  double v = 4.0 * tc * (md + md * md) * consts.zeta_global * consts.kappa_global;
  v += 4.0 * tc * (dd + dd * dd) * phi2 * sum_sigma4;
  v += 4.0 * dd * md * static_cast<double>(n_dim) * static_cast<double>(tau) /
       (static_cast<double>(c) * static_cast<double>(c)) *
       (consts.zeta_global * phi2 + consts.kappa_global) * sum_sigma2;
  return v;
}

double theorem1_bound(const ProblemConstants& consts, const VarianceBound& bound,
                      const std::function<double(Index)>& schedule, Index rounds, const Matrix& w0,
                      const Matrix& w_opt) {
  if (rounds < 1) throw std::invalid_argument("theorem1_bound: rounds must be >= 1");
  double sum_eta = 0, sum_eta_sq = 0;
  for (Index k = 0; k < rounds; ++k) {
    const double eta = schedule(k);
    if (eta * consts.smoothness >= 1.0)
      throw std::invalid_argument("theorem1_bound: schedule violates eta_k * L < 1");
    sum_eta += eta;
    sum_eta_sq += eta * eta;
  }
  const double eta0 = schedule(0);
  const double dist_sq = (w0 - w_opt).squaredNorm();
  return (1.0 - consts.alpha * eta0) / (2.0 * sum_eta) * dist_sq +
         sum_eta_sq / sum_eta * bound.rho();
}

namespace {

MomentCheck finish(double estimate, double reference) {
  MomentCheck mc;
  mc.estimate = estimate;
  mc.reference = reference;
  mc.rel_error = reference != 0 ? std::abs(estimate - reference) / reference
                                : std::abs(estimate - reference);
  return mc;
}

}  // namespace

WishartReport wishart_selfcheck(Index m, Index c, Index d, const std::vector<double>& sigma2s,
                                int draws, Seed seed, Index b_s, Index l, Index b) {
  if (draws < 1000) throw std::invalid_argument("wishart_selfcheck: need >= 1000 draws");
  if (b_s < 1 || b_s > c || b < 1 || b > l)
    throw std::invalid_argument("wishart_selfcheck: batch sizes out of range");

  double sum_sigma2 = 0, sum_sigma4 = 0;
  for (double s2 : sigma2s) {
    sum_sigma2 += s2;
    sum_sigma4 += s2 * s2;
  }

  double acc_proj = 0, acc_noise = 0, acc_srv = 0, acc_dev = 0;
  const Matrix eye_m = Matrix::Identity(m, m);
  const Matrix eye_d = Matrix::Identity(d, d);
  for (int r = 0; r < draws; ++r) {
    Rng rng(derive_seed(seed, 21, static_cast<Seed>(r)));

    const Matrix g = normal_matrix(rng, c, m);
    acc_proj += (g.transpose() * g / static_cast<double>(c) - eye_m).squaredNorm();

    Matrix noise = Matrix::Zero(c, d);
    for (double s2 : sigma2s)
      if (s2 > 0) noise += normal_matrix(rng, c, d, std::sqrt(s2));
    acc_noise += (noise.transpose() * noise / static_cast<double>(c) - sum_sigma2 * eye_d).squaredNorm();

    double srv = 0;
    const double ps = static_cast<double>(b_s) / static_cast<double>(c);
    for (Index j = 0; j < c; ++j) {
      const double v = rng.bernoulli(ps) ? static_cast<double>(c) / static_cast<double>(b_s) : 0.0;
      srv += (v - 1.0) * (v - 1.0);
    }
    acc_srv += srv;

    double dev = 0;
    const double pd = static_cast<double>(b) / static_cast<double>(l);
    for (Index j = 0; j < l; ++j) {
      const double v = rng.bernoulli(pd) ? static_cast<double>(l) / static_cast<double>(b) : 0.0;
      dev += (v - 1.0) * (v - 1.0);
    }
    acc_dev += dev;
  }

  const double md = static_cast<double>(m), dd = static_cast<double>(d);
  const double cs = static_cast<double>(c), ls = static_cast<double>(l);
  const double bs = static_cast<double>(b_s), bd = static_cast<double>(b);
  WishartReport rep;
  rep.projection = finish(acc_proj / draws, (md + md * md) / cs);
  rep.noise = finish(acc_noise / draws, (dd + dd * dd) / cs * sum_sigma4);
  rep.server_sampling = finish(acc_srv / draws, cs * (cs - bs) / bs);
  rep.device_sampling = finish(acc_dev / draws, ls * (ls - bd) / bd);
  return rep;
}

void write_moment_report_csv(const std::string& path, const WishartReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_moment_report_csv: cannot write '" + path + "'");
  out << "quantity,value,empirical,ratio\n";
  auto row = [&](const char* name, const MomentCheck& mc) {
    const double ratio = mc.reference != 0 ? mc.estimate / mc.reference
                                           : std::numeric_limits<double>::quiet_NaN();
    out << name << ',' << csv::format_double(mc.reference) << ','
        << csv::format_double(mc.estimate) << ',' << csv::format_double(ratio) << '\n';
  };
  row("projection_second_moment", report.projection);
  row("noise_second_moment", report.noise);
  row("server_sampling_second_moment", report.server_sampling);
  row("device_sampling_second_moment", report.device_sampling);
}

}  // namespace scfl
