#include "scfl/system.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace scfl {

double watts_from_dbm(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double compute_time(const DeviceProfile& dev, const ChannelModel& ch, Index tau, Index batch) {
  if (tau < 1 || batch < 1) throw std::invalid_argument("compute_time: tau and batch must be >= 1");
  return static_cast<double>(tau) * static_cast<double>(batch) * ch.mac_per_sample / dev.mac_rate;
}

double uplink_rate(const DeviceProfile& dev, const ChannelModel& ch, double gain) {
  if (gain <= 0) return 0.0;
  return ch.bandwidth_hz * std::log2(1.0 + gain * dev.tx_power_w / ch.noise_power_w);
}

RoundTiming draw_round(const DeviceProfile& dev, const ChannelModel& ch, Index tau, Index batch,
                       Rng& rng) {
  RoundTiming rt;
  rt.compute_s = compute_time(dev, ch, tau, batch);
  const double gain = rng.exponential(ch.mean_gain);
  const double rate = uplink_rate(dev, ch, gain);
  if (ch.update_size_bits <= 0) {
    rt.upload_s = 0.0;
  } else {
    rt.upload_s = rate > 0 ? ch.update_size_bits / rate : std::numeric_limits<double>::infinity();
  }
  rt.total_s = ch.t_download_s + rt.compute_s + rt.upload_s;
  rt.arrived = rt.total_s <= ch.round_deadline_s;
  return rt;
}

double arrival_probability(const DeviceProfile& dev, const ChannelModel& ch, Index tau, Index batch) {
  const double slack = ch.round_deadline_s - ch.t_download_s - compute_time(dev, ch, tau, batch);
  if (slack <= 0) return 0.0;
  if (ch.update_size_bits <= 0) return 1.0;
  const double threshold =
      (std::exp2(ch.update_size_bits / (ch.bandwidth_hz * slack)) - 1.0) * ch.noise_power_w / dev.tx_power_w;
  return std::exp(-threshold / ch.mean_gain);
}

Index adapt_batch(const DeviceProfile& dev, const ChannelModel& ch, Index tau, double gain) {
  if (gain < 0) throw std::invalid_argument("adapt_batch: gain must be >= 0");
  const double rate = uplink_rate(dev, ch, gain);
  double upload = 0.0;
  if (ch.update_size_bits > 0) {
    if (rate <= 0) return 0;
    upload = ch.update_size_bits / rate;
  }
  const double slack = ch.round_deadline_s - ch.t_download_s - upload;
  if (slack <= 0) return 0;
  const double bound = slack * dev.mac_rate / (static_cast<double>(tau) * ch.mac_per_sample);
  const Index b = static_cast<Index>(std::floor(bound));
  return std::min(std::max<Index>(b, 0), dev.local_samples);
}

ChannelModel straggler_calibrate(double target_ratio, const std::vector<DeviceProfile>& fleet,
                                 const ChannelModel& ch, Index tau, Index batch, double tol,
                                 double bw_lo, double bw_hi) {
  if (target_ratio < 0 || target_ratio >= 1)
    throw std::invalid_argument("straggler_calibrate: target_ratio must be in [0, 1)");
  if (fleet.empty()) throw std::invalid_argument("straggler_calibrate: empty fleet");

  auto ratio_at = [&](double bw) {
    ChannelModel c = ch;
    c.bandwidth_hz = bw;
    double sum = 0;
    for (const auto& dev : fleet) {
      const Index b = batch > 0 ? batch : dev.local_samples;  // 0 = full local batch
      sum += 1.0 - arrival_probability(dev, c, tau, b);
    }
    return sum / static_cast<double>(fleet.size());
  };

  // Straggler ratio is non-increasing in bandwidth.
  double lo = bw_lo, hi = bw_hi;
  const double at_hi = ratio_at(hi), at_lo = ratio_at(lo);
  if (at_hi > target_ratio + tol || at_lo < target_ratio - tol)
    throw std::runtime_error("straggler_calibrate: target ratio not reachable within bandwidth bracket");

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = ratio_at(mid);
    if (std::abs(r - target_ratio) <= tol) {
      ChannelModel c = ch;
      c.bandwidth_hz = mid;
      return c;
    }
    if (r > target_ratio) {
      lo = mid;  // too many stragglers, need more bandwidth
    } else {
      hi = mid;
    }
  }
  ChannelModel c = ch;
  c.bandwidth_hz = 0.5 * (lo + hi);
  if (std::abs(ratio_at(c.bandwidth_hz) - target_ratio) > tol)
    throw std::runtime_error("straggler_calibrate: bisection did not converge to tolerance");
  return c;
}

}  // namespace scfl
