#pragma once

#include "scfl/rng.hpp"
#include "scfl/types.hpp"

#include <vector>

namespace scfl {

struct DeviceProfile {
  double mac_rate = 0;    // MAC ops per second
  double tx_power_w = 0;  // watts
  Index local_samples = 0;
};

struct ChannelModel {
  double bandwidth_hz = 0;
  double noise_power_w = 0;
  double mean_gain = 0;        // mean of the exponential |h|^2
  double update_size_bits = 0;
  double t_download_s = 0;
  double round_deadline_s = 0;
  double mac_per_sample = 0;   // MAC ops to process one sample in one step
};

struct RoundTiming {
  double compute_s = 0;
  double upload_s = 0;
  double total_s = 0;  // t_download + compute + upload
  bool arrived = false;
};

double watts_from_dbm(double dbm);

// tau * b * N_MAC / MACR_i
double compute_time(const DeviceProfile& dev, const ChannelModel& ch, Index tau, Index batch);

// B * log2(1 + gain * P / N0); zero when the realized gain is zero.
double uplink_rate(const DeviceProfile& dev, const ChannelModel& ch, double gain);

// Samples |h|^2 ~ Exp(mean_gain) and assembles the round timing.
RoundTiming draw_round(const DeviceProfile& dev, const ChannelModel& ch, Index tau, Index batch,
                       Rng& rng);

// Closed form P[t <= T] under exponential fading: with s = T - t_D - t_C(b),
// returns exp(-theta / gamma) for theta = (2^(M/(B s)) - 1) N0 / P, or 0 when
// s <= 0.
double arrival_probability(const DeviceProfile& dev, const ChannelModel& ch, Index tau, Index batch);

// Largest b in [1, l_i] meeting the deadline at the realized gain, computed
// from the linear bound; 0 when even b = 1 misses it.
Index adapt_batch(const DeviceProfile& dev, const ChannelModel& ch, Index tau, double gain);

// Bisects on bandwidth until mean_i (1 - p_i) is within tol of target_ratio.
// batch = 0 evaluates each device at its full local batch. Throws when the
// target is not bracketed by [bw_lo, bw_hi].
ChannelModel straggler_calibrate(double target_ratio, const std::vector<DeviceProfile>& fleet,
                                 const ChannelModel& ch, Index tau, Index batch,
                                 double tol = 1e-3, double bw_lo = 1.0, double bw_hi = 1e15);

}  // namespace scfl
