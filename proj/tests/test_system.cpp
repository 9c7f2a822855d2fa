#include "scfl/system.hpp"

#include <doctest.h>

#include <cmath>

using namespace scfl;

namespace {

DeviceProfile unit_device() {
  DeviceProfile d;
  d.mac_rate = 1000;
  d.tx_power_w = watts_from_dbm(20);
  d.local_samples = 64;
  return d;
}

ChannelModel paper_channel() {
  ChannelModel ch;
  ch.bandwidth_hz = 180e3;
  ch.noise_power_w = 1e-10;  // -70 dBm
  ch.mean_gain = 1e-8;
  ch.update_size_bits = 5e5;
  ch.t_download_s = 0.5;
  ch.round_deadline_s = 10.0;
  ch.mac_per_sample = 5.0;
  return ch;
}

// Monte Carlo arrival frequency.
double empirical_arrival(const DeviceProfile& dev, const ChannelModel& ch, Index tau, Index b,
                         Seed seed, int draws) {
  Rng rng(seed);
  int arrived = 0;
  for (int i = 0; i < draws; ++i) arrived += draw_round(dev, ch, tau, b, rng).arrived;
  return arrived / static_cast<double>(draws);
}

}  // namespace

TEST_CASE("compute time is the mac-count ratio") {
  DeviceProfile dev = unit_device();
  ChannelModel ch = paper_channel();
  ch.mac_per_sample = 1000;
  dev.mac_rate = 1000;
  CHECK(compute_time(dev, ch, 1, 1) == 1.0);
  CHECK(compute_time(dev, ch, 1, 2) == 2.0 * compute_time(dev, ch, 1, 1));
  CHECK(compute_time(dev, ch, 3, 2) == 3.0 * compute_time(dev, ch, 1, 2));
}

TEST_CASE("paper-scale mac rate stays linear in tau times batch") {
  DeviceProfile dev = unit_device();
  dev.mac_rate = 1.0 * 1536e3;  // mu_comp = 1.0 at 1536 KMAC/s
  ChannelModel ch = paper_channel();
  const double t = compute_time(dev, ch, 5, 32);
  CHECK(t == doctest::Approx(5.0 * 32.0 * ch.mac_per_sample / 1536e3));
  CHECK(compute_time(dev, ch, 10, 32) == doctest::Approx(2.0 * t));
}

TEST_CASE("zero update size means zero upload time") {
  DeviceProfile dev = unit_device();
  ChannelModel ch = paper_channel();
  ch.update_size_bits = 0;
  Rng rng(5);
  const RoundTiming rt = draw_round(dev, ch, 1, 4, rng);
  CHECK(rt.upload_s == 0.0);
  CHECK(rt.arrived == (ch.t_download_s + rt.compute_s <= ch.round_deadline_s));
  CHECK(rt.total_s == ch.t_download_s + rt.compute_s + rt.upload_s);
}

TEST_CASE("download beyond the deadline can never arrive") {
  DeviceProfile dev = unit_device();
  ChannelModel ch = paper_channel();
  ch.t_download_s = ch.round_deadline_s + 1.0;
  Rng rng(6);
  for (int i = 0; i < 100; ++i) CHECK_FALSE(draw_round(dev, ch, 1, 1, rng).arrived);
  CHECK(arrival_probability(dev, ch, 1, 1) == 0.0);
}

TEST_CASE("arrival probability closed form matches Monte Carlo") {
  DeviceProfile dev = unit_device();
  dev.mac_rate = 1536e3;
  ChannelModel ch = paper_channel();
  for (double bw : {30e3, 60e3, 180e3}) {
    ch.bandwidth_hz = bw;
    const double analytic = arrival_probability(dev, ch, 5, 32);
    const double mc = empirical_arrival(dev, ch, 5, 32, 1234, 100000);
    CHECK(std::abs(analytic - mc) < 0.01);
  }
}

TEST_CASE("instant upload makes arrival certain when slack is positive") {
  DeviceProfile dev = unit_device();
  dev.mac_rate = 1536e3;
  ChannelModel ch = paper_channel();
  ch.update_size_bits = 0;
  CHECK(arrival_probability(dev, ch, 1, 1) == 1.0);
}

TEST_CASE("arrival probability is monotone in each parameter") {
  DeviceProfile dev = unit_device();
  dev.mac_rate = 20e3;
  ChannelModel ch = paper_channel();
  ch.mac_per_sample = 50;
  auto p = [&](auto mutate) {
    DeviceProfile d2 = dev;
    ChannelModel c2 = ch;
    Index tau = 2, b = 8;
    mutate(d2, c2, tau, b);
    return arrival_probability(d2, c2, tau, b);
  };
  const double base = p([](DeviceProfile&, ChannelModel&, Index&, Index&) {});
  CHECK(base > 0.01);
  CHECK(base < 0.999);
  // non-increasing in b, tau, M
  CHECK(p([](DeviceProfile&, ChannelModel&, Index&, Index& b) { b *= 2; }) <= base);
  CHECK(p([](DeviceProfile&, ChannelModel&, Index& tau, Index&) { tau *= 2; }) <= base);
  CHECK(p([](DeviceProfile&, ChannelModel& c, Index&, Index&) { c.update_size_bits *= 2; }) <= base);
  // non-decreasing in T, B, gamma, P
  CHECK(p([](DeviceProfile&, ChannelModel& c, Index&, Index&) { c.round_deadline_s *= 2; }) >= base);
  CHECK(p([](DeviceProfile&, ChannelModel& c, Index&, Index&) { c.bandwidth_hz *= 2; }) >= base);
  CHECK(p([](DeviceProfile&, ChannelModel& c, Index&, Index&) { c.mean_gain *= 2; }) >= base);
  CHECK(p([](DeviceProfile& d, ChannelModel&, Index&, Index&) { d.tx_power_w *= 2; }) >= base);
}

TEST_CASE("adaptive batch clamps to the local sample count") {
  DeviceProfile dev = unit_device();
  dev.mac_rate = 1e12;
  ChannelModel ch = paper_channel();
  ch.round_deadline_s = 1e6;
  CHECK(adapt_batch(dev, ch, 1, 1e6) == dev.local_samples);
}

TEST_CASE("zero gain makes upload impossible") {
  DeviceProfile dev = unit_device();
  ChannelModel ch = paper_channel();
  CHECK(adapt_batch(dev, ch, 1, 0.0) == 0);
}

TEST_CASE("adaptive batch equals the brute-force scan") {
  DeviceProfile dev = unit_device();
  dev.mac_rate = 40e3;
  ChannelModel ch = paper_channel();
  ch.mac_per_sample = 20;
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const double gain = rng.exponential(ch.mean_gain);
    const Index fast = adapt_batch(dev, ch, 2, gain);
    Index best = 0;
    for (Index b = 1; b <= dev.local_samples; ++b) {
      const double rate = uplink_rate(dev, ch, gain);
      const double upload = rate > 0 ? ch.update_size_bits / rate
                                     : std::numeric_limits<double>::infinity();
      const double total = ch.t_download_s + compute_time(dev, ch, 2, b) + upload;
      if (total <= ch.round_deadline_s) best = b;
    }
    CHECK(fast == best);
    if (fast >= 1) {
      const double rate = uplink_rate(dev, ch, gain);
      const double total =
          ch.t_download_s + compute_time(dev, ch, 2, fast) + ch.update_size_bits / rate;
      CHECK(total <= ch.round_deadline_s);
    }
  }
}

TEST_CASE("straggler calibration hits the target ratio") {
  std::vector<DeviceProfile> fleet;
  Rng rng(23);
  for (int i = 0; i < 10; ++i) {
    DeviceProfile dev;
    dev.mac_rate = 1536e3 * rng.uniform(0.8, 1.0);
    dev.tx_power_w = watts_from_dbm(rng.uniform(15.0, 25.0));
    dev.local_samples = 32;
    fleet.push_back(dev);
  }
  const ChannelModel ch = paper_channel();

  SUBCASE("target zero with a generous deadline") {
    ChannelModel generous = ch;
    generous.round_deadline_s = 100.0;
    const ChannelModel out = straggler_calibrate(0.0, fleet, generous, 1, 16);
    for (const auto& dev : fleet) CHECK(arrival_probability(dev, out, 1, 16) > 0.999);
  }

  SUBCASE("higher targets need less bandwidth") {
    const ChannelModel b30 = straggler_calibrate(0.3, fleet, ch, 5, 32);
    const ChannelModel b60 = straggler_calibrate(0.6, fleet, ch, 5, 32);
    CHECK(b60.bandwidth_hz < b30.bandwidth_hz);
  }

  SUBCASE("calibrated ratio re-measured by Monte Carlo") {
    const double target = 0.5;
    const ChannelModel out = straggler_calibrate(target, fleet, ch, 5, 32);
    double straggle = 0;
    for (const auto& dev : fleet)
      straggle += 1.0 - empirical_arrival(dev, out, 5, 32, 99, 20000);
    straggle /= static_cast<double>(fleet.size());
    CHECK(std::abs(straggle - target) < 0.02);
  }

  SUBCASE("unreachable target throws") {
    ChannelModel hopeless = ch;
    hopeless.t_download_s = hopeless.round_deadline_s + 1;
    CHECK_THROWS_AS(straggler_calibrate(0.1, fleet, hopeless, 1, 1), std::runtime_error);
  }
}

TEST_CASE("round timing invariant holds on random draws") {
  DeviceProfile dev = unit_device();
  dev.mac_rate = 100e3;
  const ChannelModel ch = paper_channel();
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    const RoundTiming rt = draw_round(dev, ch, 3, 8, rng);
    CHECK(rt.total_s == ch.t_download_s + rt.compute_s + rt.upload_s);
    CHECK(rt.arrived == (rt.total_s <= ch.round_deadline_s));
  }
}
