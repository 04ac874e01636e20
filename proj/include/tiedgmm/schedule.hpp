#pragma once

// Cosine-annealed learning-rate schedule with a linear warm-up ramp. The
// rate climbs from eta_max / warmup_steps to eta_max over the warm-up
// window, then decays along a half cosine to eta_max * floor_ratio at the
// final step.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tiedgmm/errors.hpp"

namespace tiedgmm {

struct LrSchedule {
  double eta_max = 0.05;
  int total_epochs = 100;
  double warmup_fraction = 0.05;
  int steps_per_epoch = 1;
  double floor_ratio = 0.01;  // eta_min = eta_max * floor_ratio

  long total_steps() const {
    return static_cast<long>(total_epochs) * steps_per_epoch;
  }
  long warmup_steps() const {
    return std::lround(warmup_fraction * static_cast<double>(total_steps()));
  }

  void validate() const {
    if (eta_max <= 0.0) throw ConfigError("lr: eta_max must be > 0");
    if (total_epochs < 1 || steps_per_epoch < 1) {
      throw ConfigError("lr: epochs and steps_per_epoch must be >= 1");
    }
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
      throw ConfigError("lr: warmup_fraction in [0,1)");
    }
    if (floor_ratio <= 0.0 || floor_ratio > 1.0) {
      throw ConfigError("lr: floor_ratio in (0,1]");
    }
  }
};

inline double lr_at(long t, const LrSchedule& sched) {
  const long total = sched.total_steps();
  if (t < 0 || t >= total) {
    throw std::out_of_range("lr_at: step index outside the schedule");
  }
  const long warmup = sched.warmup_steps();
  if (t < warmup) {
    return sched.eta_max * static_cast<double>(t + 1) /
           static_cast<double>(warmup);
  }
  const double eta_min = sched.eta_max * sched.floor_ratio;
  const long decay_len = total - 1 - warmup;
  if (decay_len <= 0) return sched.eta_max;
  const double phase = std::numbers::pi *
                       static_cast<double>(t - warmup) /
                       static_cast<double>(decay_len);
  return eta_min + 0.5 * (sched.eta_max - eta_min) * (1.0 + std::cos(phase));
}

}  // namespace tiedgmm
