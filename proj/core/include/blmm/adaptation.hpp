#pragma once

#include <vector>

#include "blmm/linalg.hpp"

namespace blmm {

/// Nesterov dual averaging of log step size toward a target acceptance
/// statistic (Hoffman & Gelman 2014, with the usual gamma/t0/kappa).
class DualAveraging {
 public:
  explicit DualAveraging(double target_accept, double gamma = 0.05,
                         double t0 = 10.0, double kappa = 0.75);

  /// Restarts the averaging around a new initial step size.
  void restart(double step_size);
  /// Feeds one acceptance statistic, returns the step size to use next.
  double update(double accept_stat);
  /// Averaged step size, used once adaptation stops.
  double final_step_size() const;

 private:
  double target_;
  double gamma_;
  double t0_;
  double kappa_;
  double mu_ = 0.0;
  double log_step_ = 0.0;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  double counter_ = 0.0;
};

/// Running mean / variance (Welford).
class WelfordVariance {
 public:
  explicit WelfordVariance(Eigen::Index dim);
  void add(const Vector& x);
  void reset();
  long count() const { return n_; }
  Vector variance() const;

 private:
  long n_ = 0;
  Vector mean_;
  Vector m2_;
};

/// Warmup schedule: an initial step-size-only buffer, metric windows that
/// double in length, and a terminal step-size-only buffer. Defaults are
/// 75 / 25 (first window) / 50; short warmups shrink them to 15% / 75% / 10%.
class WarmupSchedule {
 public:
  struct Window {
    int begin;  // inclusive
    int end;    // exclusive
  };

  explicit WarmupSchedule(int warmup, int init_buffer = 75, int term_buffer = 50,
                          int base_window = 25);

  const std::vector<Window>& windows() const { return windows_; }
  bool adapts_step_size() const { return warmup_ > 0; }
  bool in_window(int iteration) const;
  /// True when iteration is the last one of a metric window.
  bool ends_window(int iteration) const;

 private:
  int warmup_;
  std::vector<Window> windows_;
};

/// Regularized variance used as the diagonal inverse metric:
/// (n / (n + 5)) var + 1e-3 * (5 / (n + 5)).
Vector regularized_inverse_metric(const WelfordVariance& acc);

}  // namespace blmm
