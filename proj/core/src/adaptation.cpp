#include "blmm/adaptation.hpp"

#include <algorithm>
#include <cmath>

namespace blmm {

DualAveraging::DualAveraging(double target_accept, double gamma, double t0, double kappa)
    : target_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa) {}

void DualAveraging::restart(double step_size) {
  mu_ = std::log(10.0 * step_size);
  log_step_ = std::log(step_size);
  log_step_bar_ = 0.0;
  h_bar_ = 0.0;
  counter_ = 0.0;
}

double DualAveraging::update(double accept_stat) {
  accept_stat = std::clamp(std::isfinite(accept_stat) ? accept_stat : 0.0, 0.0, 1.0);
  counter_ += 1.0;
  const double eta = 1.0 / (counter_ + t0_);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_stat);
  log_step_ = mu_ - std::sqrt(counter_) / gamma_ * h_bar_;
  const double x_eta = std::pow(counter_, -kappa_);
  log_step_bar_ = x_eta * log_step_ + (1.0 - x_eta) * log_step_bar_;
  return std::exp(log_step_);
}

double DualAveraging::final_step_size() const {
  return std::exp(counter_ > 0 ? log_step_bar_ : log_step_);
}

WelfordVariance::WelfordVariance(Eigen::Index dim)
    : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)) {}

void WelfordVariance::add(const Vector& x) {
  ++n_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta.cwiseProduct(x - mean_);
}

void WelfordVariance::reset() {
  n_ = 0;
  mean_.setZero();
  m2_.setZero();
}

Vector WelfordVariance::variance() const {
  if (n_ < 2) return Vector::Ones(mean_.size());
  return m2_ / static_cast<double>(n_ - 1);
}

Vector regularized_inverse_metric(const WelfordVariance& acc) {
  const auto n = static_cast<double>(acc.count());
  return (n / (n + 5.0)) * acc.variance().array() + 1e-3 * (5.0 / (n + 5.0));
}

WarmupSchedule::WarmupSchedule(int warmup, int init_buffer, int term_buffer,
                               int base_window)
    : warmup_(warmup) {
  if (warmup < 20) return;  // step size only
  if (init_buffer + term_buffer + base_window > warmup) {
    init_buffer = static_cast<int>(0.15 * warmup);
    term_buffer = static_cast<int>(0.1 * warmup);
    base_window = warmup - init_buffer - term_buffer;
  }
  const int last = warmup - term_buffer;  // metric windows end here
  int begin = init_buffer;
  int size = base_window;
  while (begin < last) {
    int end = begin + size;
    // Stretch this window to the end when the next (doubled) one would not fit.
    if (end + 2 * size > last) end = last;
    windows_.push_back({begin, end});
    begin = end;
    size *= 2;
  }
}

bool WarmupSchedule::in_window(int iteration) const {
  for (const auto& w : windows_) {
    if (iteration >= w.begin && iteration < w.end) return true;
  }
  return false;
}

bool WarmupSchedule::ends_window(int iteration) const {
  for (const auto& w : windows_) {
    if (iteration == w.end - 1) return true;
  }
  return false;
}

}  // namespace blmm
