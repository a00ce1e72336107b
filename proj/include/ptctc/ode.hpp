#pragma once

// Adaptive DOP853 integrator shared by the mean-field flows and the
// operator-form density-matrix evolution.

#include "ptctc/dop853_tableau.hpp"
#include "ptctc/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ptctc::ode {

struct Tolerances {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double min_step = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 10'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

namespace detail {

template <class Vec>
double scaled_rms(const Vec& v, const Vec& y, const Tolerances& tol) {
  double sum = 0.0;
  const auto n = v.size();
  for (decltype(v.size()) i = 0; i < n; ++i) {
    const double r = std::abs(v[i]) / (tol.abs_tol + tol.rel_tol * std::abs(y[i]));
    sum += r * r;
  }
  return n > 0 ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

inline std::vector<double> sample_times(double t0, double t1, double dt) {
  std::vector<double> out;
  if (dt > 0.0) {
    const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9));
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = t0 + static_cast<double>(k) * dt;
      if (t < t1 - 1e-9 * dt) out.push_back(t);
    }
  } else {
    out.push_back(t0);
  }
  out.push_back(t1);
  return out;
}

}  // namespace detail

/// Integrates y' = rhs(y) from t0 to t1 (t1 > t0), landing exactly on the
/// sample grid t0, t0+dt, ..., t1 where on_sample(t, y) is invoked. A
/// non-positive dt samples only the two end points. After every accepted step
/// on_accept(y) may adjust the state in place and must return true if it did.
/// Throws NumericalError on step-size underflow or when max_steps is hit.
template <class Vec, class Rhs, class OnSample, class OnAccept>
Stats integrate(const Rhs& rhs, Vec y, double t0, double t1, double dt, const Tolerances& tol,
                OnSample&& on_sample, OnAccept&& on_accept) {
  using namespace dop853;
  constexpr double kSafety = 0.9, kMinFactor = 0.2, kMaxFactor = 10.0;
  constexpr double kExponent = -1.0 / 8.0;

  if (!(t1 > t0)) throw DomainError("integrate: t_end must exceed the start time");

  Stats stats;
  const auto samples = detail::sample_times(t0, t1, dt);
  std::size_t next = 1;
  double t = t0;
  on_sample(t, static_cast<const Vec&>(y));

  std::array<Vec, kStages + 1> k;
  k[0] = rhs(y);
  ++stats.rhs_evaluations;

  // Initial step size (Hairer, Nørsett & Wanner, II.4).
  double h;
  {
    const double d0 = detail::scaled_rms(y, y, tol);
    const double d1 = detail::scaled_rms(k[0], y, tol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    const Vec f1 = rhs(Vec(y + h0 * k[0]));
    ++stats.rhs_evaluations;
    const double d2 = detail::scaled_rms(Vec(f1 - k[0]), y, tol) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 8.0);
    h = std::min({100.0 * h0, h1, tol.max_step});
  }

  bool last_rejected = false;
  std::size_t steps = 0;
  Vec stage;
  while (next < samples.size()) {
    if (++steps > tol.max_steps) {
      throw NumericalError("integrate: exceeded " + std::to_string(tol.max_steps) + " steps");
    }
    const double target = samples[next];
    bool clipped = false;
    double h_step = h;
    if (t + h_step >= target) {
      h_step = target - t;
      clipped = true;
    }

    for (int i = 1; i < kStages; ++i) {
      stage = y;
      for (int j = 0; j < i; ++j) {
        if (kA[i][j] != 0.0) stage += (h_step * kA[i][j]) * k[j];
      }
      k[i] = rhs(stage);
    }
    Vec y_new = y;
    for (int j = 0; j < kStages; ++j) {
      if (kB[j] != 0.0) y_new += (h_step * kB[j]) * k[j];
    }
    k[kStages] = rhs(y_new);
    stats.rhs_evaluations += kStages;

    // Combined 5th/3rd-order error estimate.
    double e5 = 0.0, e3 = 0.0;
    const auto n = y.size();
    for (decltype(y.size()) c = 0; c < n; ++c) {
      const double scale = tol.abs_tol + tol.rel_tol * std::max(std::abs(y[c]), std::abs(y_new[c]));
      decltype(y[c] + y[c]) s5{}, s3{};
      for (int j = 0; j <= kStages; ++j) {
        if (kE5[j] != 0.0) s5 += kE5[j] * k[j][c];
        if (kE3[j] != 0.0) s3 += kE3[j] * k[j][c];
      }
      e5 += std::norm(s5) / (scale * scale);
      e3 += std::norm(s3) / (scale * scale);
    }
    double err_norm = 0.0;
    if (e5 > 0.0 || e3 > 0.0) {
      err_norm = h_step * e5 / std::sqrt((e5 + 0.01 * e3) * static_cast<double>(n));
    }
    if (!std::isfinite(err_norm)) {
      throw NumericalError("integrate: non-finite state at t = " + std::to_string(t));
    }

    if (err_norm <= 1.0) {
      ++stats.accepted;
      t = clipped ? target : t + h_step;
      y = std::move(y_new);
      k[0] = k[kStages];
      if (on_accept(y)) {
        k[0] = rhs(y);
        ++stats.rhs_evaluations;
      }
      const double factor = err_norm == 0.0
                                ? kMaxFactor
                                : std::clamp(kSafety * std::pow(err_norm, kExponent), kMinFactor,
                                             kMaxFactor);
      const double proposal = h_step * (last_rejected ? std::min(1.0, factor) : factor);
      // A step shortened only to land on a sample keeps the previous proposal.
      h = std::min(clipped ? std::max(h, proposal) : proposal, tol.max_step);
      last_rejected = false;
      if (clipped) {
        on_sample(t, static_cast<const Vec&>(y));
        ++next;
      }
    } else {
      ++stats.rejected;
      h = h_step * std::max(kMinFactor, kSafety * std::pow(err_norm, kExponent));
      last_rejected = true;
      if (h < tol.min_step) {
        throw NumericalError("integrate: step size underflow at t = " + std::to_string(t));
      }
    }
  }
  return stats;
}

template <class Vec, class Rhs, class OnSample>
Stats integrate(const Rhs& rhs, Vec y, double t0, double t1, double dt, const Tolerances& tol,
                OnSample&& on_sample) {
  return integrate(rhs, std::move(y), t0, t1, dt, tol, std::forward<OnSample>(on_sample),
                   [](Vec&) { return false; });
}

}  // namespace ptctc::ode
