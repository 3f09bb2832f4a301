#pragma once

#include "ascpg/types.hpp"

#include <array>
#include <limits>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ascpg {

/// Named exponent pairs (a, b) for the two step-size laws.
enum class Regime {
  nonconvex_general,      // (5/9, 4/9)
  nonconvex_linear,       // (1/2, 1/2)
  stronglyconvex_general, // (1, 4/5)
  stronglyconvex_linear,  // (1, 1)
};

struct Exponents {
  double a;
  double b;
};

inline constexpr Exponents exponents(Regime r) {
  switch (r) {
    case Regime::nonconvex_general: return {5.0 / 9.0, 4.0 / 9.0};
    case Regime::nonconvex_linear: return {0.5, 0.5};
    case Regime::stronglyconvex_general: return {1.0, 0.8};
    case Regime::stronglyconvex_linear: return {1.0, 1.0};
  }
  return {1.0, 1.0};
}

inline constexpr std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::nonconvex_general: return "nonconvex_general";
    case Regime::nonconvex_linear: return "nonconvex_linear";
    case Regime::stronglyconvex_general: return "stronglyconvex_general";
    case Regime::stronglyconvex_linear: return "stronglyconvex_linear";
  }
  return "?";
}

inline std::optional<Regime> parse_regime(std::string_view name) {
  for (Regime r : {Regime::nonconvex_general, Regime::nonconvex_linear,
                   Regime::stronglyconvex_general, Regime::stronglyconvex_linear}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

/// alpha_k = c_a k^-a (main step) and beta_k = c_b k^-b (tracking step).
///
/// With `clamp_beta` the effective beta_k is min(c_b k^-b, 1), so the
/// y-update stays a convex combination. The asymptotic law is unchanged for
/// k > c_b^(1/b).
struct Schedule {
  double c_a = 1.0;
  double a = 1.0;
  double c_b = 2.0;
  double b = 1.0;
  bool clamp_beta = true;

  static Schedule from_regime(Regime r, double c_a = 1.0, double c_b = 2.0,
                              bool clamp_beta = true) {
    const auto e = exponents(r);
    return Schedule{c_a, e.a, c_b, e.b, clamp_beta};
  }

  void validate() const {
    if (!(c_a > 0.0) || !std::isfinite(c_a)) {
      throw std::invalid_argument("schedule: c_a must be positive");
    }
    if (!(c_b > 0.0) || !std::isfinite(c_b)) {
      throw std::invalid_argument("schedule: c_b must be positive");
    }
    if (!(a > 0.0 && a <= 1.0)) {
      throw std::invalid_argument("schedule: exponent a must lie in (0, 1]");
    }
    if (!(b > 0.0 && b <= 1.0)) {
      throw std::invalid_argument("schedule: exponent b must lie in (0, 1]");
    }
  }

  double alpha(std::uint64_t k) const {
    if (k == 0) throw std::invalid_argument("alpha: k must be >= 1");
    return c_a * std::pow(static_cast<double>(k), -a);
  }

  double raw_beta(std::uint64_t k) const {
    if (k == 0) throw std::invalid_argument("beta: k must be >= 1");
    return c_b * std::pow(static_cast<double>(k), -b);
  }

  double beta(std::uint64_t k) const {
    const double raw = raw_beta(k);
    return clamp_beta ? std::min(raw, 1.0) : raw;
  }
};

inline double alpha(const Schedule& s, std::uint64_t k) { return s.alpha(k); }
inline double beta(const Schedule& s, std::uint64_t k) { return s.beta(k); }

/// Smoothing weights xi_t^(k) = beta_t prod_{i=t+1..k} (1 - beta_i), with
/// xi_k^(k) = beta_k, for a given sequence beta_0..beta_k.
///
/// The running average u_{k+1} = (1 - beta_k) u_k + beta_k s_{k+1} started
/// with beta_0 = 1 equals sum_t xi_t^(k) s_{t+1}.
inline std::vector<double> smoothing_weights(std::span<const double> betas) {
  const std::size_t n = betas.size();
  std::vector<double> xi(n);
  if (n == 0) return xi;

  // Backward running product; switch to log-domain once the plain product
  // underflows so small weights are not flushed to zero prematurely.
  double prod = 1.0;
  double log_mag = 0.0;
  double sign = 1.0;
  bool use_log = false;
  bool zero_tail = false;
  for (std::size_t t = n; t-- > 0;) {
    if (zero_tail) {
      xi[t] = 0.0;
      continue;
    }
    xi[t] = use_log ? betas[t] * sign * std::exp(log_mag) : betas[t] * prod;
    const double factor = 1.0 - betas[t];
    if (factor == 0.0) {
      zero_tail = true;  // history before t is wiped
      continue;
    }
    if (!use_log) {
      const double next = prod * factor;
      if (std::abs(next) >= std::numeric_limits<double>::min()) {
        prod = next;
        continue;
      }
      use_log = true;
      sign = prod < 0.0 ? -1.0 : 1.0;
      log_mag = std::log(std::abs(prod));
    }
    if (factor < 0.0) sign = -sign;
    log_mag += std::log(std::abs(factor));
  }
  return xi;
}

/// Weights for the solver's iterations 1..k+1 of schedule `s`: the weight
/// index t pairs with iteration t + 1, so (c_b, b) = (1, 1) gives uniform
/// weights 1 / (k + 1).
inline std::vector<double> weights(const Schedule& s, std::uint64_t k) {
  std::vector<double> betas(k + 1);
  for (std::uint64_t t = 0; t <= k; ++t) betas[t] = s.beta(t + 1);
  return smoothing_weights(betas);
}

}  // namespace ascpg
