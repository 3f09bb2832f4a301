#pragma once

#include "ascpg/types.hpp"

#include <limits>
#include <string>
#include <variant>

namespace ascpg {

struct ZeroPenalty {};

/// lambda * ||x||_1
struct L1Penalty {
  double lambda = 0.0;
};

/// Indicator of the box [lo, hi].
struct BoxConstraint {
  Vector lo;
  Vector hi;
};

/// Closed convex penalty R with a closed-form proximal mapping.
class Regularizer {
public:
  Regularizer() = default;

  static Regularizer zero() { return Regularizer(ZeroPenalty{}); }

  static Regularizer l1(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("l1 regularizer: lambda must be finite and >= 0");
    }
    return Regularizer(L1Penalty{lambda});
  }

  static Regularizer box(Vector lo, Vector hi) {
    if (lo.size() != hi.size()) {
      throw std::invalid_argument("box regularizer: lo and hi differ in size");
    }
    for (Index i = 0; i < lo.size(); ++i) {
      if (lo[i] > hi[i]) {
        throw std::invalid_argument("box regularizer: lo > hi at coordinate " +
                                    std::to_string(i));
      }
    }
    return Regularizer(BoxConstraint{std::move(lo), std::move(hi)});
  }

  bool is_zero() const { return std::holds_alternative<ZeroPenalty>(kind_); }

  const std::variant<ZeroPenalty, L1Penalty, BoxConstraint>& kind() const {
    return kind_;
  }

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ZeroPenalty>) return "zero";
          else if constexpr (std::is_same_v<K, L1Penalty>) return "l1";
          else return "box";
        },
        kind_);
  }

  /// R(x); +inf outside the box.
  double value(const Vector& x) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ZeroPenalty>) {
            return 0.0;
          } else if constexpr (std::is_same_v<K, L1Penalty>) {
            return k.lambda * x.lpNorm<1>();
          } else {
            require_dim(x, k.lo.size(), "box value");
            const bool inside = (x.array() >= k.lo.array()).all() &&
                                (x.array() <= k.hi.array()).all();
            return inside ? 0.0 : std::numeric_limits<double>::infinity();
          }
        },
        kind_);
  }

  /// argmin_x 1/2 ||x - u||^2 + step * R(x).
  Vector prox(double step, const Vector& u) const {
    if (!(step > 0.0)) {
      throw std::invalid_argument("prox: step must be positive");
    }
    return std::visit(
        [&](const auto& k) -> Vector {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ZeroPenalty>) {
            return u;
          } else if constexpr (std::is_same_v<K, L1Penalty>) {
            return soft_threshold(u, step * k.lambda);
          } else {
            require_dim(u, k.lo.size(), "box prox");
            return u.cwiseMax(k.lo).cwiseMin(k.hi);
          }
        },
        kind_);
  }

  /// sign(u) * max(|u| - t, 0); |u| == t maps to exactly 0.
  static Vector soft_threshold(const Vector& u, double t) {
    Vector out(u.size());
    for (Index i = 0; i < u.size(); ++i) {
      const double mag = std::abs(u[i]) - t;
      out[i] = mag > 0.0 ? std::copysign(mag, u[i]) : 0.0;
    }
    return out;
  }

private:
  explicit Regularizer(std::variant<ZeroPenalty, L1Penalty, BoxConstraint> k)
      : kind_(std::move(k)) {}

  std::variant<ZeroPenalty, L1Penalty, BoxConstraint> kind_{ZeroPenalty{}};
};

inline Vector prox(const Regularizer& reg, double step, const Vector& u) {
  return reg.prox(step, u);
}

inline double value(const Regularizer& reg, const Vector& x) {
  return reg.value(x);
}

/// Componentwise distance of (u - p) / step from the subdifferential of R at
/// p. Zero (up to rounding) iff p = prox(step, u).
inline double prox_optimality_residual(const Regularizer& reg, double step,
                                       const Vector& u, const Vector& p) {
  const Vector s = (u - p) / step;
  double worst = 0.0;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        for (Index i = 0; i < p.size(); ++i) {
          double r = 0.0;
          if constexpr (std::is_same_v<K, ZeroPenalty>) {
            r = std::abs(s[i]);
          } else if constexpr (std::is_same_v<K, L1Penalty>) {
            if (p[i] > 0.0) r = std::abs(s[i] - k.lambda);
            else if (p[i] < 0.0) r = std::abs(s[i] + k.lambda);
            else r = std::max(0.0, std::abs(s[i]) - k.lambda);
          } else {
            // normal cone of [lo, hi] at p
            if (p[i] < k.lo[i] || p[i] > k.hi[i]) {
              r = std::numeric_limits<double>::infinity();
            } else if (k.lo[i] == k.hi[i]) {
              r = 0.0;
            } else if (p[i] == k.lo[i]) {
              r = std::max(0.0, s[i]);
            } else if (p[i] == k.hi[i]) {
              r = std::max(0.0, -s[i]);
            } else {
              r = std::abs(s[i]);
            }
          }
          // scale back to the units of u so the residual is step-independent
          worst = std::max(worst, step * r);
        }
      },
      reg.kind());
  return worst;
}

}  // namespace ascpg
