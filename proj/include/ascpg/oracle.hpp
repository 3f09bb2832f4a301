#pragma once

#include "ascpg/types.hpp"

#include <concepts>
#include <cstdint>

namespace ascpg {

/// One coupled draw (g_w(x), grad g_w(x)) of the inner map. Both fields come
/// from the same random event w; `seed_tag` is the oracle's draw index.
struct InnerSample {
  Vector value;     // m
  Matrix jacobian;  // m x n
  std::uint64_t seed_tag = 0;
};

/// One draw of the outer gradient grad f_v(y).
struct OuterGradSample {
  Vector grad;  // m
  std::uint64_t seed_tag = 0;
};

/// Which parts of an inner draw the caller will read. The random event is
/// always drawn in full, so the sample stream does not depend on this flag;
/// it only lets an oracle skip filling a part nobody consumes.
enum class InnerParts { both, value, jacobian };

/// The sampling oracle every solver talks to.
///
/// `sample_inner` / `sample_outer` each consume exactly one draw event from
/// the oracle's own generator. Two oracles built from the same data and seed
/// produce identical streams.
template <class O>
concept CompositionOracle =
    requires(O& o, const O& co, const Vector& v, InnerParts parts) {
      { co.inner_dim() } -> std::convertible_to<Index>;
      { co.outer_dim() } -> std::convertible_to<Index>;
      { o.sample_inner(v, parts) } -> std::same_as<InnerSample>;
      { o.sample_outer(v) } -> std::same_as<OuterGradSample>;
    };

/// Oracles whose exact g, grad g, f and grad f are computable.
template <class O>
concept HasTruth = CompositionOracle<O> && requires(const O& o, const Vector& v) {
  { o.inner_value(v) } -> std::convertible_to<Vector>;
  { o.inner_jacobian(v) } -> std::convertible_to<Matrix>;
  { o.outer_value(v) } -> std::convertible_to<double>;
  { o.outer_gradient(v) } -> std::convertible_to<Vector>;
};

/// Oracles that also know the optimal set X* of F and can project onto it.
template <class O>
concept HasSolutionSet = HasTruth<O> && requires(const O& o, const Vector& v) {
  { o.project_solution(v) } -> std::convertible_to<Vector>;
};

template <CompositionOracle O>
InnerSample query_inner(const Vector& x, O& oracle) {
  require_dim(x, oracle.inner_dim(), "query_inner");
  return oracle.sample_inner(x, InnerParts::both);
}

template <CompositionOracle O>
OuterGradSample query_outer(const Vector& y, O& oracle) {
  require_dim(y, oracle.outer_dim(), "query_outer");
  return oracle.sample_outer(y);
}

/// F(x) = f(g(x)) from exact data.
template <CompositionOracle O>
double true_objective(const Vector& x, const O& oracle) {
  if constexpr (HasTruth<O>) {
    require_dim(x, oracle.inner_dim(), "true_objective");
    return oracle.outer_value(oracle.inner_value(x));
  } else {
    throw unsupported_operation("true_objective: oracle has no exact data");
  }
}

/// grad F(x) = grad g(x)^T grad f(g(x)).
template <CompositionOracle O>
Vector true_gradient(const Vector& x, const O& oracle) {
  if constexpr (HasTruth<O>) {
    require_dim(x, oracle.inner_dim(), "true_gradient");
    return oracle.inner_jacobian(x).transpose() *
           oracle.outer_gradient(oracle.inner_value(x));
  } else {
    throw unsupported_operation("true_gradient: oracle has no exact data");
  }
}

template <CompositionOracle O>
Vector project_solution(const Vector& x, const O& oracle) {
  if constexpr (HasSolutionSet<O>) {
    require_dim(x, oracle.inner_dim(), "project_solution");
    return oracle.project_solution(x);
  } else {
    throw unsupported_operation("project_solution: oracle has no solution set");
  }
}

}  // namespace ascpg
