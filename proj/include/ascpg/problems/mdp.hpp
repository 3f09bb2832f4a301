#pragma once

#include "ascpg/problems/least_squares.hpp"
#include "ascpg/types.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ascpg {

/// A fixed-policy Markov chain with linear value features.
struct MdpSpec {
  Index S = 0;
  Matrix P;      // S x S, row-stochastic transitions under the policy
  Matrix R;      // S x S, reward of transition s -> s'
  double gamma = 0.9;
  Matrix Phi;    // S x d
  std::optional<Vector> w_star;

  Index features() const { return Phi.cols(); }

  /// Expected one-step reward r_s = sum_s' P(s, s') R(s, s').
  Vector expected_reward() const { return P.cwiseProduct(R).rowwise().sum(); }

  /// Matrix of the residual map w -> (Phi - gamma P Phi) w - r.
  Matrix residual_matrix() const { return Phi - gamma * (P * Phi); }
};

struct MdpCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

/// Structural checks (shape, stochasticity, discount). Does not throw.
inline std::vector<MdpCheck> check_mdp(const MdpSpec& spec, double tol = 1e-12) {
  std::vector<MdpCheck> out;
  {
    MdpCheck c{"shapes consistent", true, {}};
    c.pass = spec.S >= 1 && spec.P.rows() == spec.S && spec.P.cols() == spec.S &&
             spec.R.rows() == spec.S && spec.R.cols() == spec.S &&
             spec.Phi.rows() == spec.S && spec.Phi.cols() >= 1;
    if (!c.pass) c.detail = "P, R must be SxS and Phi Sxd";
    out.push_back(c);
    if (!c.pass) return out;
  }
  {
    MdpCheck c{"transition rows stochastic", true, {}};
    for (Index s = 0; s < spec.S && c.pass; ++s) {
      const double sum = spec.P.row(s).sum();
      if ((spec.P.row(s).array() < 0.0).any() || std::abs(sum - 1.0) > tol) {
        c.pass = false;
        std::ostringstream os;
        os << "row " << s << " sums to " << std::setprecision(17) << sum;
        c.detail = os.str();
      }
    }
    out.push_back(c);
  }
  {
    MdpCheck c{"discount in (0,1)", true, {}};
    c.pass = spec.gamma > 0.0 && spec.gamma < 1.0;
    out.push_back(c);
  }
  {
    MdpCheck c{"entries finite", true, {}};
    c.pass = spec.P.allFinite() && spec.R.allFinite() && spec.Phi.allFinite();
    out.push_back(c);
  }
  return out;
}

inline void validate_mdp(const MdpSpec& spec) {
  for (const auto& c : check_mdp(spec)) {
    if (!c.pass) throw std::invalid_argument("mdp: " + c.name + " violated " + c.detail);
  }
}

struct RandomMdpParams {
  Index states = 100;
  Index features = 20;
  Index actions = 3;
  Index next_states = 4;
  double gamma = 0.9;
};

namespace detail {

inline Index column_rank(const Matrix& M) {
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  qr.setThreshold(1e-10);
  return qr.rank();
}

// Gaussian draw, then orthonormalized and scaled so entries have variance
// about 1/d. Orthonormal columns keep the residual map as well conditioned
// as I - gamma P allows.
inline Matrix draw_features(Index S, Index d, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix G(S, d);
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < S; ++i) G(i, j) = rng.normal();
    if (column_rank(G) != std::min(S, d)) continue;
    const Index cols = std::min(S, d);
    Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(S, cols);
    Matrix Phi = Matrix::Zero(S, d);
    Phi.leftCols(cols) = Q * std::sqrt(double(S) / double(d));
    if (d > S) Phi.rightCols(d - S) = G.rightCols(d - S) / std::sqrt(double(d));
    return Phi;
  }
  throw std::runtime_error("random mdp: feature matrix rank deficient after 100 draws");
}

}  // namespace detail

/// Random fixed-policy MDP: for each action every state reaches
/// `next_states` distinct successors with uniform [0,1] weights normalized
/// to one and uniform [0,1] rewards; the evaluated policy picks actions
/// uniformly. Features are random with full column rank (see draw_features).
inline MdpSpec build_random_mdp(const RandomMdpParams& prm, std::uint64_t seed) {
  const Index S = prm.states;
  if (S < 2) throw std::invalid_argument("random mdp: need at least 2 states");
  if (prm.features < 1) throw std::invalid_argument("random mdp: need d >= 1");
  if (prm.actions < 1) throw std::invalid_argument("random mdp: need >= 1 action");
  if (prm.next_states < 1 || prm.next_states > S) {
    throw std::invalid_argument("random mdp: next_states must lie in [1, S]");
  }
  if (!(prm.gamma > 0.0 && prm.gamma < 1.0)) {
    throw std::invalid_argument("random mdp: gamma must lie in (0, 1)");
  }
  Rng rng(seed);
  MdpSpec spec;
  spec.S = S;
  spec.gamma = prm.gamma;
  spec.P = Matrix::Zero(S, S);
  Matrix reward_mass = Matrix::Zero(S, S);  // sum_a pi(a) P_a R_a

  std::vector<Index> perm(static_cast<std::size_t>(S));
  const double pi_a = 1.0 / double(prm.actions);
  for (Index a = 0; a < prm.actions; ++a) {
    for (Index s = 0; s < S; ++s) {
      std::iota(perm.begin(), perm.end(), Index{0});
      for (Index j = 0; j < prm.next_states; ++j) {
        const Index pick = j + rng.index(S - j);
        std::swap(perm[j], perm[pick]);
      }
      std::vector<double> w(static_cast<std::size_t>(prm.next_states));
      double total = 0.0;
      for (auto& wj : w) {
        wj = rng.uniform();
        total += wj;
      }
      if (total <= 0.0) {
        std::fill(w.begin(), w.end(), 1.0);
        total = double(prm.next_states);
      }
      for (Index j = 0; j < prm.next_states; ++j) {
        const Index sp = perm[j];
        const double p = w[j] / total;
        const double r = rng.uniform();
        spec.P(s, sp) += pi_a * p;
        reward_mass(s, sp) += pi_a * p * r;
      }
    }
  }
  spec.R = Matrix::Zero(S, S);
  for (Index s = 0; s < S; ++s)
    for (Index sp = 0; sp < S; ++sp)
      if (spec.P(s, sp) > 0.0) spec.R(s, sp) = reward_mass(s, sp) / spec.P(s, sp);
  // exact renormalization so every row sums to 1 up to rounding
  for (Index s = 0; s < S; ++s) spec.P.row(s) /= spec.P.row(s).sum();
  spec.Phi = detail::draw_features(S, prm.features, rng);
  return spec;
}

/// Random MDP with a planted weight vector w*. Rewards are shifted so that
/// the expected rewards equal (I - gamma P) Phi w* + residual * e, where e is
/// orthogonal to the range of (I - gamma P) Phi with ||e||^2 = S. Each
/// transition keeps a zero-mean random part.
///
/// w* is the unique minimizer of the Bellman residual objective either way;
/// with residual = 0 the Bellman equation is solved exactly in the feature
/// span and the objective vanishes at w*. With `support` > 0 only the first
/// `support` entries of w* are nonzero, each of magnitude in [1, 2] with a
/// random sign.
inline MdpSpec build_consistent_mdp(const RandomMdpParams& prm, Index support,
                                    std::uint64_t seed, double residual = 0.0) {
  MdpSpec spec = build_random_mdp(prm, seed);
  Rng rng(derive_seed(seed, 0xC0FFEE));
  const Index d = spec.features();
  Vector w = Vector::Zero(d);
  const Index nz = support > 0 ? std::min(support, d) : d;
  for (Index i = 0; i < nz; ++i) {
    const double mag = rng.uniform(1.0, 2.0);
    w[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  const Matrix M = spec.residual_matrix();
  Vector target = M * w;  // desired expected rewards
  if (residual != 0.0) {
    Vector e(spec.S);
    for (Index i = 0; i < spec.S; ++i) e[i] = rng.normal();
    const Eigen::HouseholderQR<Matrix> qr(M);
    const Matrix Q = qr.householderQ() * Matrix::Identity(spec.S, d);
    e -= Q * (Q.transpose() * e);
    const double norm = e.norm();
    if (norm > 1e-12) target += residual * std::sqrt(double(spec.S)) / norm * e;
  }
  const Vector current = spec.expected_reward();
  for (Index s = 0; s < spec.S; ++s)
    for (Index sp = 0; sp < spec.S; ++sp)
      if (spec.P(s, sp) > 0.0) spec.R(s, sp) += target[s] - current[s];
  spec.w_star = w;
  return spec;
}

/// Star counterexample with S = 6: states 0..4 are outer states, state 5 is
/// the center; d = 7 with phi_i = 2 e_i + e_6 for outer states and
/// phi_5 = e_5 + 2 e_6. The evaluated policy takes the "dashed" action
/// (uniform over outer states) with probability 5/6 and the "solid" action
/// (to the center) with probability 1/6, so every row of P is uniform.
/// Rewards are zero and gamma = 0.99. The construction is deterministic; the
/// seed is accepted for interface symmetry and ignored.
inline MdpSpec build_baird(std::uint64_t /*seed*/ = 0) {
  constexpr Index S = 6;
  constexpr Index d = 7;
  MdpSpec spec;
  spec.S = S;
  spec.gamma = 0.99;
  const double p_solid = 1.0 / S;
  spec.P = Matrix::Zero(S, S);
  for (Index s = 0; s < S; ++s) {
    for (Index sp = 0; sp < S - 1; ++sp) spec.P(s, sp) = (1.0 - p_solid) / (S - 1);
    spec.P(s, S - 1) += p_solid;
  }
  spec.R = Matrix::Zero(S, S);
  spec.Phi = Matrix::Zero(S, d);
  for (Index s = 0; s < S - 1; ++s) {
    spec.Phi(s, s) = 2.0;
    spec.Phi(s, d - 1) = 1.0;
  }
  spec.Phi(S - 1, S - 1) = 1.0;
  spec.Phi(S - 1, d - 1) = 2.0;
  return spec;
}

/// sum_s (phi_s^T w - q_s(w))^2 from exact model data.
inline double bellman_residual_objective(const MdpSpec& spec, const Vector& w) {
  require_dim(w, spec.features(), "bellman_residual_objective");
  return (spec.residual_matrix() * w - spec.expected_reward()).squaredNorm();
}

inline AffineSolutionSet solution_set(const MdpSpec& spec) {
  return AffineSolutionSet(spec.residual_matrix(), spec.expected_reward());
}

/// Minimum-norm minimizer of the Bellman residual objective.
inline Vector exact_solution(const MdpSpec& spec) {
  return solution_set(spec).min_norm_solution();
}

// ---------------------------------------------------------------------------
// Plain-text fixture format:
//
//   ascpg-mdp 1
//   <S> <d> <gamma>
//   <S rows of P>
//   <S rows of R>
//   <S rows of Phi>
//
// Whitespace separated, row-major, numbers printed with 17 significant
// digits. Lines starting with '#' are comments.

inline void write_mdp(std::ostream& os, const MdpSpec& spec) {
  os << "ascpg-mdp 1\n";
  os << std::setprecision(17);
  os << spec.S << ' ' << spec.features() << ' ' << spec.gamma << '\n';
  auto rows = [&](const Matrix& M) {
    for (Index i = 0; i < M.rows(); ++i) {
      for (Index j = 0; j < M.cols(); ++j) os << (j ? " " : "") << M(i, j);
      os << '\n';
    }
  };
  rows(spec.P);
  rows(spec.R);
  rows(spec.Phi);
}

/// Parses the fixture format. Only syntax is checked here; use check_mdp for
/// the model invariants.
inline MdpSpec read_mdp(std::istream& is) {
  std::string content;
  {
    std::ostringstream all;
    std::string line;
    while (std::getline(is, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first != std::string::npos && line[first] == '#') continue;
      all << line << '\n';
    }
    content = all.str();
  }
  std::istringstream in(content);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "ascpg-mdp" || version != 1) {
    throw std::runtime_error("mdp fixture: missing 'ascpg-mdp 1' header");
  }
  MdpSpec spec;
  Index d = 0;
  if (!(in >> spec.S >> d >> spec.gamma) || spec.S < 1 || d < 1) {
    throw std::runtime_error("mdp fixture: bad size line");
  }
  auto read = [&](Matrix& M, Index r, Index c, const char* name) {
    M.resize(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j)
        if (!(in >> M(i, j))) {
          throw std::runtime_error(std::string("mdp fixture: truncated ") + name);
        }
  };
  read(spec.P, spec.S, spec.S, "P");
  read(spec.R, spec.S, spec.S, "R");
  read(spec.Phi, spec.S, d, "Phi");
  return spec;
}

inline void save_mdp(const std::string& path, const MdpSpec& spec) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_mdp(os, spec);
}

inline MdpSpec load_mdp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_mdp(is);
}

}  // namespace ascpg
