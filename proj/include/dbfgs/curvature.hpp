// Copyright 2026 The dbfgs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Per-node curvature estimation for decentralized BFGS.
//
// Node i keeps a Hessian approximation B over its closed neighborhood
// (m_i p x m_i p). Variable differences are scaled by the normalizer D, whose
// block j is I_p / m_j, and the gradient difference is pre-compensated by
// gamma * v~ so that the regularized update
//
//   B+ = B + r~ r~'/(r~'v~) - B v~ v~' B/(v~' B v~) + gamma I
//
// still satisfies B+ v~ = g_new - g_old. The neighborhood descent is
// e = -(B^-1 + Gamma D) g, and node j applies the j-blocks it receives from
// every neighbor. Summed over the network this is x+ = x - eps (H + Gamma I) g
// with H = sum_i (B^i)^-1 padded to the global dimension, and H satisfies the
// global secant condition whenever every node accepted its last update.

#ifndef DBFGS_CURVATURE_HPP_
#define DBFGS_CURVATURE_HPP_

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "dbfgs/netgraph.hpp"

namespace dbfgs {

/// Relative curvature-pair threshold: updates need v~'r~ > tau |v~| |r~|.
inline constexpr double kSkipTolerance = 1e-10;

struct CurvatureParams {
  double gamma = 1e-2;  // lower eigenvalue floor of B after an update
  double Gamma = 1e-3;  // weight of the normalizer term in the descent

  bool operator==(const CurvatureParams&) const = default;
};

struct VariationPair {
  Eigen::VectorXd v;   // D (x_new - x_old)
  Eigen::VectorXd r;   // (g_new - g_old) - gamma v
  Eigen::VectorXd dg;  // g_new - g_old
};

enum class UpdateOutcome { kAccepted, kSkipped };

class CurvatureState {
 public:
  /// B(0) = initial_scale * I over node i's neighborhood.
  CurvatureState(const Graph& g, NodeId i, std::size_t p, CurvatureParams params,
                 double initial_scale = 1.0);

  NodeId node() const { return node_; }
  const std::vector<NodeId>& neighborhood() const { return neighborhood_; }
  std::size_t dim() const { return static_cast<std::size_t>(b_.rows()); }
  std::size_t block_dim() const { return p_; }
  const CurvatureParams& params() const { return params_; }

  const Eigen::MatrixXd& matrix() const { return b_; }
  /// Diagonal of D_{n_i}: 1/m_j repeated p times for each j in n_i.
  const Eigen::VectorXd& normalizer() const { return normalizer_; }

  /// Replaces B; used by tests that start from arbitrary SPD matrices.
  void set_matrix(Eigen::MatrixXd b);

 private:
  friend UpdateOutcome bfgs_update(CurvatureState& state, const VariationPair& pair);

  NodeId node_;
  std::size_t p_;
  std::vector<NodeId> neighborhood_;
  CurvatureParams params_;
  Eigen::VectorXd normalizer_;
  Eigen::MatrixXd b_;
};

VariationPair modified_variations(const Eigen::VectorXd& x_old, const Eigen::VectorXd& x_new,
                                  const Eigen::VectorXd& g_old, const Eigen::VectorXd& g_new,
                                  const Eigen::VectorXd& normalizer, double gamma);

/// Regularized BFGS update in place. Pairs failing the curvature test leave
/// B untouched and report kSkipped; this never throws on numeric input.
UpdateOutcome bfgs_update(CurvatureState& state, const VariationPair& pair);

/// e^i_{n_i} = -(B^-1 + Gamma D) g_{n_i}, via a Cholesky solve with B.
/// Throws std::logic_error if B is not positive definite.
Eigen::VectorXd neighborhood_descent(const CurvatureState& state, const Eigen::VectorXd& g_nb);

/// d_i = sum of the i-blocks received from every j in n_i.
Eigen::VectorXd aggregate_descent(const std::vector<Eigen::VectorXd>& contributions);

/// Dense H + Gamma I for the whole network (np x np). Forms explicit inverses;
/// meant for verification on small networks.
Eigen::MatrixXd assemble_global_descent_matrix(const std::vector<CurvatureState>& states,
                                               const Graph& g, std::size_t p);

}  // namespace dbfgs

#endif  // DBFGS_CURVATURE_HPP_
