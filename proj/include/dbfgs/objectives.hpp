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

// Consensus problems sum_i f_i(x) and their two decentralized
// reformulations:
//
//   primal penalty:  phi(x) = sum_i f_i(x_i) + (1/2a) x'(I - Z)x
//   dual ascent:     psi(nu) = L(x(nu), nu),  L = sum_i f_i(x_i) + nu'(I - Z)x
//
// Both have gradients whose i-th block depends only on the closed
// neighborhood n_i. Runtimes minimize F = phi (primal) or F = -psi (dual);
// the "descent" accessors below follow that convention.

#ifndef DBFGS_OBJECTIVES_HPP_
#define DBFGS_OBJECTIVES_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dbfgs/netgraph.hpp"

namespace dbfgs {

/// Stacked global variable of n blocks, each of dimension p.
class BlockVector {
 public:
  BlockVector() = default;
  BlockVector(std::size_t n, std::size_t p)
      : n_(n), p_(p), data_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n * p))) {}
  BlockVector(std::size_t p, Eigen::VectorXd data);

  std::size_t blocks() const { return n_; }
  std::size_t dim() const { return p_; }

  auto block(NodeId i) {
    return data_.segment(static_cast<Eigen::Index>(i * p_), static_cast<Eigen::Index>(p_));
  }
  auto block(NodeId i) const {
    return data_.segment(static_cast<Eigen::Index>(i * p_), static_cast<Eigen::Index>(p_));
  }

  /// Restriction to a neighborhood, blocks in the order given.
  Eigen::VectorXd gather(const std::vector<NodeId>& nodes) const;
  /// this[nodes] += scale * values.
  void scatter_add(const std::vector<NodeId>& nodes, const Eigen::VectorXd& values,
                   double scale = 1.0);

  const Eigen::VectorXd& data() const { return data_; }
  Eigen::VectorXd& data() { return data_; }

 private:
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  Eigen::VectorXd data_;
};

/// f_i(x) = 1/2 x' diag(a_i) x + b_i' x.
struct QuadraticInstance {
  std::size_t p = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> a;
  std::vector<Eigen::VectorXd> b;

  std::size_t nodes() const { return a.size(); }
};

/// f_i(x) = lambda/(2n) |x|^2 + sum_l log(1 + exp(-v_il u_il' x)).
struct LogisticInstance {
  std::size_t p = 0;
  double lambda = 0.0;
  double mu = 0.0;
  double sigma_pos = 0.0;
  double sigma_neg = 0.0;
  std::uint64_t seed = 0;
  std::vector<Eigen::MatrixXd> features;  // q_i x p per node
  std::vector<Eigen::VectorXd> labels;    // entries in {-1, +1}

  std::size_t nodes() const { return features.size(); }
};

using Instance = std::variant<QuadraticInstance, LogisticInstance>;

std::size_t instance_nodes(const Instance& inst);
std::size_t instance_dim(const Instance& inst);

/// Diagonal entries: the first p/2 are drawn uniformly from
/// {10^0, 10^1, ..., 10^(eta/2)}, the last p/2 from {10^0, ..., 10^-(eta/2)}
/// (a fractional eta/2 is appended as the last exponent). b_i ~ U[0,1]^p.
/// Throws std::invalid_argument for odd p or negative eta.
QuadraticInstance make_quadratic(std::size_t n, std::size_t p, double eta, std::uint64_t seed);

/// q samples per node: ceil(q/2) labelled +1 with features ~ N(mu 1, s+^2 I),
/// floor(q/2) labelled -1 with features ~ N(-mu 1, s-^2 I).
LogisticInstance make_logistic(std::size_t n, std::size_t p, std::size_t q, double lambda,
                               double mu, double sigma_pos, double sigma_neg,
                               std::uint64_t seed);

double local_value(const Instance& inst, NodeId i, const Eigen::VectorXd& x);
Eigen::VectorXd local_gradient(const Instance& inst, NodeId i, const Eigen::VectorXd& x);

/// Minimizer of sum_i f_i over a shared variable. Closed form for quadratics;
/// damped Newton to gradient norm <= 1e-12 for logistic (requires lambda > 0).
Eigen::VectorXd solve_consensus_optimum(const Instance& inst);

/// (1/n) sum_i |x_i - x*|^2 / |x*|^2. Throws for x* = 0.
double consensus_error(const BlockVector& x, const Eigen::VectorXd& optimum);

enum class Mode { kPrimal, kDual };

/// How the primal penalty gradient is normalized.
///  kRaw:        grad_i f_i + (1/a) sum_j w_ij (x_i - x_j)
///  kNormalized: a grad_i f_i + sum_j w_ij (x_i - x_j), i.e. the gradient of
///               a*phi. Same minimizer; with unit stepsize, gradient descent
///               on it is the classical x <- Zx - a grad f iteration.
enum class PenaltyScaling { kRaw, kNormalized };

class DistributedObjective {
 public:
  static DistributedObjective primal(Graph graph, WeightMatrix weights, Instance inst,
                                     double alpha,
                                     PenaltyScaling scaling = PenaltyScaling::kRaw);
  static DistributedObjective dual(Graph graph, WeightMatrix weights, Instance inst);

  Mode mode() const { return mode_; }
  std::size_t nodes() const { return graph_.size(); }
  std::size_t dim() const { return p_; }
  const Graph& graph() const { return graph_; }
  const WeightMatrix& weights() const { return weights_; }
  const Instance& instance() const { return inst_; }
  double alpha() const { return alpha_; }
  PenaltyScaling scaling() const { return scaling_; }

  /// Primal mode: block i of grad phi from the neighborhood vector x_{n_i}.
  Eigen::VectorXd primal_grad_i(NodeId i, const Eigen::VectorXd& x_nb) const;

  /// Dual mode: x_i(nu) = -A_i^{-1}(b_i + sum_j w_ij (nu_i - nu_j)).
  Eigen::VectorXd dual_lagrangian_minimizer_i(NodeId i, const Eigen::VectorXd& nu_nb) const;

  /// Block i of grad psi, the constraint slack sum_j w_ij (x_i - x_j), from
  /// the Lagrangian minimizers x_{n_i}.
  Eigen::VectorXd dual_grad_i(NodeId i, const Eigen::VectorXd& x_nb) const;

  /// Block i of grad F. In primal mode `nb` holds x_{n_i}; in dual mode it
  /// holds the recovered primal x_{n_i}(nu), and the result is -grad_i psi.
  Eigen::VectorXd descent_grad_i(NodeId i, const Eigen::VectorXd& nb) const;

  /// The primal point the error metric is evaluated at: z itself in primal
  /// mode, x(nu) in dual mode.
  BlockVector recover_primal(const BlockVector& z) const;

  /// grad F(z), assembled block by block from the local formulas.
  BlockVector gradient(const BlockVector& z) const;

  /// F(z): phi (scaled per PenaltyScaling) or -psi.
  double value(const BlockVector& z) const;

  /// Dual value psi(nu).
  double dual_value(const BlockVector& nu) const;

 private:
  DistributedObjective(Mode mode, Graph graph, WeightMatrix weights, Instance inst,
                       double alpha, PenaltyScaling scaling);

  void check_nb(NodeId i, const Eigen::VectorXd& nb) const;
  const QuadraticInstance& quadratic() const;

  Mode mode_;
  Graph graph_;
  WeightMatrix weights_;
  Instance inst_;
  double alpha_;
  PenaltyScaling scaling_;
  std::size_t p_;
};

// Plain-text instance archive. Quadratic:
//   quadratic <n> <p> <eta> <seed>
//   <i> a <p values>
//   <i> b <p values>
// Logistic:
//   logistic <n> <p> <lambda> <mu> <sigma+> <sigma-> <seed>
//   <i> samples <q>
//   <label> <p feature values>      (q lines)
void write_instance(std::ostream& os, const Instance& inst);
Instance read_instance(std::istream& is);

}  // namespace dbfgs

#endif  // DBFGS_OBJECTIVES_HPP_
