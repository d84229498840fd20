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

// Communication topologies and consensus weight matrices.
//
// Node ids are 0-based and contiguous. Every closed neighborhood n_i (node i
// together with its graph neighbors) is stored sorted by ascending node id;
// all neighborhood-sized vectors and matrices in the library order their
// p-dimensional blocks the same way.

#ifndef DBFGS_NETGRAPH_HPP_
#define DBFGS_NETGRAPH_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dbfgs {

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected, simple graph with precomputed closed neighborhoods.
/// Immutable after construction.
class Graph {
 public:
  /// Builds a graph on `n` nodes. Self loops and out-of-range endpoints are
  /// rejected; duplicate edges (in either orientation) are merged.
  Graph(std::size_t n, const std::vector<Edge>& edges);

  std::size_t size() const { return neighborhoods_.size(); }

  /// Edges as (min, max) pairs sorted lexicographically.
  const std::vector<Edge>& edges() const { return edges_; }

  /// Closed neighborhood n_i, ascending, containing i.
  const std::vector<NodeId>& neighborhood(NodeId i) const {
    return neighborhoods_[i];
  }
  /// m_i = |n_i| = degree(i) + 1.
  std::size_t neighborhood_size(NodeId i) const {
    return neighborhoods_[i].size();
  }
  std::size_t degree(NodeId i) const { return neighborhoods_[i].size() - 1; }

  bool adjacent(NodeId i, NodeId j) const;

  /// Position of j inside n_i, or nullopt when j is not in n_i.
  std::optional<std::size_t> slot(NodeId i, NodeId j) const;

  bool connected() const { return connected_; }

  /// Common degree if every node has the same degree.
  std::optional<std::size_t> regular_degree() const;

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> neighborhoods_;
  bool connected_ = false;
};

/// Each node i is adjacent to i±1, ..., i±d/2 (mod n).
/// Throws std::invalid_argument for odd d, d == 0 or d >= n.
Graph build_d_regular_cycle(std::size_t n, std::size_t d);

/// Dense symmetric consensus weights W; Z = W ⊗ I_p is never formed.
class WeightMatrix {
 public:
  explicit WeightMatrix(Eigen::MatrixXd w) : w_(std::move(w)) {}

  std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
  double operator()(NodeId i, NodeId j) const {
    return w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& dense() const { return w_; }

 private:
  Eigen::MatrixXd w_;
};

/// w_ii = 1/2 + 1/(2(d+1)), w_ij = 1/(2(d+1)) on edges. Requires a
/// d-regular graph; throws std::invalid_argument otherwise.
WeightMatrix build_weight_matrix(const Graph& g, std::size_t d);

struct WeightValidation {
  bool symmetric = false;
  bool row_stochastic = false;
  bool connected = false;  // null(I - W) = span(1)
  double max_asymmetry = 0.0;
  double max_row_sum_error = 0.0;
  double lambda2 = 0.0;  // second-smallest eigenvalue of I - W

  bool ok() const { return symmetric && row_stochastic && connected; }
};

/// Report-only check of the consensus weight conditions.
WeightValidation validate_weight_matrix(const WeightMatrix& w);

// Plain-text debug dumps. Edge list: "n <count>" then one "i j" per line.
// Weights: "n <count>" then one "i j w_ij" triplet per nonzero.
void write_graph(std::ostream& os, const Graph& g);
Graph read_graph(std::istream& is);
void write_weights(std::ostream& os, const WeightMatrix& w);

}  // namespace dbfgs

#endif  // DBFGS_NETGRAPH_HPP_
