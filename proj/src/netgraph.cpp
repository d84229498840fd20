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

#include "dbfgs/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dbfgs {

Graph::Graph(std::size_t n, const std::vector<Edge>& edges) {
  if (n == 0) throw std::invalid_argument("graph must have at least one node");
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (a == b) throw std::invalid_argument("self loops are not allowed");
    edges_.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  neighborhoods_.resize(n);
  for (NodeId i = 0; i < n; ++i) neighborhoods_[i].push_back(i);
  for (auto [a, b] : edges_) {
    neighborhoods_[a].push_back(b);
    neighborhoods_[b].push_back(a);
  }
  for (auto& nb : neighborhoods_) std::sort(nb.begin(), nb.end());

  // Connectivity by BFS from node 0.
  std::vector<bool> seen(n, false);
  std::vector<NodeId> frontier{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    NodeId u = frontier.back();
    frontier.pop_back();
    for (NodeId v : neighborhoods_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push_back(v);
      }
    }
  }
  connected_ = reached == n;
}

bool Graph::adjacent(NodeId i, NodeId j) const {
  return i != j && slot(i, j).has_value();
}

std::optional<std::size_t> Graph::slot(NodeId i, NodeId j) const {
  const auto& nb = neighborhoods_[i];
  auto it = std::lower_bound(nb.begin(), nb.end(), j);
  if (it == nb.end() || *it != j) return std::nullopt;
  return static_cast<std::size_t>(it - nb.begin());
}

std::optional<std::size_t> Graph::regular_degree() const {
  std::size_t d = degree(0);
  for (NodeId i = 1; i < size(); ++i) {
    if (degree(i) != d) return std::nullopt;
  }
  return d;
}

Graph build_d_regular_cycle(std::size_t n, std::size_t d) {
  if (d == 0 || d % 2 != 0) {
    throw std::invalid_argument("cycle connectivity d must be even and positive");
  }
  if (d >= n) throw std::invalid_argument("cycle connectivity d must be < n");
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (std::size_t k = 1; k <= d / 2; ++k) edges.emplace_back(i, (i + k) % n);
  }
  return Graph(n, edges);
}

WeightMatrix build_weight_matrix(const Graph& g, std::size_t d) {
  auto deg = g.regular_degree();
  if (!deg || *deg != d) {
    throw std::invalid_argument("weight scheme requires a d-regular graph");
  }
  const double off = 1.0 / (2.0 * static_cast<double>(d + 1));
  const double diag = 0.5 + off;
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (auto [a, b] : g.edges()) {
    w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = off;
    w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = off;
  }
  for (Eigen::Index i = 0; i < n; ++i) w(i, i) = diag;
  return WeightMatrix(std::move(w));
}

WeightValidation validate_weight_matrix(const WeightMatrix& w) {
  const Eigen::MatrixXd& m = w.dense();
  WeightValidation r;
  r.max_asymmetry = (m - m.transpose()).cwiseAbs().maxCoeff();
  r.symmetric = r.max_asymmetry <= 1e-12;
  r.max_row_sum_error = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
  r.row_stochastic = r.max_row_sum_error < 1e-12;

  const Eigen::Index n = m.rows();
  if (n < 2) {
    r.lambda2 = 0.0;
    r.connected = true;  // span(1) is the whole space
    return r;
  }
  // Symmetrize for the eigensolve so the report stays meaningful even when
  // the symmetry check fails.
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) - 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap, Eigen::EigenvaluesOnly);
  r.lambda2 = es.eigenvalues()(1);
  r.connected = r.lambda2 > 1e-10;
  return r;
}

void write_graph(std::ostream& os, const Graph& g) {
  os << "n " << g.size() << '\n';
  for (auto [a, b] : g.edges()) os << a << ' ' << b << '\n';
}

Graph read_graph(std::istream& is) {
  std::string tag;
  std::size_t n = 0;
  if (!(is >> tag >> n) || tag != "n") {
    throw std::runtime_error("graph dump: expected 'n <count>' header");
  }
  std::vector<Edge> edges;
  NodeId a = 0, b = 0;
  while (is >> a >> b) edges.emplace_back(a, b);
  return Graph(n, edges);
}

void write_weights(std::ostream& os, const WeightMatrix& w) {
  const auto& m = w.dense();
  os << "n " << w.size() << '\n';
  os.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) os << i << ' ' << j << ' ' << m(i, j) << '\n';
    }
  }
}

}  // namespace dbfgs
