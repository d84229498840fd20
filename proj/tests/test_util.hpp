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

#ifndef DBFGS_TESTS_TEST_UTIL_HPP_
#define DBFGS_TESTS_TEST_UTIL_HPP_

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "dbfgs/netgraph.hpp"
#include "dbfgs/objectives.hpp"
#include "dbfgs/rng.hpp"

namespace dbfgs::testing {

inline QuadraticInstance quadratic(const std::vector<std::vector<double>>& a,
                                   const std::vector<std::vector<double>>& b) {
  QuadraticInstance q;
  q.p = a.front().size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    q.a.push_back(Eigen::Map<const Eigen::VectorXd>(a[i].data(), static_cast<Eigen::Index>(q.p)));
    q.b.push_back(Eigen::Map<const Eigen::VectorXd>(b[i].data(), static_cast<Eigen::Index>(q.p)));
  }
  return q;
}

// Path 0 - 1 with w_01 = w.
inline Graph two_nodes() { return Graph(2, {{0, 1}}); }
inline WeightMatrix two_node_weights(double w) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0 - w, w, w, 1.0 - w;
  return WeightMatrix(m);
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = rng.uniform(lo, hi);
  return v;
}

inline BlockVector random_blocks(Rng& rng, std::size_t n, std::size_t p) {
  return BlockVector(p, random_vector(rng, static_cast<Eigen::Index>(n * p)));
}

inline Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n, double floor = 0.1) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = rng.normal();
  }
  Eigen::MatrixXd s = m * m.transpose() / static_cast<double>(n);
  s.diagonal().array() += floor;
  return s;
}

// Central difference of f along dir.
inline double directional_fd(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double h) {
  return (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
}

inline double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace dbfgs::testing

#endif  // DBFGS_TESTS_TEST_UTIL_HPP_
