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

#include "dbfgs/curvature.hpp"

#include <cmath>
#include <stdexcept>

namespace dbfgs {

CurvatureState::CurvatureState(const Graph& g, NodeId i, std::size_t p, CurvatureParams params,
                               double initial_scale)
    : node_(i), p_(p), neighborhood_(g.neighborhood(i)), params_(params) {
  if (!(params.gamma > 0.0) || !(params.Gamma > 0.0)) {
    throw std::invalid_argument("curvature regularizers gamma and Gamma must be > 0");
  }
  if (!(initial_scale > 0.0)) throw std::invalid_argument("B(0) scale must be > 0");
  const auto dim = static_cast<Eigen::Index>(neighborhood_.size() * p);
  normalizer_.resize(dim);
  for (std::size_t k = 0; k < neighborhood_.size(); ++k) {
    const double inv_m = 1.0 / static_cast<double>(g.neighborhood_size(neighborhood_[k]));
    normalizer_.segment(static_cast<Eigen::Index>(k * p), static_cast<Eigen::Index>(p))
        .setConstant(inv_m);
  }
  b_ = initial_scale * Eigen::MatrixXd::Identity(dim, dim);
}

void CurvatureState::set_matrix(Eigen::MatrixXd b) {
  if (b.rows() != b_.rows() || b.cols() != b_.cols()) {
    throw std::invalid_argument("curvature matrix has the wrong dimension");
  }
  b_ = std::move(b);
}

VariationPair modified_variations(const Eigen::VectorXd& x_old, const Eigen::VectorXd& x_new,
                                  const Eigen::VectorXd& g_old, const Eigen::VectorXd& g_new,
                                  const Eigen::VectorXd& normalizer, double gamma) {
  const auto dim = normalizer.size();
  if (x_old.size() != dim || x_new.size() != dim || g_old.size() != dim ||
      g_new.size() != dim) {
    throw std::invalid_argument("modified_variations: dimension mismatch");
  }
  VariationPair pair;
  pair.v = normalizer.cwiseProduct(x_new - x_old);
  pair.dg = g_new - g_old;
  pair.r = pair.dg - gamma * pair.v;
  return pair;
}

UpdateOutcome bfgs_update(CurvatureState& state, const VariationPair& pair) {
  auto& b = state.b_;
  if (pair.v.size() != b.rows() || pair.r.size() != b.rows()) {
    throw std::invalid_argument("bfgs_update: dimension mismatch");
  }
  const double vr = pair.v.dot(pair.r);
  const double scale = pair.v.norm() * pair.r.norm();
  if (!std::isfinite(vr) || !std::isfinite(scale) || !(vr > kSkipTolerance * scale)) {
    return UpdateOutcome::kSkipped;
  }
  const Eigen::VectorXd bv = b * pair.v;
  const double vbv = pair.v.dot(bv);
  if (!(vbv > 0.0) || !std::isfinite(vbv)) return UpdateOutcome::kSkipped;

  Eigen::MatrixXd next = b;
  next.noalias() += (pair.r / vr) * pair.r.transpose();
  next.noalias() -= (bv / vbv) * bv.transpose();
  next.diagonal().array() += state.params_.gamma;
  b = 0.5 * (next + next.transpose());
  return UpdateOutcome::kAccepted;
}

Eigen::VectorXd neighborhood_descent(const CurvatureState& state, const Eigen::VectorXd& g_nb) {
  if (g_nb.size() != static_cast<Eigen::Index>(state.dim())) {
    throw std::invalid_argument("neighborhood_descent: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(state.matrix());
  if (llt.info() != Eigen::Success) {
    throw std::logic_error("curvature matrix lost positive definiteness");
  }
  Eigen::VectorXd y = llt.solve(g_nb);
  return -(y + state.params().Gamma * state.normalizer().cwiseProduct(g_nb));
}

Eigen::VectorXd aggregate_descent(const std::vector<Eigen::VectorXd>& contributions) {
  if (contributions.empty()) throw std::invalid_argument("aggregate_descent: no contributions");
  Eigen::VectorXd d = contributions.front();
  for (std::size_t k = 1; k < contributions.size(); ++k) {
    if (contributions[k].size() != d.size()) {
      throw std::invalid_argument("aggregate_descent: dimension mismatch");
    }
    d += contributions[k];
  }
  return d;
}

Eigen::MatrixXd assemble_global_descent_matrix(const std::vector<CurvatureState>& states,
                                               const Graph& g, std::size_t p) {
  const auto n = g.size();
  const auto pp = static_cast<Eigen::Index>(p);
  const auto total = static_cast<Eigen::Index>(n * p);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(total, total);
  for (const auto& st : states) {
    const auto& nb = st.neighborhood();
    const auto dim = static_cast<Eigen::Index>(st.dim());
    const Eigen::MatrixXd inv = st.matrix().llt().solve(Eigen::MatrixXd::Identity(dim, dim));
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t c = 0; c < nb.size(); ++c) {
        h.block(static_cast<Eigen::Index>(nb[a]) * pp, static_cast<Eigen::Index>(nb[c]) * pp, pp,
                pp) += inv.block(static_cast<Eigen::Index>(a) * pp,
                                 static_cast<Eigen::Index>(c) * pp, pp, pp);
      }
    }
  }
  h.diagonal().array() += states.empty() ? 0.0 : states.front().params().Gamma;
  return h;
}

}  // namespace dbfgs
