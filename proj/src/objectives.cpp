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

#include "dbfgs/objectives.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dbfgs/rng.hpp"

namespace dbfgs {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// 1 / (1 + exp(z)).
double logistic_tail(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

std::vector<double> exponent_set(double half) {
  std::vector<double> out;
  for (double k = 0.0; k <= half + 1e-12; k += 1.0) out.push_back(k);
  if (half - out.back() > 1e-12) out.push_back(half);
  return out;
}

double logistic_total_value(const LogisticInstance& li, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (std::size_t i = 0; i < li.nodes(); ++i) v += local_value(li, i, x);
  return v;
}

Eigen::VectorXd logistic_total_gradient(const LogisticInstance& li, const Eigen::VectorXd& x) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < li.nodes(); ++i) g += local_gradient(li, i, x);
  return g;
}

Eigen::MatrixXd logistic_total_hessian(const LogisticInstance& li, const Eigen::VectorXd& x) {
  const auto p = x.size();
  Eigen::MatrixXd h = li.lambda * Eigen::MatrixXd::Identity(p, p);
  for (std::size_t i = 0; i < li.nodes(); ++i) {
    const auto& u = li.features[i];
    const Eigen::VectorXd margins = (u * x).cwiseProduct(li.labels[i]);
    Eigen::VectorXd curv(margins.size());
    for (Eigen::Index l = 0; l < margins.size(); ++l) {
      const double s = logistic_tail(margins(l));
      curv(l) = s * (1.0 - s);
    }
    h.noalias() += u.transpose() * curv.asDiagonal() * u;
  }
  return h;
}

}  // namespace

BlockVector::BlockVector(std::size_t p, Eigen::VectorXd data)
    : n_(p == 0 ? 0 : static_cast<std::size_t>(data.size()) / p), p_(p), data_(std::move(data)) {
  if (p == 0 || static_cast<std::size_t>(data_.size()) != n_ * p_) {
    throw std::invalid_argument("block vector length is not a multiple of p");
  }
}

Eigen::VectorXd BlockVector::gather(const std::vector<NodeId>& nodes) const {
  const auto p = static_cast<Eigen::Index>(p_);
  Eigen::VectorXd out(static_cast<Eigen::Index>(nodes.size()) * p);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    out.segment(static_cast<Eigen::Index>(k) * p, p) = block(nodes[k]);
  }
  return out;
}

void BlockVector::scatter_add(const std::vector<NodeId>& nodes, const Eigen::VectorXd& values,
                              double scale) {
  const auto p = static_cast<Eigen::Index>(p_);
  if (values.size() != static_cast<Eigen::Index>(nodes.size()) * p) {
    throw std::invalid_argument("scatter_add: dimension mismatch");
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    block(nodes[k]) += scale * values.segment(static_cast<Eigen::Index>(k) * p, p);
  }
}

std::size_t instance_nodes(const Instance& inst) {
  return std::visit([](const auto& v) { return v.nodes(); }, inst);
}

std::size_t instance_dim(const Instance& inst) {
  return std::visit([](const auto& v) { return v.p; }, inst);
}

QuadraticInstance make_quadratic(std::size_t n, std::size_t p, double eta, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("quadratic instance needs n > 0");
  if (p == 0 || p % 2 != 0) throw std::invalid_argument("quadratic instance needs even p");
  if (!(eta >= 0.0)) throw std::invalid_argument("condition parameter eta must be >= 0");

  const auto exps = exponent_set(eta / 2.0);
  const auto half = static_cast<Eigen::Index>(p / 2);
  Rng rng(seed);
  QuadraticInstance q;
  q.p = p;
  q.eta = eta;
  q.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < half; ++k) a(k) = std::pow(10.0, exps[rng.index(exps.size())]);
    for (Eigen::Index k = half; k < 2 * half; ++k) {
      a(k) = std::pow(10.0, -exps[rng.index(exps.size())]);
    }
    q.a.push_back(std::move(a));
  }
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd b(static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = rng.uniform();
    q.b.push_back(std::move(b));
  }
  return q;
}

LogisticInstance make_logistic(std::size_t n, std::size_t p, std::size_t q, double lambda,
                               double mu, double sigma_pos, double sigma_neg,
                               std::uint64_t seed) {
  if (n == 0 || p == 0) throw std::invalid_argument("logistic instance needs n, p > 0");
  if (q == 0) throw std::invalid_argument("logistic instance needs q > 0 samples per node");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(sigma_pos >= 0.0) || !(sigma_neg >= 0.0)) {
    throw std::invalid_argument("standard deviations must be >= 0");
  }
  Rng rng(seed);
  LogisticInstance li;
  li.p = p;
  li.lambda = lambda;
  li.mu = mu;
  li.sigma_pos = sigma_pos;
  li.sigma_neg = sigma_neg;
  li.seed = seed;
  const std::size_t positives = (q + 1) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::MatrixXd u(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p));
    Eigen::VectorXd v(static_cast<Eigen::Index>(q));
    for (std::size_t l = 0; l < q; ++l) {
      const bool pos = l < positives;
      const auto row = static_cast<Eigen::Index>(l);
      v(row) = pos ? 1.0 : -1.0;
      for (Eigen::Index k = 0; k < u.cols(); ++k) {
        u(row, k) = pos ? rng.normal(mu, sigma_pos) : rng.normal(-mu, sigma_neg);
      }
    }
    li.features.push_back(std::move(u));
    li.labels.push_back(std::move(v));
  }
  return li;
}

double local_value(const Instance& inst, NodeId i, const Eigen::VectorXd& x) {
  return std::visit(
      Overloaded{
          [&](const QuadraticInstance& q) {
            return 0.5 * x.dot(q.a[i].cwiseProduct(x)) + q.b[i].dot(x);
          },
          [&](const LogisticInstance& li) {
            const Eigen::VectorXd margins = (li.features[i] * x).cwiseProduct(li.labels[i]);
            double v = 0.5 * li.lambda * x.squaredNorm() / static_cast<double>(li.nodes());
            for (Eigen::Index l = 0; l < margins.size(); ++l) v += softplus(-margins(l));
            return v;
          },
      },
      inst);
}

Eigen::VectorXd local_gradient(const Instance& inst, NodeId i, const Eigen::VectorXd& x) {
  return std::visit(
      Overloaded{
          [&](const QuadraticInstance& q) -> Eigen::VectorXd {
            return q.a[i].cwiseProduct(x) + q.b[i];
          },
          [&](const LogisticInstance& li) -> Eigen::VectorXd {
            const auto& u = li.features[i];
            const auto& v = li.labels[i];
            const Eigen::VectorXd margins = (u * x).cwiseProduct(v);
            Eigen::VectorXd w(margins.size());
            for (Eigen::Index l = 0; l < margins.size(); ++l) {
              w(l) = -v(l) * logistic_tail(margins(l));
            }
            return li.lambda / static_cast<double>(li.nodes()) * x + u.transpose() * w;
          },
      },
      inst);
}

Eigen::VectorXd solve_consensus_optimum(const Instance& inst) {
  return std::visit(
      Overloaded{
          [](const QuadraticInstance& q) -> Eigen::VectorXd {
            Eigen::VectorXd sa = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q.p));
            Eigen::VectorXd sb = sa;
            for (std::size_t i = 0; i < q.nodes(); ++i) {
              sa += q.a[i];
              sb += q.b[i];
            }
            return -sb.cwiseQuotient(sa);
          },
          [](const LogisticInstance& li) -> Eigen::VectorXd {
            if (!(li.lambda > 0.0)) {
              throw std::invalid_argument("logistic optimum requires lambda > 0");
            }
            Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(li.p));
            Eigen::VectorXd g = logistic_total_gradient(li, x);
            double fx = logistic_total_value(li, x);
            for (int it = 0; it < 500 && g.norm() > 1e-12; ++it) {
              Eigen::VectorXd step = logistic_total_hessian(li, x).llt().solve(-g);
              double t = 1.0;
              const double slope = g.dot(step);
              bool moved = false;
              while (t > 1e-12) {
                Eigen::VectorXd trial = x + t * step;
                const double ft = logistic_total_value(li, trial);
                if (ft <= fx + 1e-4 * t * slope) {
                  moved = ft < fx || t == 1.0;
                  x = trial;
                  fx = ft;
                  break;
                }
                t *= 0.5;
              }
              g = logistic_total_gradient(li, x);
              // Near the optimum the value stops resolving decreases; a full
              // Newton step is still taken, so only bail when nothing moved.
              if (!moved && t <= 1e-12) break;
            }
            return x;
          },
      },
      inst);
}

double consensus_error(const BlockVector& x, const Eigen::VectorXd& optimum) {
  const double denom = optimum.squaredNorm();
  if (!(denom > 0.0)) throw std::invalid_argument("consensus error undefined for zero optimum");
  if (static_cast<Eigen::Index>(x.dim()) != optimum.size()) {
    throw std::invalid_argument("consensus error: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.blocks(); ++i) sum += (x.block(i) - optimum).squaredNorm();
  return sum / static_cast<double>(x.blocks()) / denom;
}

DistributedObjective::DistributedObjective(Mode mode, Graph graph, WeightMatrix weights,
                                           Instance inst, double alpha, PenaltyScaling scaling)
    : mode_(mode),
      graph_(std::move(graph)),
      weights_(std::move(weights)),
      inst_(std::move(inst)),
      alpha_(alpha),
      scaling_(scaling),
      p_(instance_dim(inst_)) {
  if (weights_.size() != graph_.size() || instance_nodes(inst_) != graph_.size()) {
    throw std::invalid_argument("graph, weights and instance disagree on node count");
  }
}

DistributedObjective DistributedObjective::primal(Graph graph, WeightMatrix weights,
                                                  Instance inst, double alpha,
                                                  PenaltyScaling scaling) {
  if (!(alpha > 0.0)) throw std::invalid_argument("penalty coefficient alpha must be > 0");
  return DistributedObjective(Mode::kPrimal, std::move(graph), std::move(weights),
                              std::move(inst), alpha, scaling);
}

DistributedObjective DistributedObjective::dual(Graph graph, WeightMatrix weights,
                                                Instance inst) {
  if (!std::holds_alternative<QuadraticInstance>(inst)) {
    throw std::invalid_argument("dual mode requires a quadratic instance");
  }
  return DistributedObjective(Mode::kDual, std::move(graph), std::move(weights),
                              std::move(inst), 0.0, PenaltyScaling::kRaw);
}

void DistributedObjective::check_nb(NodeId i, const Eigen::VectorXd& nb) const {
  if (i >= nodes()) throw std::out_of_range("node id out of range");
  if (nb.size() != static_cast<Eigen::Index>(graph_.neighborhood_size(i) * p_)) {
    throw std::invalid_argument("neighborhood vector has the wrong dimension");
  }
}

const QuadraticInstance& DistributedObjective::quadratic() const {
  if (const auto* q = std::get_if<QuadraticInstance>(&inst_)) return *q;
  throw std::logic_error("operation requires a quadratic instance");
}

namespace {

// sum_{j in n_i} w_ij (z_i - z_j) from a neighborhood vector.
Eigen::VectorXd weighted_slack(const Graph& g, const WeightMatrix& w, NodeId i,
                               const Eigen::VectorXd& nb, std::size_t p) {
  const auto& nodes = g.neighborhood(i);
  const auto pp = static_cast<Eigen::Index>(p);
  const auto self = static_cast<Eigen::Index>(*g.slot(i, i));
  const auto zi = nb.segment(self * pp, pp);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(pp);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] == i) continue;
    out += w(i, nodes[k]) * (zi - nb.segment(static_cast<Eigen::Index>(k) * pp, pp));
  }
  return out;
}

}  // namespace

Eigen::VectorXd DistributedObjective::primal_grad_i(NodeId i, const Eigen::VectorXd& x_nb) const {
  if (mode_ != Mode::kPrimal) throw std::logic_error("primal_grad_i requires primal mode");
  check_nb(i, x_nb);
  const auto pp = static_cast<Eigen::Index>(p_);
  const auto self = static_cast<Eigen::Index>(*graph_.slot(i, i));
  const Eigen::VectorXd xi = x_nb.segment(self * pp, pp);
  const Eigen::VectorXd slack = weighted_slack(graph_, weights_, i, x_nb, p_);
  if (scaling_ == PenaltyScaling::kNormalized) {
    return alpha_ * local_gradient(inst_, i, xi) + slack;
  }
  return local_gradient(inst_, i, xi) + slack / alpha_;
}

Eigen::VectorXd DistributedObjective::dual_lagrangian_minimizer_i(
    NodeId i, const Eigen::VectorXd& nu_nb) const {
  if (mode_ != Mode::kDual) throw std::logic_error("dual minimizer requires dual mode");
  check_nb(i, nu_nb);
  const auto& q = quadratic();
  const Eigen::VectorXd rhs = q.b[i] + weighted_slack(graph_, weights_, i, nu_nb, p_);
  return -rhs.cwiseQuotient(q.a[i]);
}

Eigen::VectorXd DistributedObjective::dual_grad_i(NodeId i, const Eigen::VectorXd& x_nb) const {
  check_nb(i, x_nb);
  return weighted_slack(graph_, weights_, i, x_nb, p_);
}

Eigen::VectorXd DistributedObjective::descent_grad_i(NodeId i, const Eigen::VectorXd& nb) const {
  return mode_ == Mode::kPrimal ? primal_grad_i(i, nb) : Eigen::VectorXd(-dual_grad_i(i, nb));
}

BlockVector DistributedObjective::recover_primal(const BlockVector& z) const {
  if (mode_ == Mode::kPrimal) return z;
  BlockVector x(nodes(), p_);
  for (NodeId i = 0; i < nodes(); ++i) {
    x.block(i) = dual_lagrangian_minimizer_i(i, z.gather(graph_.neighborhood(i)));
  }
  return x;
}

BlockVector DistributedObjective::gradient(const BlockVector& z) const {
  const BlockVector x = recover_primal(z);
  BlockVector g(nodes(), p_);
  for (NodeId i = 0; i < nodes(); ++i) {
    g.block(i) = descent_grad_i(i, x.gather(graph_.neighborhood(i)));
  }
  return g;
}

double DistributedObjective::value(const BlockVector& z) const {
  if (mode_ == Mode::kDual) return -dual_value(z);
  double f = 0.0;
  double penalty = 0.0;
  for (NodeId i = 0; i < nodes(); ++i) {
    const Eigen::VectorXd xi = z.block(i);
    f += local_value(inst_, i, xi);
    penalty += xi.dot(weighted_slack(graph_, weights_, i, z.gather(graph_.neighborhood(i)), p_));
  }
  const double phi = f + 0.5 * penalty / alpha_;
  return scaling_ == PenaltyScaling::kNormalized ? alpha_ * phi : phi;
}

double DistributedObjective::dual_value(const BlockVector& nu) const {
  if (mode_ != Mode::kDual) throw std::logic_error("dual_value requires dual mode");
  const BlockVector x = recover_primal(nu);
  double psi = 0.0;
  for (NodeId i = 0; i < nodes(); ++i) {
    const Eigen::VectorXd xi = x.block(i);
    psi += local_value(inst_, i, xi);
    psi += xi.dot(weighted_slack(graph_, weights_, i, nu.gather(graph_.neighborhood(i)), p_));
  }
  return psi;
}

void write_instance(std::ostream& os, const Instance& inst) {
  os.precision(17);
  std::visit(
      Overloaded{
          [&](const QuadraticInstance& q) {
            os << "quadratic " << q.nodes() << ' ' << q.p << ' ' << q.eta << ' ' << q.seed
               << '\n';
            for (std::size_t i = 0; i < q.nodes(); ++i) {
              os << i << " a";
              for (double v : q.a[i]) os << ' ' << v;
              os << '\n' << i << " b";
              for (double v : q.b[i]) os << ' ' << v;
              os << '\n';
            }
          },
          [&](const LogisticInstance& li) {
            os << "logistic " << li.nodes() << ' ' << li.p << ' ' << li.lambda << ' ' << li.mu
               << ' ' << li.sigma_pos << ' ' << li.sigma_neg << ' ' << li.seed << '\n';
            for (std::size_t i = 0; i < li.nodes(); ++i) {
              os << i << " samples " << li.features[i].rows() << '\n';
              for (Eigen::Index l = 0; l < li.features[i].rows(); ++l) {
                os << li.labels[i](l);
                for (Eigen::Index k = 0; k < li.features[i].cols(); ++k) {
                  os << ' ' << li.features[i](l, k);
                }
                os << '\n';
              }
            }
          },
      },
      inst);
}

Instance read_instance(std::istream& is) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("instance archive: " + what);
  };
  auto read_vec = [&](Eigen::Index p) {
    Eigen::VectorXd v(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      if (!(is >> v(k))) fail("truncated vector");
    }
    return v;
  };
  std::string kind;
  if (!(is >> kind)) fail("empty input");
  if (kind == "quadratic") {
    QuadraticInstance q;
    std::size_t n = 0;
    if (!(is >> n >> q.p >> q.eta >> q.seed)) fail("bad quadratic header");
    const auto p = static_cast<Eigen::Index>(q.p);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t id = 0;
      std::string tag;
      if (!(is >> id >> tag) || id != i || tag != "a") fail("expected 'a' row for node");
      q.a.push_back(read_vec(p));
      if (!(is >> id >> tag) || id != i || tag != "b") fail("expected 'b' row for node");
      q.b.push_back(read_vec(p));
    }
    return q;
  }
  if (kind == "logistic") {
    LogisticInstance li;
    std::size_t n = 0;
    if (!(is >> n >> li.p >> li.lambda >> li.mu >> li.sigma_pos >> li.sigma_neg >> li.seed)) {
      fail("bad logistic header");
    }
    const auto p = static_cast<Eigen::Index>(li.p);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t id = 0;
      std::string tag;
      Eigen::Index q = 0;
      if (!(is >> id >> tag >> q) || id != i || tag != "samples") fail("expected samples row");
      Eigen::MatrixXd u(q, p);
      Eigen::VectorXd v(q);
      for (Eigen::Index l = 0; l < q; ++l) {
        if (!(is >> v(l))) fail("truncated sample");
        u.row(l) = read_vec(p).transpose();
      }
      li.features.push_back(std::move(u));
      li.labels.push_back(std::move(v));
    }
    return li;
  }
  fail("unknown instance kind '" + kind + "'");
  return {};
}

}  // namespace dbfgs
