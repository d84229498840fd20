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

#include "dbfgs/sync_runtime.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dbfgs {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("sync config: " + what);
}

BlockVector initial_point(const DistributedObjective& obj, const SyncConfig& cfg) {
  if (cfg.initial) return *cfg.initial;
  return BlockVector(obj.nodes(), obj.dim());
}

// Appends records and decides when to stop.
class Recorder {
 public:
  Recorder(const DistributedObjective& obj, const SyncConfig& cfg)
      : obj_(obj), cfg_(cfg), optimum_(solve_consensus_optimum(obj.instance())) {
    trace_.method = cfg.method;
    trace_.mode = obj.mode();
    trace_.seed = cfg.seed;
  }

  // Returns true when the run must stop after this record.
  bool record(std::size_t iter, const BlockVector& x, double grad_norm) {
    TraceRecord r;
    r.iter = iter;
    r.error = consensus_error(x, optimum_);
    r.grad_norm = grad_norm;
    r.exchanges = iter * exchanges_per_iteration(cfg_.method, obj_.mode());
    r.model_time = static_cast<double>(iter);
    r.local_iter_min = iter;
    trace_.records.push_back(r);
    if (!std::isfinite(r.error) || r.error > cfg_.divergence_limit) {
      trace_.status = RunStatus::kDiverged;
      return true;
    }
    if (cfg_.error_threshold > 0.0 && r.error <= cfg_.error_threshold) {
      trace_.status = RunStatus::kErrorThreshold;
      return true;
    }
    if (cfg_.grad_norm_threshold > 0.0 && grad_norm <= cfg_.grad_norm_threshold) {
      trace_.status = RunStatus::kGradThreshold;
      return true;
    }
    trace_.status = RunStatus::kMaxIterations;
    return iter >= cfg_.max_iterations;
  }

  Trace& trace() { return trace_; }

 private:
  const DistributedObjective& obj_;
  const SyncConfig& cfg_;
  Eigen::VectorXd optimum_;
  Trace trace_;
};

// Stacked sum_j w_ij (x_i - x_j).
BlockVector slack(const DistributedObjective& obj, const BlockVector& x) {
  BlockVector s(obj.nodes(), obj.dim());
  for (NodeId i = 0; i < obj.nodes(); ++i) {
    s.block(i) = obj.dual_grad_i(i, x.gather(obj.graph().neighborhood(i)));
  }
  return s;
}

}  // namespace

void validate_sync_config(const SyncConfig& cfg, const DistributedObjective& obj) {
  require(std::isfinite(cfg.stepsize) && cfg.stepsize > 0.0, "stepsize must be > 0");
  require(cfg.max_iterations > 0, "max_iterations must be > 0");
  require(cfg.error_threshold >= 0.0, "error_threshold must be >= 0");
  require(cfg.grad_norm_threshold >= 0.0, "grad_norm_threshold must be >= 0");
  require(cfg.divergence_limit > 0.0, "divergence_limit must be > 0");
  if (cfg.method == Method::kDbfgs) {
    require(cfg.curvature.gamma > 0.0, "dbfgs.gamma must be > 0");
    require(cfg.curvature.Gamma > 0.0, "dbfgs.Gamma must be > 0");
    require(cfg.initial_curvature > 0.0, "dbfgs.initial_curvature must be > 0");
  }
  if (obj.mode() == Mode::kPrimal) require(obj.alpha() > 0.0, "primal.alpha must be > 0");
  require(cfg.method != Method::kDgd || obj.mode() == Mode::kPrimal, "dgd requires primal mode");
  require(cfg.method != Method::kDd || obj.mode() == Mode::kDual, "dd requires dual mode");
  require(cfg.method != Method::kAdmm || obj.mode() == Mode::kDual, "admm requires dual mode");
  for (const auto* v : {&cfg.initial, &cfg.initial_dual}) {
    if (*v) {
      require((*v)->blocks() == obj.nodes() && (*v)->dim() == obj.dim(),
              "initial point has the wrong shape");
    }
  }
}

double reported_grad_norm(const DistributedObjective& obj, const BlockVector& g) {
  const double norm = g.data().norm();
  if (obj.mode() == Mode::kPrimal && obj.scaling() == PenaltyScaling::kNormalized) {
    return norm / obj.alpha();
  }
  return norm;
}

Trace run_dbfgs_sync(const DistributedObjective& obj, const SyncConfig& cfg,
                     const SyncObserver& observer) {
  if (cfg.method != Method::kDbfgs) throw std::invalid_argument("sync config: method must be dbfgs");
  validate_sync_config(cfg, obj);
  const Graph& g = obj.graph();
  const std::size_t n = obj.nodes();
  const std::size_t p = obj.dim();
  const auto pp = static_cast<Eigen::Index>(p);

  Recorder rec(obj, cfg);
  std::vector<CurvatureState> states;
  states.reserve(n);
  for (NodeId i = 0; i < n; ++i) {
    states.emplace_back(g, i, p, cfg.curvature, cfg.initial_curvature);
  }

  BlockVector z = initial_point(obj, cfg);
  BlockVector grad = obj.gradient(z);
  if (rec.record(0, obj.recover_primal(z), reported_grad_norm(obj, grad))) {
    return std::move(rec.trace());
  }

  std::vector<Eigen::VectorXd> e(n);
  std::vector<UpdateOutcome> outcomes(n, UpdateOutcome::kSkipped);
  for (std::size_t t = 0; t < cfg.max_iterations; ++t) {
    // Neighborhood descents, then each node sums the blocks addressed to it.
    for (NodeId i = 0; i < n; ++i) {
      e[i] = neighborhood_descent(states[i], grad.gather(g.neighborhood(i)));
    }
    BlockVector d(n, p);
    for (NodeId i = 0; i < n; ++i) {
      std::vector<Eigen::VectorXd> parts;
      for (NodeId j : g.neighborhood(i)) {
        const auto k = static_cast<Eigen::Index>(*g.slot(j, i));
        parts.emplace_back(e[j].segment(k * pp, pp));
      }
      d.block(i) = aggregate_descent(parts);
    }

    BlockVector z_new(n, p);
    for (NodeId i = 0; i < n; ++i) z_new.block(i) = z.block(i) + cfg.stepsize * d.block(i);
    BlockVector grad_new = obj.gradient(z_new);

    std::vector<CurvatureState> before;
    if (observer) before = states;
    for (NodeId i = 0; i < n; ++i) {
      const auto& nb = g.neighborhood(i);
      const VariationPair pair =
          modified_variations(z.gather(nb), z_new.gather(nb), grad.gather(nb), grad_new.gather(nb),
                              states[i].normalizer(), cfg.curvature.gamma);
      outcomes[i] = bfgs_update(states[i], pair);
      if (outcomes[i] == UpdateOutcome::kAccepted) {
        ++rec.trace().accepted_updates;
      } else {
        ++rec.trace().skipped_updates;
      }
    }
    if (observer) {
      observer(SyncStep{t, z, z_new, grad, grad_new, d, before, states, outcomes});
    }

    z = std::move(z_new);
    grad = std::move(grad_new);
    if (rec.record(t + 1, obj.recover_primal(z), reported_grad_norm(obj, grad))) break;
  }
  return std::move(rec.trace());
}

Trace run_dgd(const DistributedObjective& obj, const SyncConfig& cfg,
              const IterateObserver& observer) {
  if (cfg.method != Method::kDgd) throw std::invalid_argument("sync config: method must be dgd");
  validate_sync_config(cfg, obj);
  Recorder rec(obj, cfg);
  BlockVector z = initial_point(obj, cfg);
  BlockVector grad = obj.gradient(z);
  if (observer) observer(0, z);
  if (rec.record(0, z, reported_grad_norm(obj, grad))) return std::move(rec.trace());
  for (std::size_t t = 0; t < cfg.max_iterations; ++t) {
    z.data() -= cfg.stepsize * grad.data();
    grad = obj.gradient(z);
    if (observer) observer(t + 1, z);
    if (rec.record(t + 1, z, reported_grad_norm(obj, grad))) break;
  }
  return std::move(rec.trace());
}

Trace run_dd(const DistributedObjective& obj, const SyncConfig& cfg,
             const IterateObserver& observer) {
  if (cfg.method != Method::kDd) throw std::invalid_argument("sync config: method must be dd");
  validate_sync_config(cfg, obj);
  Recorder rec(obj, cfg);
  BlockVector nu = initial_point(obj, cfg);
  BlockVector grad = obj.gradient(nu);  // -grad psi
  if (observer) observer(0, nu);
  if (rec.record(0, obj.recover_primal(nu), grad.data().norm())) return std::move(rec.trace());
  for (std::size_t t = 0; t < cfg.max_iterations; ++t) {
    for (NodeId i = 0; i < obj.nodes(); ++i) {
      nu.block(i) = nu.block(i) - cfg.stepsize * grad.block(i);
    }
    grad = obj.gradient(nu);
    if (observer) observer(t + 1, nu);
    if (rec.record(t + 1, obj.recover_primal(nu), grad.data().norm())) break;
  }
  return std::move(rec.trace());
}

Trace run_admm(const DistributedObjective& obj, const SyncConfig& cfg,
               const IterateObserver& observer) {
  if (cfg.method != Method::kAdmm) throw std::invalid_argument("sync config: method must be admm");
  validate_sync_config(cfg, obj);
  const auto& q = std::get<QuadraticInstance>(obj.instance());
  const Graph& g = obj.graph();
  const std::size_t n = obj.nodes();
  const std::size_t p = obj.dim();
  const double rho = cfg.stepsize;

  // Default start: each node at its own minimizer, multipliers at zero.
  BlockVector x(n, p);
  if (cfg.initial) {
    x = *cfg.initial;
  } else {
    for (NodeId i = 0; i < n; ++i) x.block(i) = -q.b[i].cwiseQuotient(q.a[i]);
  }
  BlockVector phi = cfg.initial_dual ? *cfg.initial_dual : BlockVector(n, p);

  Recorder rec(obj, cfg);
  if (observer) observer(0, x);
  if (rec.record(0, x, slack(obj, x).data().norm())) return std::move(rec.trace());
  for (std::size_t t = 0; t < cfg.max_iterations; ++t) {
    BlockVector x_new(n, p);
    for (NodeId i = 0; i < n; ++i) {
      const double deg = static_cast<double>(g.degree(i));
      Eigen::VectorXd rhs = -q.b[i] - phi.block(i) + rho * deg * x.block(i);
      for (NodeId j : g.neighborhood(i)) {
        if (j != i) rhs += rho * x.block(j);
      }
      const Eigen::VectorXd diag = q.a[i].array() + 2.0 * rho * deg;
      x_new.block(i) = rhs.cwiseQuotient(diag);
    }
    for (NodeId i = 0; i < n; ++i) {
      const double deg = static_cast<double>(g.degree(i));
      Eigen::VectorXd s = deg * x_new.block(i);
      for (NodeId j : g.neighborhood(i)) {
        if (j != i) s -= x_new.block(j);
      }
      phi.block(i) += rho * s;
    }
    x = std::move(x_new);
    if (observer) observer(t + 1, x);
    if (rec.record(t + 1, x, slack(obj, x).data().norm())) break;
  }
  return std::move(rec.trace());
}

Trace run_sync(const DistributedObjective& obj, const SyncConfig& cfg) {
  switch (cfg.method) {
    case Method::kDbfgs: return run_dbfgs_sync(obj, cfg);
    case Method::kDgd: return run_dgd(obj, cfg);
    case Method::kDd: return run_dd(obj, cfg);
    case Method::kAdmm: return run_admm(obj, cfg);
  }
  throw std::invalid_argument("sync config: unknown method");
}

}  // namespace dbfgs
