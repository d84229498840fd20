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

#include "dbfgs/async_sim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dbfgs/rng.hpp"
#include "dbfgs/sync_runtime.hpp"

namespace dbfgs {

ClockSchedule gen_clock_schedule(std::size_t n, double mean, double stddev, double horizon,
                                 std::uint64_t seed, double min_increment) {
  if (n == 0) throw std::invalid_argument("clock schedule: n must be > 0");
  if (!(mean > 0.0)) throw std::invalid_argument("clock schedule: mean must be > 0");
  if (!(stddev >= 0.0)) throw std::invalid_argument("clock schedule: stddev must be >= 0");
  if (!(min_increment > 0.0)) throw std::invalid_argument("clock schedule: min increment must be > 0");
  if (!(horizon >= 0.0)) throw std::invalid_argument("clock schedule: horizon must be >= 0");
  ClockSchedule s;
  s.horizon = horizon;
  s.mean = mean;
  s.stddev = stddev;
  s.seed = seed;
  s.times.resize(n);
  Rng rng(seed);
  for (auto& ti : s.times) {
    double t = 0.0;
    ti.push_back(t);
    for (;;) {
      const double step = stddev > 0.0 ? rng.normal(mean, stddev) : mean;
      t += std::max(step, min_increment);
      if (t > horizon) break;
      ti.push_back(t);
    }
  }
  return s;
}

void write_schedule(std::ostream& os, const ClockSchedule& s) {
  os.precision(17);
  os << "schedule " << s.nodes() << ' ' << s.horizon << ' ' << s.mean << ' ' << s.stddev << ' '
     << s.seed << '\n';
  for (std::size_t i = 0; i < s.nodes(); ++i) {
    os << i << ' ' << s.times[i].size();
    for (double t : s.times[i]) os << ' ' << t;
    os << '\n';
  }
}

ClockSchedule read_schedule(std::istream& is) {
  std::string tag;
  std::size_t n = 0;
  ClockSchedule s;
  if (!(is >> tag >> n >> s.horizon >> s.mean >> s.stddev >> s.seed) || tag != "schedule") {
    throw std::runtime_error("schedule: bad header");
  }
  s.times.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t i = 0, count = 0;
    if (!(is >> i >> count) || i != k) throw std::runtime_error("schedule: bad node line");
    s.times[i].resize(count);
    for (auto& t : s.times[i]) {
      if (!(is >> t)) throw std::runtime_error("schedule: truncated node line");
    }
    for (std::size_t m = 1; m < count; ++m) {
      if (!(s.times[i][m] > s.times[i][m - 1])) {
        throw std::runtime_error("schedule: times must be strictly increasing");
      }
    }
  }
  return s;
}

double last_availability(const ClockSchedule& s, NodeId i, double t) {
  const auto& ti = s.times.at(i);
  auto it = std::lower_bound(ti.begin(), ti.end(), t);
  if (it == ti.begin()) return 0.0;
  return *std::prev(it);
}

double generation_time(const ClockSchedule& s, NodeId i, NodeId j, double t) {
  const double own = last_availability(s, i, t);
  return i == j ? own : last_availability(s, j, own);
}

TimeFunctions time_functions(const ClockSchedule& s, NodeId i, NodeId j, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("time_functions: t must be >= 0");
  return {last_availability(s, i, t), generation_time(s, i, j, t)};
}

double measure_asynchronicity(const ClockSchedule& s, double horizon, const Graph* graph) {
  std::vector<double> grid;
  for (const auto& ti : s.times) {
    for (double t : ti) {
      if (t > 0.0 && t <= horizon) grid.push_back(t);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const std::size_t n = s.nodes();
  double worst = 0.0;
  for (double t : grid) {
    for (NodeId i = 0; i < n; ++i) {
      const double own = last_availability(s, i, t);
      worst = std::max(worst, t - own);
      auto visit = [&](NodeId j) {
        if (j != i) worst = std::max(worst, t - last_availability(s, j, own));
      };
      if (graph) {
        for (NodeId j : graph->neighborhood(i)) visit(j);
      } else {
        for (NodeId j = 0; j < n; ++j) visit(j);
      }
    }
  }
  return worst;
}

EventQueue::EventQueue(const ClockSchedule& s) : schedule_(s) {
  for (NodeId i = 0; i < s.nodes(); ++i) {
    if (!s.times[i].empty()) heap_.push({s.times[i][0], i, 0});
  }
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  const auto& ti = schedule_.times[e.node];
  if (e.index + 1 < ti.size()) heap_.push({ti[e.index + 1], e.node, e.index + 1});
  return e;
}

std::vector<Event> EventQueue::pop_batch() {
  std::vector<Event> batch;
  if (empty()) return batch;
  const double t = top().time;
  while (!empty() && top().time == t) batch.push_back(pop());
  return batch;
}

Eigen::VectorXd NodeState::own() const {
  const auto k = static_cast<std::size_t>(
      std::find(neighborhood.begin(), neighborhood.end(), id) - neighborhood.begin());
  return variable.at(k).value;
}

void validate_async_config(const AsyncConfig& cfg, const DistributedObjective& obj) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("async config: " + what);
  };
  require(cfg.method == Method::kDbfgs || cfg.method == Method::kDd,
          "method must be dbfgs or dd");
  require(std::isfinite(cfg.stepsize) && cfg.stepsize > 0.0, "stepsize must be > 0");
  require(cfg.max_local_iterations > 0, "max_local_iterations must be > 0");
  require(cfg.message_delay >= 0.0, "message_delay must be >= 0");
  require(cfg.divergence_limit > 0.0, "divergence_limit must be > 0");
  if (cfg.method == Method::kDbfgs) {
    require(cfg.curvature.gamma > 0.0, "dbfgs.gamma must be > 0");
    require(cfg.curvature.Gamma > 0.0, "dbfgs.Gamma must be > 0");
    require(cfg.initial_curvature > 0.0, "dbfgs.initial_curvature must be > 0");
  }
  if (cfg.method == Method::kDd) require(obj.mode() == Mode::kDual, "dd requires dual mode");
  if (cfg.initial) {
    require(cfg.initial->blocks() == obj.nodes() && cfg.initial->dim() == obj.dim(),
            "initial point has the wrong shape");
  }
}

namespace {

struct Sent {
  double time;
  Eigen::VectorXd value;
};

// Everything a node has ever sent of one kind, in send order. Neighbors
// read the latest entry visible at their own event time.
class Outbox {
 public:
  void send(double t, Eigen::VectorXd v) { log_.push_back({t, std::move(v)}); }
  const Sent* visible(double t, double delay) const {
    for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
      if (it->time + delay <= t) return &*it;
    }
    return nullptr;
  }

 private:
  std::vector<Sent> log_;
};

enum class Engine { kPhysical, kVirtual };

class Simulator {
 public:
  Simulator(const DistributedObjective& obj, const AsyncConfig& cfg, const ClockSchedule& sched,
            Engine engine, const AsyncObserver& observer)
      : obj_(obj),
        g_(obj.graph()),
        cfg_(cfg),
        sched_(sched),
        engine_(engine),
        observer_(observer),
        n_(obj.nodes()),
        p_(obj.dim()),
        pp_(static_cast<Eigen::Index>(p_)),
        dbfgs_(cfg.method == Method::kDbfgs),
        dual_(obj.mode() == Mode::kDual),
        optimum_(solve_consensus_optimum(obj.instance())) {
    validate_async_config(cfg, obj);
    if (sched.nodes() != n_) throw std::invalid_argument("schedule node count mismatch");
    trace_.method = cfg.method;
    trace_.mode = obj.mode();
    trace_.seed = cfg.seed;
    trace_.asynchronous = true;
  }

  Trace run() {
    initialize();
    if (record(0.0)) return std::move(trace_);
    EventQueue queue(sched_);
    trace_.status = RunStatus::kExhausted;
    while (!queue.empty()) {
      const auto batch = queue.pop_batch();
      const double t = batch.front().time;
      for (const auto& ev : batch) phase_apply(ev.node, t);
      if (dual_) {
        for (const auto& ev : batch) phase_recover(ev.node, t);
      }
      for (const auto& ev : batch) phase_gradient(ev.node, t);
      if (dbfgs_) {
        for (const auto& ev : batch) phase_curvature(ev.node, t);
      }
      events_ += batch.size();
      if (record(t)) break;
    }
    return std::move(trace_);
  }

 private:
  std::size_t slot(NodeId i, NodeId j) const { return *g_.slot(i, j); }

  Eigen::VectorXd read(NodeId i, std::vector<DatedBlock>& copies, const std::vector<Outbox>& boxes,
                       double t) const {
    const auto& nb = g_.neighborhood(i);
    Eigen::VectorXd out(static_cast<Eigen::Index>(nb.size() * p_));
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] != i) {
        if (const Sent* s = boxes[nb[k]].visible(t, cfg_.message_delay)) {
          copies[k].value = s->value;
          copies[k].generated = s->time;
        }
      }
      out.segment(static_cast<Eigen::Index>(k) * pp_, pp_) = copies[k].value;
    }
    return out;
  }

  void initialize() {
    BlockVector z = cfg_.initial ? *cfg_.initial : BlockVector(n_, p_);
    const BlockVector x = obj_.recover_primal(z);
    const BlockVector grad = obj_.gradient(z);
    nodes_.resize(n_);
    var_box_.resize(n_);
    primal_box_.resize(n_);
    grad_box_.resize(n_);
    if (engine_ == Engine::kVirtual) global_ = z;
    for (NodeId i = 0; i < n_; ++i) {
      NodeState& s = nodes_[i];
      s.id = i;
      s.neighborhood = g_.neighborhood(i);
      for (NodeId j : s.neighborhood) {
        s.variable.push_back({z.block(j), 0.0});
        s.gradient.push_back({grad.block(j), 0.0});
        if (dual_) s.primal.push_back({x.block(j), 0.0});
      }
      s.prev_z_nb = z.gather(s.neighborhood);
      s.prev_g_nb = grad.gather(s.neighborhood);
      if (dbfgs_) s.curvature.emplace(g_, i, p_, cfg_.curvature, cfg_.initial_curvature);
    }
    if (dbfgs_) {
      const double before_start = -std::numeric_limits<double>::infinity();
      for (NodeId i = 0; i < n_; ++i) dispatch_descent(i, before_start, nodes_[i].prev_g_nb);
    }
  }

  // Sends the blocks of e^i to their owners, or adds them to the global
  // variable in the virtual engine.
  void dispatch_descent(NodeId i, double t, const Eigen::VectorXd& g_nb) {
    const NodeState& s = nodes_[i];
    const Eigen::VectorXd e = neighborhood_descent(*s.curvature, g_nb);
    for (std::size_t k = 0; k < s.neighborhood.size(); ++k) {
      const NodeId j = s.neighborhood[k];
      const Eigen::VectorXd block = e.segment(static_cast<Eigen::Index>(k) * pp_, pp_);
      if (engine_ == Engine::kVirtual) {
        global_.block(j) += cfg_.stepsize * block;
      } else {
        nodes_[j].pending.push_back({t, i, block});
      }
    }
  }

  void phase_apply(NodeId i, double t) {
    NodeState& s = nodes_[i];
    const std::size_t self = slot(i, i);
    Eigen::VectorXd& own = s.variable[self].value;
    if (!dbfgs_) {
      own = own - cfg_.stepsize * s.gradient[self].value;
    } else if (engine_ == Engine::kVirtual) {
      own = global_.block(i);
    } else {
      std::vector<PendingDescent> ready;
      std::vector<PendingDescent> later;
      for (auto& m : s.pending) {
        const double delay = m.sender == i ? 0.0 : cfg_.message_delay;
        (m.sent + delay <= t ? ready : later).push_back(std::move(m));
      }
      s.pending = std::move(later);
      if (!ready.empty()) {
        std::stable_sort(ready.begin(), ready.end(), [](const auto& a, const auto& b) {
          return a.sent != b.sent ? a.sent < b.sent : a.sender < b.sender;
        });
        std::vector<Eigen::VectorXd> parts;
        parts.reserve(ready.size());
        for (auto& m : ready) parts.push_back(std::move(m.block));
        own = own + cfg_.stepsize * aggregate_descent(parts);
      }
    }
    s.variable[self].generated = t;
    s.last_time = t;
    ++s.local_iterations;
    var_box_[i].send(t, own);
    if (observer_) observer_(AsyncEvent{t, i, s.local_iterations, own, s});
  }

  void phase_recover(NodeId i, double t) {
    NodeState& s = nodes_[i];
    const Eigen::VectorXd nu_nb = read(i, s.variable, var_box_, t);
    const std::size_t self = slot(i, i);
    s.primal[self].value = obj_.dual_lagrangian_minimizer_i(i, nu_nb);
    s.primal[self].generated = t;
    primal_box_[i].send(t, s.primal[self].value);
  }

  void phase_gradient(NodeId i, double t) {
    NodeState& s = nodes_[i];
    const Eigen::VectorXd nb =
        dual_ ? read(i, s.primal, primal_box_, t) : read(i, s.variable, var_box_, t);
    const std::size_t self = slot(i, i);
    s.gradient[self].value = obj_.descent_grad_i(i, nb);
    s.gradient[self].generated = t;
    grad_box_[i].send(t, s.gradient[self].value);
  }

  void phase_curvature(NodeId i, double t) {
    NodeState& s = nodes_[i];
    Eigen::VectorXd z_nb = read(i, s.variable, var_box_, t);
    Eigen::VectorXd g_nb = read(i, s.gradient, grad_box_, t);
    const VariationPair pair = modified_variations(s.prev_z_nb, z_nb, s.prev_g_nb, g_nb,
                                                   s.curvature->normalizer(), cfg_.curvature.gamma);
    if (bfgs_update(*s.curvature, pair) == UpdateOutcome::kAccepted) {
      ++trace_.accepted_updates;
    } else {
      ++trace_.skipped_updates;
    }
    dispatch_descent(i, t, g_nb);
    s.prev_z_nb = std::move(z_nb);
    s.prev_g_nb = std::move(g_nb);
  }

  BlockVector current() const {
    if (engine_ == Engine::kVirtual && dbfgs_) return global_;
    BlockVector z(n_, p_);
    for (NodeId i = 0; i < n_; ++i) z.block(i) = nodes_[i].variable[slot(i, i)].value;
    return z;
  }

  bool record(double t) {
    const BlockVector z = current();
    TraceRecord r;
    std::size_t min_iter = std::numeric_limits<std::size_t>::max();
    for (const auto& s : nodes_) min_iter = std::min(min_iter, s.local_iterations);
    r.iter = trace_.records.size();
    r.error = consensus_error(obj_.recover_primal(z), optimum_);
    r.grad_norm = reported_grad_norm(obj_, obj_.gradient(z));
    r.exchanges = events_ * exchanges_per_iteration(cfg_.method, obj_.mode()) / n_;
    r.model_time = t;
    r.local_iter_min = min_iter;
    trace_.records.push_back(r);
    if (!std::isfinite(r.error) || r.error > cfg_.divergence_limit) {
      trace_.status = RunStatus::kDiverged;
      return true;
    }
    if (min_iter >= cfg_.max_local_iterations) {
      trace_.status = RunStatus::kMaxIterations;
      return true;
    }
    return false;
  }

  const DistributedObjective& obj_;
  const Graph& g_;
  const AsyncConfig& cfg_;
  const ClockSchedule& sched_;
  Engine engine_;
  const AsyncObserver& observer_;
  std::size_t n_;
  std::size_t p_;
  Eigen::Index pp_;
  bool dbfgs_;
  bool dual_;
  Eigen::VectorXd optimum_;

  std::vector<NodeState> nodes_;
  std::vector<Outbox> var_box_;
  std::vector<Outbox> primal_box_;
  std::vector<Outbox> grad_box_;
  BlockVector global_;
  std::size_t events_ = 0;
  Trace trace_;
};

}  // namespace

Trace run_dbfgs_async(const DistributedObjective& obj, const AsyncConfig& cfg,
                      const ClockSchedule& schedule, const AsyncObserver& observer) {
  if (cfg.method != Method::kDbfgs) throw std::invalid_argument("async config: method must be dbfgs");
  return Simulator(obj, cfg, schedule, Engine::kPhysical, observer).run();
}

Trace virtual_replay(const DistributedObjective& obj, const AsyncConfig& cfg,
                     const ClockSchedule& schedule, const AsyncObserver& observer) {
  if (cfg.method != Method::kDbfgs) throw std::invalid_argument("async config: method must be dbfgs");
  return Simulator(obj, cfg, schedule, Engine::kVirtual, observer).run();
}

Trace run_dd_async(const DistributedObjective& obj, const AsyncConfig& cfg,
                   const ClockSchedule& schedule, const AsyncObserver& observer) {
  if (cfg.method != Method::kDd) throw std::invalid_argument("async config: method must be dd");
  return Simulator(obj, cfg, schedule, Engine::kPhysical, observer).run();
}

}  // namespace dbfgs
