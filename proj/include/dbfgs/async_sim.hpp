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

// Discrete-event simulation of asynchronous D-BFGS and dual decomposition.
//
// Node i wakes at its availability times T^i. Nodes sharing a timestamp form
// one batch and run each phase in node-id order:
//
//   A  apply the descent blocks received so far, send the new variable
//   B  (dual only) recover x_i(nu) from the nu copies, send it
//   C  compute g_i from the copies, send it
//   D  update B from the dated neighborhood pair, send e^i_j to every j
//
// A message sent at time s becomes readable once s + delay <= t. With zero
// delay, data produced by j at its last availability before i's is what i
// sees, which is the pi^i_j = pi^j o pi^i model.

#ifndef DBFGS_ASYNC_SIM_HPP_
#define DBFGS_ASYNC_SIM_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <queue>
#include <vector>

#include "dbfgs/curvature.hpp"
#include "dbfgs/objectives.hpp"
#include "dbfgs/trace.hpp"

namespace dbfgs {

inline constexpr double kMinClockIncrement = 0.01;

struct ClockSchedule {
  std::vector<std::vector<double>> times;  // per node, strictly increasing, times[i][0] = 0
  double horizon = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  std::uint64_t seed = 0;

  std::size_t nodes() const { return times.size(); }
};

/// t_k = t_{k-1} + max(N(mean, stddev), min_increment) for every t_k <= horizon.
/// Nodes draw from one stream in id order.
ClockSchedule gen_clock_schedule(std::size_t n, double mean, double stddev, double horizon,
                                 std::uint64_t seed, double min_increment = kMinClockIncrement);

/// Text form: "schedule <n> <horizon> <mean> <stddev> <seed>" then one line
/// per node: "<i> <count> <t_0> <t_1> ...".
void write_schedule(std::ostream& os, const ClockSchedule& s);
ClockSchedule read_schedule(std::istream& is);

/// pi^i(t): latest availability of i strictly before t, or 0 if none.
double last_availability(const ClockSchedule& s, NodeId i, double t);

/// pi^i_j(t) = pi^j(pi^i(t)): generation time of the j data i holds at t.
/// Own data is never stale, so pi^i_i = pi^i.
double generation_time(const ClockSchedule& s, NodeId i, NodeId j, double t);

struct TimeFunctions {
  double own;       // pi^i(t)
  double neighbor;  // pi^i_j(t)
};
TimeFunctions time_functions(const ClockSchedule& s, NodeId i, NodeId j, double t);

/// Smallest B with t - pi^i_j(t) <= B over every availability time t > 0
/// up to the horizon and every pair (i, j). Pass a graph to restrict j to
/// neighborhoods.
double measure_asynchronicity(const ClockSchedule& s, double horizon,
                              const Graph* graph = nullptr);

struct Event {
  double time;
  NodeId node;
  std::size_t index;  // position in T^node
};

/// Availability events in (time, node id) order.
class EventQueue {
 public:
  explicit EventQueue(const ClockSchedule& s);
  bool empty() const { return heap_.empty(); }
  const Event& top() const { return heap_.top(); }
  Event pop();
  /// Removes and returns every event sharing the earliest timestamp.
  std::vector<Event> pop_batch();

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.node > b.node;
    }
  };
  const ClockSchedule& schedule_;
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
};

struct AsyncConfig {
  Method method = Method::kDbfgs;  // dbfgs or dd
  double stepsize = 0.01;
  CurvatureParams curvature{1e-1, 1e-1};
  double initial_curvature = 1.0;
  std::size_t max_local_iterations = 200;  // stop once every node has done this many
  double message_delay = 0.0;
  double divergence_limit = 1e12;
  std::uint64_t seed = 0;  // recorded in the trace only
  std::optional<BlockVector> initial;
};

void validate_async_config(const AsyncConfig& cfg, const DistributedObjective& obj);

struct DatedBlock {
  Eigen::VectorXd value;
  double generated = 0.0;  // send time of the copy
};

struct PendingDescent {
  double sent;
  NodeId sender;
  Eigen::VectorXd block;
};

/// Local knowledge of one node.
struct NodeState {
  NodeId id = 0;
  std::vector<NodeId> neighborhood;
  std::vector<DatedBlock> variable;  // z copies; own slot is current
  std::vector<DatedBlock> primal;    // dual mode: x(nu) copies
  std::vector<DatedBlock> gradient;  // g copies
  std::vector<PendingDescent> pending;
  std::optional<CurvatureState> curvature;
  Eigen::VectorXd prev_z_nb;  // pair from the previous event
  Eigen::VectorXd prev_g_nb;
  std::size_t local_iterations = 0;
  double last_time = 0.0;

  Eigen::VectorXd own() const;
};

/// Reported once per node event, after the variable has been updated.
struct AsyncEvent {
  double time;
  NodeId node;
  std::size_t local_iteration;  // 1 at the first availability
  const Eigen::VectorXd& value; // node's own variable
  const NodeState& state;
};

using AsyncObserver = std::function<void(const AsyncEvent&)>;

Trace run_dbfgs_async(const DistributedObjective& obj, const AsyncConfig& cfg,
                      const ClockSchedule& schedule, const AsyncObserver& observer = {});

/// Same events, but every descent is added to a global variable when it is
/// computed; a node's own value at its availability is read from there.
Trace virtual_replay(const DistributedObjective& obj, const AsyncConfig& cfg,
                     const ClockSchedule& schedule, const AsyncObserver& observer = {});

Trace run_dd_async(const DistributedObjective& obj, const AsyncConfig& cfg,
                   const ClockSchedule& schedule, const AsyncObserver& observer = {});

}  // namespace dbfgs

#endif  // DBFGS_ASYNC_SIM_HPP_
