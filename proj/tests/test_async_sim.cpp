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

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "dbfgs/async_sim.hpp"
#include "dbfgs/harness.hpp"
#include "dbfgs/sync_runtime.hpp"
#include "test_util.hpp"

using namespace dbfgs;
using namespace dbfgs::testing;

namespace {

ClockSchedule manual(std::vector<std::vector<double>> times) {
  ClockSchedule s;
  s.times = std::move(times);
  s.horizon = 100.0;
  return s;
}

DistributedObjective dual_instance(std::size_t n, std::size_t d, double eta, std::uint64_t seed) {
  const Graph g = build_d_regular_cycle(n, d);
  return DistributedObjective::dual(g, build_weight_matrix(g, d), make_quadratic(n, 4, eta, seed));
}

DistributedObjective primal_instance(std::size_t n, double eta, std::uint64_t seed) {
  const Graph g = build_d_regular_cycle(n, 2);
  return DistributedObjective::primal(g, build_weight_matrix(g, 2), make_quadratic(n, 2, eta, seed),
                                      1.0);
}

AsyncConfig async_config(Method m, double step, std::size_t iters) {
  AsyncConfig c;
  c.method = m;
  c.stepsize = step;
  c.max_local_iterations = iters;
  return c;
}

double slope(const std::vector<double>& y) {
  const double m = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double x = static_cast<double>(k);
    sx += x;
    sy += y[k];
    sxx += x * x;
    sxy += x * y[k];
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST_CASE("clock schedules") {
  const ClockSchedule lock = gen_clock_schedule(4, 1.5, 0.0, 10.0, 1);
  for (const auto& ti : lock.times) {
    REQUIRE(ti.size() == 7);
    for (std::size_t k = 0; k < ti.size(); ++k) CHECK(ti[k] == doctest::Approx(1.5 * k));
  }
  const ClockSchedule a = gen_clock_schedule(10, 1.0, 0.3, 50.0, 9);
  const ClockSchedule b = gen_clock_schedule(10, 1.0, 0.3, 50.0, 9);
  CHECK(a.times == b.times);
  CHECK(a.times != gen_clock_schedule(10, 1.0, 0.3, 50.0, 10).times);
  const ClockSchedule wild = gen_clock_schedule(10, 0.05, 1.0, 20.0, 2);
  for (const auto& ti : wild.times) {
    CHECK(ti.front() == 0.0);
    CHECK(ti.back() <= 20.0);
    for (std::size_t k = 1; k < ti.size(); ++k) CHECK(ti[k] - ti[k - 1] >= kMinClockIncrement - 1e-15);
  }
  CHECK_THROWS_AS(gen_clock_schedule(3, 0.0, 0.1, 5.0, 1), std::invalid_argument);
}

TEST_CASE("schedule text round trip") {
  const ClockSchedule s = gen_clock_schedule(5, 1.0, 0.1, 12.0, 4);
  std::stringstream ss;
  write_schedule(ss, s);
  const ClockSchedule r = read_schedule(ss);
  CHECK(r.times == s.times);
  CHECK(r.seed == 4);
  std::stringstream bad("schedule 1 5 1 0 0\n0 3 0 2 1\n");
  CHECK_THROWS(read_schedule(bad));
}

TEST_CASE("time functions") {
  const ClockSchedule s = manual({{0.0, 3.0, 5.0}, {0.0, 2.0}});
  CHECK(time_functions(s, 0, 0, 4.0).own == 3.0);
  CHECK(time_functions(s, 0, 0, 4.0).neighbor == 3.0);
  const ClockSchedule c = manual({{0.0, 3.0}, {0.0, 2.0}});
  CHECK(time_functions(c, 0, 1, 4.0).neighbor == 2.0);
  CHECK(last_availability(s, 0, 0.0) == 0.0);
  CHECK(last_availability(s, 0, 3.0) == 0.0);
  const ClockSchedule lock = gen_clock_schedule(3, 1.0, 0.0, 10.0, 1);
  for (double t : {2.5, 6.0, 9.0}) {
    for (NodeId j = 0; j < 3; ++j) {
      CHECK(generation_time(lock, 1, j, t) <= t);
      CHECK(generation_time(lock, 1, j, t) ==
            (j == 1 ? std::ceil(t) - 1.0 : std::max(0.0, std::ceil(t) - 2.0)));
    }
  }
  CHECK_THROWS_AS(time_functions(s, 0, 1, -1.0), std::invalid_argument);
}

TEST_CASE("measured asynchronicity") {
  CHECK(measure_asynchronicity(gen_clock_schedule(5, 1.0, 0.0, 30.0, 1), 30.0) ==
        doctest::Approx(2.0));
  CHECK(measure_asynchronicity(gen_clock_schedule(5, 0.5, 0.0, 30.0, 1), 30.0) ==
        doctest::Approx(1.0));
  const ClockSchedule one = manual({{0.0, 1.0, 4.0, 4.5}});
  CHECK(measure_asynchronicity(one, 5.0) == doctest::Approx(3.0));

  std::vector<double> low, high;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    low.push_back(measure_asynchronicity(gen_clock_schedule(20, 1.0, 0.1, 60.0, seed), 60.0));
    high.push_back(measure_asynchronicity(gen_clock_schedule(20, 1.0, 0.3, 60.0, seed), 60.0));
    CHECK(std::isfinite(high.back()));
  }
  CHECK(median(high) > median(low));

  // Restricting to neighborhoods can only shrink the bound.
  const Graph g = build_d_regular_cycle(20, 2);
  const ClockSchedule s = gen_clock_schedule(20, 1.0, 0.3, 60.0, 3);
  CHECK(measure_asynchronicity(s, 60.0, &g) <= measure_asynchronicity(s, 60.0));
}

TEST_CASE("event queue orders by time then node") {
  const ClockSchedule s = manual({{0.0, 2.0}, {0.0, 1.0, 2.0}, {0.0, 0.5}});
  EventQueue q(s);
  std::vector<std::pair<double, NodeId>> seen;
  while (!q.empty()) {
    const Event e = q.pop();
    seen.emplace_back(e.time, e.node);
  }
  const std::vector<std::pair<double, NodeId>> want = {{0.0, 0}, {0.0, 1}, {0.0, 2}, {0.5, 2},
                                                       {1.0, 1}, {2.0, 0}, {2.0, 1}};
  CHECK(seen == want);
  EventQueue batches(s);
  CHECK(batches.pop_batch().size() == 3);
  CHECK(batches.pop_batch().size() == 1);
}

TEST_CASE("lockstep schedules reproduce the synchronous runtime") {
  const auto dual = dual_instance(10, 4, 1.0, 3);
  const auto primal = primal_instance(8, 2.0, 3);
  const ClockSchedule lock = gen_clock_schedule(10, 1.0, 0.0, 100.0, 1);
  const ClockSchedule lock8 = gen_clock_schedule(8, 1.0, 0.0, 100.0, 1);
  struct Case {
    const DistributedObjective* obj;
    Method method;
    double step;
    const ClockSchedule* schedule;
  };
  for (const Case& c : {Case{&dual, Method::kDbfgs, 0.01, &lock}, Case{&dual, Method::kDd, 0.002, &lock},
                        Case{&primal, Method::kDbfgs, 0.05, &lock8}}) {
    AsyncConfig ac = async_config(c.method, c.step, 60);
    SyncConfig sc;
    sc.method = c.method;
    sc.stepsize = c.step;
    sc.curvature = ac.curvature;
    sc.max_iterations = 60;
    const Trace a = c.method == Method::kDd ? run_dd_async(*c.obj, ac, *c.schedule)
                                            : run_dbfgs_async(*c.obj, ac, *c.schedule);
    const Trace s = run_sync(*c.obj, sc);
    REQUIRE(a.records.size() == s.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      CHECK(a.records[k].error == s.records[k].error);
      CHECK(a.records[k].local_iter_min == k);
    }
    CHECK(a.last().exchanges == s.last().exchanges);
  }
}

TEST_CASE("physical and virtual engines agree at every event") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto obj = dual_instance(10, 4, 1.0, seed);
    const ClockSchedule s = gen_clock_schedule(10, 1.0, 0.3, 15.0, seed + 100);
    const AsyncConfig c = async_config(Method::kDbfgs, 0.01, 10);
    std::map<std::pair<NodeId, std::size_t>, Eigen::VectorXd> physical;
    run_dbfgs_async(obj, c, s, [&](const AsyncEvent& e) {
      physical[{e.node, e.local_iteration}] = e.value;
    });
    double worst = 0.0;
    std::size_t matched = 0;
    virtual_replay(obj, c, s, [&](const AsyncEvent& e) {
      auto it = physical.find({e.node, e.local_iteration});
      REQUIRE(it != physical.end());
      worst = std::max(worst, max_abs_diff(it->second, e.value));
      ++matched;
    });
    CHECK(matched == physical.size());
    CHECK(matched >= 100);
    CHECK(worst <= 1e-12);
  }
  const Graph single(1, {});
  const auto one = DistributedObjective::dual(single, build_weight_matrix(single, 0),
                                              make_quadratic(1, 2, 1.0, 1));
  const ClockSchedule s1 = gen_clock_schedule(1, 1.0, 0.2, 40.0, 1);
  const Trace a = run_dbfgs_async(one, async_config(Method::kDbfgs, 0.1, 20), s1);
  const Trace b = virtual_replay(one, async_config(Method::kDbfgs, 0.1, 20), s1);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) CHECK(a.records[k].error == b.records[k].error);
}

TEST_CASE("dated copies are never newer than the holder's last availability") {
  const auto obj = primal_instance(8, 1.0, 5);
  const ClockSchedule s = gen_clock_schedule(8, 1.0, 0.3, 40.0, 5);
  std::size_t checked = 0;
  run_dbfgs_async(obj, async_config(Method::kDbfgs, 0.05, 20), s, [&](const AsyncEvent& e) {
    const double prev = last_availability(s, e.node, e.time);
    for (std::size_t k = 0; k < e.state.neighborhood.size(); ++k) {
      const NodeId j = e.state.neighborhood[k];
      const double gen = e.state.variable[k].generated;
      if (j == e.node) {
        CHECK(gen == e.time);
        continue;
      }
      CHECK(gen <= prev);
      CHECK(gen >= generation_time(s, e.node, j, e.time));
      ++checked;
    }
  });
  CHECK(checked > 0);
}

TEST_CASE("fixed points of the asynchronous methods") {
  // D-BFGS from the exact penalty minimizer.
  const auto obj = primal_instance(6, 2.0, 8);
  const std::size_t dim = 12;
  Eigen::MatrixXd h(dim, dim);
  const Eigen::VectorXd c0 = obj.gradient(BlockVector(6, 2)).data();
  for (std::size_t k = 0; k < dim; ++k) {
    BlockVector e(6, 2);
    e.data()(static_cast<Eigen::Index>(k)) = 1.0;
    h.col(static_cast<Eigen::Index>(k)) = obj.gradient(e).data() - c0;
  }
  AsyncConfig c = async_config(Method::kDbfgs, 0.02, 20);
  c.initial = BlockVector(2, h.ldlt().solve(-c0));
  const ClockSchedule s = gen_clock_schedule(6, 1.0, 0.3, 40.0, 8);
  run_dbfgs_async(obj, c, s, [&](const AsyncEvent& e) {
    CHECK(max_abs_diff(e.value, c.initial->block(e.node)) <= 1e-12);
  });

  // DD from a constant multiplier with identical local problems.
  const Graph g = build_d_regular_cycle(6, 2);
  QuadraticInstance q = make_quadratic(6, 2, 0.0, 1);
  for (auto& b : q.b) b = Eigen::Vector2d(0.4, 0.9);
  const auto dual = DistributedObjective::dual(g, build_weight_matrix(g, 2), q);
  AsyncConfig dc = async_config(Method::kDd, 0.1, 20);
  dc.initial = BlockVector(2, Eigen::VectorXd::Constant(12, 0.7));
  run_dd_async(dual, dc, s, [&](const AsyncEvent& e) {
    CHECK(e.value == Eigen::Vector2d::Constant(0.7));
  });
}

TEST_CASE("asynchronous D-BFGS drives the gradient down at a linear rate") {
  const auto obj = primal_instance(10, 1.0, 13);
  const ClockSchedule s = gen_clock_schedule(10, 1.0, 0.3, 400.0, 13);
  AsyncConfig c = async_config(Method::kDbfgs, 0.05, 200);
  c.curvature = {1.0, 1.0};
  const Trace t = run_dbfgs_async(obj, c, s);
  REQUIRE(t.status == RunStatus::kMaxIterations);
  CHECK(t.last().grad_norm <= t.records.front().grad_norm / 10.0);

  // The consensus error floors at the penalty bias, so the rate is read off
  // the distance to the penalty minimizer through the gradient norm.
  std::vector<double> log_grad;
  for (std::size_t k = 1; k <= 200; ++k) {
    log_grad.push_back(std::log(t.at_local_iteration(k)->grad_norm));
  }
  CHECK(slope(log_grad) < 0.0);
  CHECK(slope({log_grad.begin() + 100, log_grad.end()}) < 0.0);
}

TEST_CASE("asynchronous runs are deterministic") {
  const auto obj = dual_instance(10, 4, 1.0, 2);
  const ClockSchedule s = gen_clock_schedule(10, 1.0, 0.3, 30.0, 2);
  for (Method m : {Method::kDbfgs, Method::kDd}) {
    const AsyncConfig c = async_config(m, 0.01, 15);
    std::vector<std::pair<double, NodeId>> ea, eb;
    auto run = [&](std::vector<std::pair<double, NodeId>>& out) {
      AsyncObserver obs = [&](const AsyncEvent& e) { out.emplace_back(e.time, e.node); };
      return m == Method::kDd ? run_dd_async(obj, c, s, obs) : run_dbfgs_async(obj, c, s, obs);
    };
    const Trace a = run(ea), b = run(eb);
    CHECK(ea == eb);
    std::ostringstream sa, sb;
    write_trace_csv(sa, a);
    write_trace_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("iter,error,grad_norm,exchanges,method,mode,seed,model_time,local_iter_min",
                         0) == 0);
  }
}

TEST_CASE("message delay and short schedules") {
  const auto obj = dual_instance(10, 4, 1.0, 4);
  const ClockSchedule s = gen_clock_schedule(10, 1.0, 0.1, 60.0, 4);
  AsyncConfig c = async_config(Method::kDbfgs, 0.01, 40);
  c.message_delay = 0.5;
  const Trace delayed = run_dbfgs_async(obj, c, s);
  CHECK(delayed.status == RunStatus::kMaxIterations);
  CHECK(delayed.last().error < delayed.records.front().error);

  const ClockSchedule tiny = gen_clock_schedule(10, 1.0, 0.1, 5.0, 4);
  CHECK(run_dbfgs_async(obj, async_config(Method::kDbfgs, 0.01, 40), tiny).status ==
        RunStatus::kExhausted);
  CHECK_THROWS_AS(run_dbfgs_async(obj, async_config(Method::kDbfgs, 0.01, 40),
                                  gen_clock_schedule(3, 1.0, 0.1, 5.0, 4)),
                  std::invalid_argument);
}
