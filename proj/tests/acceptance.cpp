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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"
#include "dbfgs/async_sim.hpp"
#include "dbfgs/harness.hpp"
#include "dbfgs/sync_runtime.hpp"
#include "test_util.hpp"

using namespace dbfgs;
using namespace dbfgs::testing;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s  [%s]\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double min_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
}

double max_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().maxCoeff();
}

Eigen::MatrixXd dense_hessian(const DistributedObjective& obj, Eigen::VectorXd& c) {
  const std::size_t n = obj.nodes(), p = obj.dim();
  const auto dim = static_cast<Eigen::Index>(n * p);
  c = obj.gradient(BlockVector(n, p)).data();
  Eigen::MatrixXd h(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    BlockVector e(n, p);
    e.data()(k) = 1.0;
    h.col(k) = obj.gradient(e).data() - c;
  }
  return h;
}

void local_secant() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(2026);
  const Graph single(1, {});
  std::size_t accepted = 0;
  double worst = 0.0;
  for (std::size_t dim : {1, 4, 8, 20}) {
    for (int trial = 0; trial < 300; ++trial) {
      const double gamma = 1e-3 + 0.2 * rng.uniform();
      CurvatureState s(single, 0, dim, {gamma, 1e-3});
      const auto d = static_cast<Eigen::Index>(dim);
      s.set_matrix(random_spd(rng, d, 1e-2));
      const Eigen::VectorXd v = random_vector(rng, d);
      const Eigen::VectorXd dg = random_spd(rng, d, gamma) * v;
      const VariationPair pair{v, dg - gamma * v, dg};
      if (bfgs_update(s, pair) != UpdateOutcome::kAccepted) continue;
      ++accepted;
      worst = std::max(worst, (s.matrix() * v - dg).norm() / dg.norm());
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report("local secant over randomized accepted updates", accepted >= 1000 && worst <= 1e-8 &&
                                                              secs < 5.0,
         std::to_string(accepted) + " accepted, worst " + fmt("%.2e", worst) + ", " +
             fmt("%.2f s", secs));
}

// Global secant and assembled spectrum over 5-node runs.
void global_properties() {
  std::size_t eligible = 0, held = 0, steps = 0, spectrum_ok = 0;
  double worst_lo = 1e300, worst_hi = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Graph g = build_d_regular_cycle(5, 2);
    const WeightMatrix w = build_weight_matrix(g, 2);
    const auto inst = make_quadratic(5, 2, 2.0, seed);
    const bool dual = seed % 2 == 0;
    const auto obj = dual ? DistributedObjective::dual(g, w, inst)
                          : DistributedObjective::primal(g, w, inst, 0.1);
    SyncConfig c;
    c.method = Method::kDbfgs;
    c.stepsize = dual ? 0.05 : 0.02;
    c.curvature = {1e-2, 1e-3};
    c.max_iterations = 50;
    const double gamma = c.curvature.gamma, big = c.curvature.Gamma;
    run_dbfgs_sync(obj, c, [&](const SyncStep& s) {
      Eigen::MatrixXd h = assemble_global_descent_matrix(s.states_after, g, 2);
      const double lo = min_eig(h), hi = max_eig(h);
      worst_lo = std::min(worst_lo, lo);
      worst_hi = std::max(worst_hi, hi);
      ++steps;
      if (lo >= big - 1e-10 && hi <= big + 5.0 / gamma + 1e-6) ++spectrum_ok;
      if (!std::all_of(s.outcomes.begin(), s.outcomes.end(),
                       [](UpdateOutcome o) { return o == UpdateOutcome::kAccepted; })) {
        return;
      }
      h.diagonal().array() -= big;
      const Eigen::VectorXd v = s.z_new.data() - s.z_old.data();
      const Eigen::VectorXd r = s.g_new.data() - s.g_old.data();
      if (v.norm() == 0.0) return;
      ++eligible;
      if ((h * r - v).norm() <= 1e-8 * v.norm()) ++held;
    });
  }
  const double frac = eligible ? static_cast<double>(held) / static_cast<double>(eligible) : 0.0;
  report("global secant on 5-node runs", eligible > 0 && frac >= 0.95,
         std::to_string(held) + "/" + std::to_string(eligible) + " eligible steps");
  report("assembled descent matrix spectrum within [Gamma, Gamma + n/gamma]",
         steps > 0 && spectrum_ok == steps,
         std::to_string(steps) + " steps, eigenvalues in " + fmt("[%.4g, %.4g]", worst_lo, worst_hi));
}

void engine_equivalence() {
  double worst = 0.0;
  std::size_t min_events = SIZE_MAX;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Graph g = build_d_regular_cycle(10, 4);
    const auto obj =
        DistributedObjective::dual(g, build_weight_matrix(g, 4), make_quadratic(10, 4, 1.0, seed));
    const ClockSchedule s = gen_clock_schedule(10, 1.0, 0.3, 20.0, seed + 7);
    AsyncConfig c;
    c.method = Method::kDbfgs;
    c.stepsize = 0.01;
    c.max_local_iterations = 10;
    std::map<std::pair<NodeId, std::size_t>, Eigen::VectorXd> physical;
    run_dbfgs_async(obj, c, s, [&](const AsyncEvent& e) {
      physical[{e.node, e.local_iteration}] = e.value;
    });
    std::size_t events = 0;
    virtual_replay(obj, c, s, [&](const AsyncEvent& e) {
      auto it = physical.find({e.node, e.local_iteration});
      worst = it == physical.end() ? INFINITY : std::max(worst, max_abs_diff(it->second, e.value));
      ++events;
    });
    min_events = std::min(min_events, events);
  }
  report("physical and virtual asynchronous engines agree", worst <= 1e-12 && min_events >= 100,
         "10 schedules, >= " + std::to_string(min_events) + " events each, max diff " +
             fmt("%.2e", worst));
}

void lockstep() {
  double worst = 0.0;
  for (Method m : {Method::kDbfgs, Method::kDd}) {
    const Graph g = build_d_regular_cycle(20, 4);
    const auto obj =
        DistributedObjective::dual(g, build_weight_matrix(g, 4), make_quadratic(20, 4, 1.0, 5));
    const ClockSchedule s = gen_clock_schedule(20, 1.0, 0.0, 200.0, 1);
    AsyncConfig ac;
    ac.method = m;
    ac.stepsize = m == Method::kDbfgs ? 0.01 : 0.002;
    ac.max_local_iterations = 100;
    SyncConfig sc;
    sc.method = m;
    sc.stepsize = ac.stepsize;
    sc.curvature = ac.curvature;
    sc.max_iterations = 100;
    const Trace a = m == Method::kDbfgs ? run_dbfgs_async(obj, ac, s) : run_dd_async(obj, ac, s);
    const Trace b = run_sync(obj, sc);
    if (a.records.size() != b.records.size()) {
      worst = INFINITY;
      continue;
    }
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      worst = std::max(worst, std::abs(a.records[k].error - b.records[k].error));
    }
  }
  report("lockstep asynchronous runs match the synchronous runtime", worst <= 1e-12,
         "dbfgs and dd, 100 iterations, max error diff " + fmt("%.2e", worst));
}

void locality_and_fd() {
  Rng rng(77);
  const Graph g = build_d_regular_cycle(12, 4);
  const WeightMatrix w = build_weight_matrix(g, 4);
  const auto quad = make_quadratic(12, 4, 2.0, 77);
  const std::vector<DistributedObjective> objs = {
      DistributedObjective::primal(g, w, quad, 0.1),
      DistributedObjective::primal(g, w, quad, 0.1, PenaltyScaling::kNormalized),
      DistributedObjective::primal(g, w, make_logistic(12, 4, 8, 1e-2, 1, 1, 1, 77), 0.1),
      DistributedObjective::dual(g, w, quad)};
  std::size_t leaks = 0, fd_bad = 0, fd_checks = 0;
  for (const auto& obj : objs) {
    for (int trial = 0; trial < 5; ++trial) {
      const BlockVector z = random_blocks(rng, 12, 4);
      // Local maps read n_i only: scramble everything outside it.
      for (NodeId i = 0; i < 12; ++i) {
        BlockVector far = z;
        for (NodeId k = 0; k < 12; ++k) {
          if (!g.slot(i, k)) far.block(k) = random_vector(rng, 4, -1e3, 1e3);
        }
        const auto& nb = g.neighborhood(i);
        const bool same = obj.mode() == Mode::kPrimal
                              ? obj.primal_grad_i(i, z.gather(nb)) == obj.primal_grad_i(i, far.gather(nb))
                              : obj.dual_lagrangian_minimizer_i(i, z.gather(nb)) ==
                                    obj.dual_lagrangian_minimizer_i(i, far.gather(nb));
        if (!same) ++leaks;
      }
      const Eigen::VectorXd dir = random_vector(rng, 48);
      auto f = [&](const Eigen::VectorXd& v) { return obj.value(BlockVector(4, v)); };
      const double fd = directional_fd(f, z.data(), dir, 1e-6);
      const double an = obj.gradient(z).data().dot(dir);
      ++fd_checks;
      if (std::abs(fd - an) > 1e-5 * std::max(1.0, std::abs(an))) ++fd_bad;
    }
  }
  report("gradient locality and finite differences", leaks == 0 && fd_bad == 0,
         std::to_string(fd_checks) + " directional checks, " + std::to_string(fd_bad) +
             " off, " + std::to_string(leaks) + " locality leaks");
}

void theory_stepsize_rate() {
  const std::size_t n = 10;
  const Graph g = build_d_regular_cycle(n, 4);
  const auto obj = DistributedObjective::primal(g, build_weight_matrix(g, 4),
                                                make_quadratic(n, 4, 1.0, 2), 1.0);
  Eigen::VectorXd c;
  const Eigen::MatrixXd h = dense_hessian(obj, c);
  const double fstar = obj.value(BlockVector(4, h.ldlt().solve(-c)));
  const double L = max_eig(h);
  SyncConfig cfg;
  cfg.method = Method::kDbfgs;
  cfg.curvature = {1.0, 1.0};
  cfg.max_iterations = 50;
  const double delta = cfg.curvature.Gamma + static_cast<double>(n) / cfg.curvature.gamma;
  cfg.stepsize = 0.99 * 2.0 * cfg.curvature.Gamma / (L * delta * delta);
  bool monotone = true;
  std::vector<double> gap;
  run_dbfgs_sync(obj, cfg, [&](const SyncStep& s) {
    const double before = obj.value(s.z_old), after = obj.value(s.z_new);
    monotone = monotone && after <= before + 1e-14 * std::abs(before);
    gap.push_back(std::log(after - fstar));
  });
  const std::vector<double> tail(gap.begin() + static_cast<long>(gap.size() / 2), gap.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < tail.size(); ++k) {
    const double x = static_cast<double>(k);
    sx += x;
    sy += tail[k];
    sxx += x * x;
    sxy += x * tail[k];
  }
  const double m = static_cast<double>(tail.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  report("theory stepsize: monotone objective and negative log-gap slope",
         monotone && slope < 0.0,
         fmt("stepsize %.3g, slope %.3g", cfg.stepsize, slope));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::size_t seeds = 20;
  std::size_t jobs = 0;
  bool skip_profiles = false;
  app.add_option("--seeds", seeds, "seeds per reproduction profile");
  app.add_option("-j,--jobs", jobs, "worker threads (0 = all cores)");
  app.add_flag("--skip-profiles", skip_profiles, "only run the property checks");
  CLI11_PARSE(app, argc, argv);

  local_secant();
  global_properties();
  engine_equivalence();
  lockstep();
  locality_and_fd();
  theory_stepsize_rate();

  if (!skip_profiles) {
    ReproduceOptions opts;
    opts.seeds = seeds;
    opts.jobs = jobs;
    for (const auto& profile : reproduction_profiles()) {
      const auto start = std::chrono::steady_clock::now();
      const SuiteReport rep = reproduce_suite(profile, opts);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (const auto& c : rep.criteria) report(c.name, c.passed, c.detail);
      report(profile + ": runtime under 2 minutes", secs < 120.0, fmt("%.1f s", secs));
    }
  }
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
