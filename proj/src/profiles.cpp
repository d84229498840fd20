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

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dbfgs/harness.hpp"

namespace dbfgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

std::vector<std::uint64_t> seed_list(std::size_t count) {
  std::vector<std::uint64_t> s(count);
  std::iota(s.begin(), s.end(), 1);
  return s;
}

ExperimentConfig dual_quadratic(const std::string& name, double eta, std::size_t seeds) {
  ExperimentConfig c;
  c.name = name;
  c.n = 50;
  c.d = 4;
  c.eta = eta;
  c.mode = Mode::kDual;
  c.curvature = {1e-2, 1e-3};
  c.seeds = seed_list(seeds);
  return c;
}

ExperimentConfig primal_quadratic(const std::string& name, double eta, std::size_t seeds) {
  ExperimentConfig c;
  c.name = name;
  c.n = 100;
  c.d = 4;
  c.eta = eta;
  c.mode = Mode::kPrimal;
  c.alpha = 1e-3;
  c.scaling = PenaltyScaling::kNormalized;
  c.curvature = {1e-2, 1e-3};
  c.seeds = seed_list(seeds);
  return c;
}

// Per-method values of `metric` over the seeds; a run that stopped before
// the sampled point contributes +inf.
template <typename Metric>
std::vector<double> collect(const ExperimentResult& r, Method m, Metric metric) {
  std::vector<double> out;
  for (const auto& t : r.traces) {
    if (t.method == m) out.push_back(metric(t));
  }
  return out;
}

double error_at(const Trace& t, std::size_t iter) {
  return iter < t.records.size() && t.status != RunStatus::kDiverged ? t.records[iter].error
                                                                      : kInf;
}

double error_at_local(const Trace& t, std::size_t k) {
  const TraceRecord* r = t.at_local_iteration(k);
  return r && t.status != RunStatus::kDiverged ? r->error : kInf;
}

double grad_at(const Trace& t, std::size_t iter) {
  return iter < t.records.size() && t.status != RunStatus::kDiverged ? t.records[iter].grad_norm
                                                                      : kInf;
}

double exchange_ratio(const ExperimentResult& r, double threshold, Method slow, Method fast,
                      std::string& detail) {
  const HistogramResult h = histogram_exchanges(r.traces, threshold);
  const double s = h.find(slow)->censored_median();
  const double f = h.find(fast)->censored_median();
  detail = std::string(method_name(fast)) + " median " + num(f) + " (" +
           std::to_string(h.find(fast)->censored) + " censored), " +
           std::string(method_name(slow)) + " median " + num(s) + " (" +
           std::to_string(h.find(slow)->censored) + " censored)";
  if (std::isinf(f)) return 0.0;
  return s / f;
}

SuiteReport fig2(const ReproduceOptions& o) {
  ExperimentConfig c = dual_quadratic("fig2", 2.0, o.seeds);
  c.methods = {{Method::kDbfgs, 0.01}, {Method::kAdmm, 0.002}, {Method::kDd, 0.002}};
  c.iterations = 200;
  const auto r = run_experiment(c, o.output_dir, o.jobs);
  auto at200 = [](const Trace& t) { return error_at(t, 200); };
  const double eb = median(collect(r, Method::kDbfgs, at200));
  const double ea = median(collect(r, Method::kAdmm, at200));
  const double ed = median(collect(r, Method::kDd, at200));
  SuiteReport rep{"fig2", {}};
  rep.criteria.push_back({"fig2: D-BFGS error at iteration 200 <= 1e-2", eb <= 1e-2,
                          "median " + num(eb)});
  rep.criteria.push_back({"fig2: D-BFGS < ADMM < DD error at iteration 200",
                          eb < ea && ea < ed,
                          "medians " + num(eb) + " / " + num(ea) + " / " + num(ed)});
  return rep;
}

SuiteReport fig3(const ReproduceOptions& o) {
  SuiteReport rep{"fig3", {}};
  for (double eta : {0.0, 2.0}) {
    ExperimentConfig c = dual_quadratic(eta == 0.0 ? "fig3-cond1" : "fig3-cond100", eta, o.seeds);
    c.methods = {{Method::kDbfgs, 0.01}, {Method::kAdmm, 0.002}};
    c.iterations = 5000;
    c.threshold = 1e-2;
    c.stop_at_threshold = true;
    const auto r = run_experiment(c, o.output_dir, o.jobs);
    std::string detail;
    const double ratio = exchange_ratio(r, c.threshold, Method::kAdmm, Method::kDbfgs, detail);
    const double need = eta == 0.0 ? 1.5 : 5.0;
    rep.criteria.push_back({"fig3: ADMM/D-BFGS exchanges to 1e-2 >= " + num(need) +
                                " at condition " + (eta == 0.0 ? "1" : "100"),
                            ratio >= need, "ratio " + num(ratio) + "; " + detail});
  }
  return rep;
}

SuiteReport fig4(const ReproduceOptions& o) {
  ExperimentConfig c = primal_quadratic("fig4", 2.0, o.seeds);
  c.methods = {{Method::kDbfgs, 0.3}, {Method::kDgd, 1.0}};
  c.iterations = 200;
  const auto r = run_experiment(c, o.output_dir, o.jobs);
  const double eb =
      median(collect(r, Method::kDbfgs, [](const Trace& t) { return error_at(t, 100); }));
  const double eg =
      median(collect(r, Method::kDgd, [](const Trace& t) { return error_at(t, 200); }));
  SuiteReport rep{"fig4", {}};
  rep.criteria.push_back({"fig4: D-BFGS error at iteration 100 <= 0.05", eb <= 0.05,
                          "median " + num(eb)});
  rep.criteria.push_back({"fig4: DGD error at iteration 200 in [0.05, 1.0]",
                          eg >= 0.05 && eg <= 1.0, "median " + num(eg)});
  return rep;
}

SuiteReport fig5(const ReproduceOptions& o) {
  SuiteReport rep{"fig5", {}};
  for (double eta : {0.0, 2.0}) {
    ExperimentConfig c =
        primal_quadratic(eta == 0.0 ? "fig5-cond1" : "fig5-cond100", eta, o.seeds);
    c.methods = {{Method::kDbfgs, 0.3}, {Method::kDgd, 1.0}};
    c.iterations = 20000;
    c.threshold = 1.9e-2;
    c.stop_at_threshold = true;
    const auto r = run_experiment(c, o.output_dir, o.jobs);
    std::string detail;
    const double ratio = exchange_ratio(r, c.threshold, Method::kDgd, Method::kDbfgs, detail);
    rep.criteria.push_back({std::string("fig5: DGD/D-BFGS exchanges to 1.9e-2 >= 3 at condition ") +
                                (eta == 0.0 ? "1" : "100"),
                            ratio >= 3.0, "ratio " + num(ratio) + "; " + detail});
  }
  return rep;
}

SuiteReport fig6(const ReproduceOptions& o) {
  SuiteReport rep{"fig6", {}};
  double dbfgs_err[2] = {0.0, 0.0};
  const double sigmas[2] = {0.1, 0.3};
  for (int k = 0; k < 2; ++k) {
    ExperimentConfig c = dual_quadratic(k == 0 ? "fig6-sigma0.1" : "fig6-sigma0.3", 1.0, o.seeds);
    c.methods = {{Method::kDbfgs, 0.01}, {Method::kDd, 0.002}};
    c.curvature = {1e-1, 1e-1};
    c.asynchronous = true;
    c.clock_mean = 1.0;
    c.clock_stddev = sigmas[k];
    c.iterations = 200;
    const auto r = run_experiment(c, o.output_dir, o.jobs);
    auto at200 = [](const Trace& t) { return error_at_local(t, 200); };
    const double eb = median(collect(r, Method::kDbfgs, at200));
    const double ed = median(collect(r, Method::kDd, at200));
    dbfgs_err[k] = eb;
    const std::string tag = " (sigma " + num(sigmas[k]) + ")";
    rep.criteria.push_back({"fig6: D-BFGS error at 200 local iterations <= 1e-2" + tag,
                            eb <= 1e-2, "median " + num(eb)});
    rep.criteria.push_back({"fig6: D-BFGS error <= DD error / 5" + tag, eb <= ed / 5.0,
                            "medians " + num(eb) + " vs " + num(ed) + ", ratio " + num(ed / eb)});
  }
  const double factor = std::max(dbfgs_err[0], dbfgs_err[1]) / std::min(dbfgs_err[0], dbfgs_err[1]);
  rep.criteria.push_back({"fig6: D-BFGS error changes by < 2x between sigma 0.1 and 0.3",
                          factor < 2.0, "factor " + num(factor)});
  return rep;
}

SuiteReport fig7(const ReproduceOptions& o) {
  ExperimentConfig c;
  c.name = "fig7-logistic";
  c.n = 100;
  c.d = 4;
  c.problem = ProblemKind::kLogistic;
  c.p = 4;
  c.q = 100;
  c.lambda = 1e-4;
  c.feature_mean = 3.0;
  c.sigma_pos = 1.0;
  c.sigma_neg = 1.0;
  c.mode = Mode::kPrimal;
  c.alpha = 1e-3;
  c.scaling = PenaltyScaling::kNormalized;
  c.curvature = {1e-1, 1e-1};
  c.methods = {{Method::kDbfgs, 0.3}, {Method::kDgd, 1.0}};
  c.iterations = 200;
  c.seeds = seed_list(o.seeds);
  const auto r = run_experiment(c, o.output_dir, o.jobs);
  auto at200 = [](const Trace& t) { return grad_at(t, 200); };
  const double gb = median(collect(r, Method::kDbfgs, at200));
  const double gg = median(collect(r, Method::kDgd, at200));
  SuiteReport rep{"fig7-logistic", {}};
  rep.criteria.push_back({"logistic: D-BFGS gradient norm at iteration 200 <= 1e-4", gb <= 1e-4,
                          "median " + num(gb)});
  rep.criteria.push_back({"logistic: D-BFGS gradient norm below DGD at iteration 200", gb < gg,
                          "medians " + num(gb) + " vs " + num(gg)});
  return rep;
}

}  // namespace

std::vector<std::string> reproduction_profiles() {
  return {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7-logistic"};
}

SuiteReport reproduce_suite(std::string_view profile, const ReproduceOptions& opts) {
  if (opts.seeds == 0) throw std::invalid_argument("reproduce: need at least one seed");
  if (profile == "fig2") return fig2(opts);
  if (profile == "fig3") return fig3(opts);
  if (profile == "fig4") return fig4(opts);
  if (profile == "fig5") return fig5(opts);
  if (profile == "fig6") return fig6(opts);
  if (profile == "fig7-logistic") return fig7(opts);
  throw std::invalid_argument("unknown profile '" + std::string(profile) + "'");
}

}  // namespace dbfgs
