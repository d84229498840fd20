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

// dbfgs run <config> | reproduce <profile> | histogram <glob> --threshold <v>
//
// Output goes to --output, else $DBFGS_OUTPUT_DIR, else ./dbfgs-out.
// Exit status: 0 success, 1 criterion failure, 2 usage or config error.

#include <glob.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dbfgs/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCriterionFailed = 1;
constexpr int kUsage = 2;

std::filesystem::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DBFGS_OUTPUT_DIR"); env && *env) return env;
  return "dbfgs-out";
}

int cmd_run(const std::string& path, const std::string& out, std::size_t jobs) {
  std::ifstream is(path);
  if (!is) {
    std::cerr << "cannot open config " << path << '\n';
    return kUsage;
  }
  std::stringstream text;
  text << is.rdbuf();
  dbfgs::ExperimentConfig cfg;
  try {
    cfg = dbfgs::parse_config(text.str());
  } catch (const dbfgs::ConfigError& e) {
    std::cerr << "config error at " << e.what() << '\n';
    return kUsage;
  }
  const auto dir = output_dir(out);
  const auto result = dbfgs::run_experiment(cfg, dir, jobs);
  for (const auto& r : result.runs) {
    std::cout << dbfgs::method_name(r.method) << " seed " << r.seed << ": "
              << dbfgs::status_name(r.status) << ", final error " << r.final_error;
    if (r.exchanges_to_threshold) {
      std::cout << ", " << *r.exchanges_to_threshold << " exchanges to " << cfg.threshold;
    }
    std::cout << '\n';
  }
  std::cout << "summary: " << result.summary.string() << '\n';
  return kOk;
}

int cmd_reproduce(const std::string& profile, const std::string& out, std::size_t seeds,
                  std::size_t jobs, bool write) {
  const auto profiles = dbfgs::reproduction_profiles();
  if (std::find(profiles.begin(), profiles.end(), profile) == profiles.end()) {
    std::cerr << "unknown profile '" << profile << "'; expected one of:";
    for (const auto& p : profiles) std::cerr << ' ' << p;
    std::cerr << '\n';
    return kUsage;
  }
  dbfgs::ReproduceOptions opts;
  opts.seeds = seeds;
  opts.jobs = jobs;
  if (write) opts.output_dir = output_dir(out);
  const auto report = dbfgs::reproduce_suite(profile, opts);
  for (const auto& c : report.criteria) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " [" << c.detail << "]\n";
  }
  return report.passed() ? kOk : kCriterionFailed;
}

int cmd_histogram(const std::string& pattern, double threshold) {
  glob_t g{};
  if (::glob(pattern.c_str(), 0, nullptr, &g) != 0) {
    globfree(&g);
    std::cerr << "no files match " << pattern << '\n';
    return kUsage;
  }
  std::vector<dbfgs::Trace> traces;
  for (std::size_t k = 0; k < g.gl_pathc; ++k) {
    std::ifstream is(g.gl_pathv[k]);
    try {
      traces.push_back(dbfgs::read_trace_csv(is));
    } catch (const std::exception& e) {
      std::cerr << g.gl_pathv[k] << ": " << e.what() << '\n';
      globfree(&g);
      return kUsage;
    }
  }
  globfree(&g);
  const auto h = dbfgs::histogram_exchanges(traces, threshold);
  std::cout << "method,runs,censored,min,q25,median,q75,max\n";
  for (const auto& m : h.methods) {
    std::cout << dbfgs::method_name(m.method) << ',' << m.reached.size() + m.censored << ','
              << m.censored << ',' << m.min << ',' << m.q25 << ',' << m.median << ',' << m.q75
              << ',' << m.max << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized BFGS experiments"};
  app.require_subcommand(1);
  std::string out;
  std::size_t jobs = 0;
  app.add_option("-o,--output", out, "output directory");
  app.add_option("-j,--jobs", jobs, "worker threads (0 = all cores)");

  auto* run = app.add_subcommand("run", "run an experiment config");
  std::string config;
  run->add_option("config", config, "config file")->required();

  auto* rep = app.add_subcommand("reproduce", "run a reproduction profile and check its criteria");
  std::string profile;
  std::size_t seeds = 20;
  bool write = false;
  rep->add_option("profile", profile, "fig2, fig3, fig4, fig5, fig6 or fig7-logistic")->required();
  rep->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
  rep->add_flag("--write", write, "also write trace CSVs");

  auto* hist = app.add_subcommand("histogram", "exchanges-to-threshold over trace CSVs");
  std::string pattern;
  double threshold = 0.0;
  hist->add_option("glob", pattern, "trace file pattern")->required();
  hist->add_option("--threshold", threshold, "error threshold")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(config, out, jobs);
    if (*rep) return cmd_reproduce(profile, out, seeds, jobs, write);
    if (*hist) return cmd_histogram(pattern, threshold);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
