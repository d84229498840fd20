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

// Experiment configs, batch runs, exchange histograms and the reproduction
// profiles.
//
// Config format (sections and keys are fixed; anything else is an error):
//
//   name = "fig2"
//   [topology]   n = 50, d = 4
//   [problem]    kind = "quadratic" | "logistic", p, eta, q, lambda,
//                feature_mean, sigma_pos, sigma_neg
//   [mode]       kind = "primal" | "dual", alpha, scaling = "normalized" | "raw"
//   [methods]    <method> = <stepsize>, one line per method, in run order
//   [dbfgs]      gamma, Gamma, initial_curvature
//   [regime]     kind = "sync" | "async", clock_mean, clock_stddev, message_delay
//   [run]        iterations, threshold, stop_at_threshold, seeds = [1, 2, 3]
//
// One key per line; `#` starts a comment.

#ifndef DBFGS_HARNESS_HPP_
#define DBFGS_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dbfgs/curvature.hpp"
#include "dbfgs/objectives.hpp"
#include "dbfgs/trace.hpp"

namespace dbfgs {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class ProblemKind { kQuadratic, kLogistic };

struct MethodSpec {
  Method method;
  double stepsize;

  bool operator==(const MethodSpec&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";

  std::size_t n = 50;
  std::size_t d = 4;

  ProblemKind problem = ProblemKind::kQuadratic;
  std::size_t p = 4;
  double eta = 2.0;
  std::size_t q = 100;
  double lambda = 1e-4;
  double feature_mean = 3.0;
  double sigma_pos = 1.0;
  double sigma_neg = 1.0;

  Mode mode = Mode::kDual;
  double alpha = 1e-3;
  PenaltyScaling scaling = PenaltyScaling::kNormalized;

  std::vector<MethodSpec> methods;

  CurvatureParams curvature{1e-2, 1e-3};
  double initial_curvature = 1.0;

  bool asynchronous = false;
  double clock_mean = 1.0;
  double clock_stddev = 0.1;
  double message_delay = 0.0;

  std::size_t iterations = 200;  // rounds, or minimum local iterations when async
  double threshold = 1e-2;       // error level for exchanges-to-threshold
  bool stop_at_threshold = false;
  std::vector<std::uint64_t> seeds{1};

  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError with the field path of the first problem found.
ExperimentConfig parse_config(std::string_view text);
void validate_config(const ExperimentConfig& cfg);
/// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);
/// FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// One (method, seed) run held in memory.
Trace run_single(const ExperimentConfig& cfg, const MethodSpec& method, std::uint64_t seed);

struct RunSummary {
  Method method;
  std::uint64_t seed;
  RunStatus status;
  double final_error;
  double final_grad_norm;
  std::optional<std::size_t> exchanges_to_threshold;
  std::filesystem::path csv;
};

struct ExperimentResult {
  std::vector<Trace> traces;  // in (method, seed) order
  std::vector<RunSummary> runs;
  std::filesystem::path summary;
};

/// Runs every (method, seed) pair on `jobs` worker threads. With an output
/// directory, each trace goes to <name>-<method>-seed<seed>-<hash>.csv and the
/// summary to <name>-summary-<hash>.csv, each written atomically. A diverged
/// run is reported in the summary and does not stop the batch.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& output_dir,
                                std::size_t jobs = 0);

struct MethodHistogram {
  Method method;
  std::vector<std::size_t> reached;  // exchanges-to-threshold, sorted
  std::size_t censored = 0;
  // Quantiles over `reached` only; NaN when nothing reached the threshold.
  double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;
  /// Median with censored runs counted as never reaching the threshold
  /// (+inf if at least half are censored).
  double censored_median() const;
};

struct HistogramResult {
  double threshold = 0.0;
  std::vector<MethodHistogram> methods;  // in first-seen order
  const MethodHistogram* find(Method m) const;
};

HistogramResult histogram_exchanges(const std::vector<Trace>& traces, double threshold);

struct CriterionResult {
  std::string name;
  bool passed;
  std::string detail;
};

struct SuiteReport {
  std::string profile;
  std::vector<CriterionResult> criteria;
  bool passed() const;
};

struct ReproduceOptions {
  std::size_t seeds = 20;
  std::optional<std::filesystem::path> output_dir;
  std::size_t jobs = 0;
};

std::vector<std::string> reproduction_profiles();

/// Throws std::invalid_argument for an unknown profile.
SuiteReport reproduce_suite(std::string_view profile, const ReproduceOptions& opts = {});

/// Median of a sample; NaN when empty.
double median(std::vector<double> values);

}  // namespace dbfgs

#endif  // DBFGS_HARNESS_HPP_
