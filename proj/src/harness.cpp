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

#include "dbfgs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <variant>

#include "dbfgs/async_sim.hpp"
#include "dbfgs/netgraph.hpp"
#include "dbfgs/sync_runtime.hpp"

namespace dbfgs {

namespace {

using Value = std::variant<double, std::string, bool, std::vector<double>>;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') quoted = !quoted;
    if (line[k] == '#' && !quoted) return std::string(line.substr(0, k));
  }
  return std::string(line);
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

Value parse_value(const std::string& raw, const std::string& path) {
  if (raw.empty()) throw ConfigError(path, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw ConfigError(path, "unterminated string");
    return raw.substr(1, raw.size() - 2);
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError(path, "unterminated list");
    std::vector<double> out;
    std::stringstream ss(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      auto v = parse_number(item);
      if (!v) throw ConfigError(path, "list entry '" + item + "' is not a number");
      out.push_back(*v);
    }
    return out;
  }
  if (auto v = parse_number(raw)) return *v;
  throw ConfigError(path, "cannot parse value '" + raw + "'");
}

double as_number(const Value& v, const std::string& path) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigError(path, "expected a number");
}

std::size_t as_count(const Value& v, const std::string& path) {
  const double d = as_number(v, path);
  if (!(d >= 0.0) || d != std::floor(d) || d > 1e15) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  return static_cast<std::size_t>(d);
}

const std::string& as_string(const Value& v, const std::string& path) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(path, "expected a quoted string");
}

bool as_bool(const Value& v, const std::string& path) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError(path, "expected true or false");
}

using Setter = std::function<void(ExperimentConfig&, const Value&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"name", [](auto& c, const auto& v, const auto& p) { c.name = as_string(v, p); }},
      {"topology.n", [](auto& c, const auto& v, const auto& p) { c.n = as_count(v, p); }},
      {"topology.d", [](auto& c, const auto& v, const auto& p) { c.d = as_count(v, p); }},
      {"problem.kind",
       [](auto& c, const auto& v, const auto& p) {
         const auto& s = as_string(v, p);
         if (s == "quadratic") {
           c.problem = ProblemKind::kQuadratic;
         } else if (s == "logistic") {
           c.problem = ProblemKind::kLogistic;
         } else {
           throw ConfigError(p, "expected \"quadratic\" or \"logistic\"");
         }
       }},
      {"problem.p", [](auto& c, const auto& v, const auto& p) { c.p = as_count(v, p); }},
      {"problem.eta", [](auto& c, const auto& v, const auto& p) { c.eta = as_number(v, p); }},
      {"problem.q", [](auto& c, const auto& v, const auto& p) { c.q = as_count(v, p); }},
      {"problem.lambda",
       [](auto& c, const auto& v, const auto& p) { c.lambda = as_number(v, p); }},
      {"problem.feature_mean",
       [](auto& c, const auto& v, const auto& p) { c.feature_mean = as_number(v, p); }},
      {"problem.sigma_pos",
       [](auto& c, const auto& v, const auto& p) { c.sigma_pos = as_number(v, p); }},
      {"problem.sigma_neg",
       [](auto& c, const auto& v, const auto& p) { c.sigma_neg = as_number(v, p); }},
      {"mode.kind",
       [](auto& c, const auto& v, const auto& p) {
         auto m = parse_mode(as_string(v, p));
         if (!m) throw ConfigError(p, "expected \"primal\" or \"dual\"");
         c.mode = *m;
       }},
      {"mode.alpha", [](auto& c, const auto& v, const auto& p) { c.alpha = as_number(v, p); }},
      {"mode.scaling",
       [](auto& c, const auto& v, const auto& p) {
         const auto& s = as_string(v, p);
         if (s == "normalized") {
           c.scaling = PenaltyScaling::kNormalized;
         } else if (s == "raw") {
           c.scaling = PenaltyScaling::kRaw;
         } else {
           throw ConfigError(p, "expected \"normalized\" or \"raw\"");
         }
       }},
      {"dbfgs.gamma",
       [](auto& c, const auto& v, const auto& p) { c.curvature.gamma = as_number(v, p); }},
      {"dbfgs.Gamma",
       [](auto& c, const auto& v, const auto& p) { c.curvature.Gamma = as_number(v, p); }},
      {"dbfgs.initial_curvature",
       [](auto& c, const auto& v, const auto& p) { c.initial_curvature = as_number(v, p); }},
      {"regime.kind",
       [](auto& c, const auto& v, const auto& p) {
         const auto& s = as_string(v, p);
         if (s != "sync" && s != "async") throw ConfigError(p, "expected \"sync\" or \"async\"");
         c.asynchronous = s == "async";
       }},
      {"regime.clock_mean",
       [](auto& c, const auto& v, const auto& p) { c.clock_mean = as_number(v, p); }},
      {"regime.clock_stddev",
       [](auto& c, const auto& v, const auto& p) { c.clock_stddev = as_number(v, p); }},
      {"regime.message_delay",
       [](auto& c, const auto& v, const auto& p) { c.message_delay = as_number(v, p); }},
      {"run.iterations",
       [](auto& c, const auto& v, const auto& p) { c.iterations = as_count(v, p); }},
      {"run.threshold",
       [](auto& c, const auto& v, const auto& p) { c.threshold = as_number(v, p); }},
      {"run.stop_at_threshold",
       [](auto& c, const auto& v, const auto& p) { c.stop_at_threshold = as_bool(v, p); }},
      {"run.seeds",
       [](auto& c, const auto& v, const auto& p) {
         const auto* list = std::get_if<std::vector<double>>(&v);
         if (!list) throw ConfigError(p, "expected a list of seeds");
         c.seeds.clear();
         for (double s : *list) {
           if (!(s >= 0.0) || s != std::floor(s) || s > 9007199254740992.0) {
             throw ConfigError(p, "seeds must be non-negative integers");
           }
           c.seeds.push_back(static_cast<std::uint64_t>(s));
         }
       }},
  };
  return table;
}

const std::vector<std::string>& sections() {
  static const std::vector<std::string> s = {"topology", "problem", "mode", "methods",
                                             "dbfgs",    "regime",  "run"};
  return s;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << contents;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t schedule_seed(std::uint64_t seed) { return seed + 0x9E3779B97F4A7C15ULL; }

double quantile(const std::vector<std::size_t>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) * (1.0 - frac) + static_cast<double>(sorted[hi]) * frac;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  cfg.seeds.clear();
  std::string section;
  std::map<std::string, bool> seen;
  std::stringstream ss{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no), "malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(sections().begin(), sections().end(), section) == sections().end()) {
        throw ConfigError(section, "unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string path = section.empty() ? key : section + "." + key;
    if (seen[path]) throw ConfigError(path, "duplicate key");
    seen[path] = true;
    const Value value = parse_value(trim(std::string_view(line).substr(eq + 1)), path);
    if (section == "methods") {
      auto m = parse_method(key);
      if (!m) throw ConfigError(path, "unknown method");
      cfg.methods.push_back({*m, as_number(value, path)});
      continue;
    }
    auto it = setters().find(path);
    if (it == setters().end()) throw ConfigError(path, "unknown key");
    it->second(cfg, value, path);
  }
  if (!seen["run.seeds"]) cfg.seeds = {1};
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* path, const char* what) {
    if (!ok) throw ConfigError(path, what);
  };
  require(c.n >= 1, "topology.n", "must be >= 1");
  require(c.d >= 2 && c.d % 2 == 0 && c.d < c.n, "topology.d", "must be even, >= 2 and < n");
  require(c.p >= 1, "problem.p", "must be >= 1");
  if (c.problem == ProblemKind::kQuadratic) {
    require(c.p % 2 == 0, "problem.p", "must be even for quadratic problems");
    require(std::isfinite(c.eta) && c.eta >= 0.0, "problem.eta", "must be >= 0");
  } else {
    require(c.q >= 1, "problem.q", "must be >= 1");
    require(c.lambda > 0.0, "problem.lambda", "must be > 0");
    require(c.sigma_pos >= 0.0, "problem.sigma_pos", "must be >= 0");
    require(c.sigma_neg >= 0.0, "problem.sigma_neg", "must be >= 0");
    require(c.mode == Mode::kPrimal, "mode.kind", "logistic problems need primal mode");
  }
  if (c.mode == Mode::kPrimal) require(c.alpha > 0.0, "mode.alpha", "must be > 0");
  require(!c.methods.empty(), "methods", "at least one method is required");
  for (std::size_t k = 0; k < c.methods.size(); ++k) {
    const auto& m = c.methods[k];
    const std::string path = "methods." + std::string(method_name(m.method));
    for (std::size_t j = 0; j < k; ++j) {
      if (c.methods[j].method == m.method) throw ConfigError(path, "duplicate method");
    }
    if (!(std::isfinite(m.stepsize) && m.stepsize > 0.0)) {
      throw ConfigError(path, "stepsize must be > 0");
    }
    if (m.method == Method::kDgd && c.mode != Mode::kPrimal) {
      throw ConfigError(path, "dgd needs primal mode");
    }
    if ((m.method == Method::kDd || m.method == Method::kAdmm) && c.mode != Mode::kDual) {
      throw ConfigError(path, "needs dual mode");
    }
    if (c.asynchronous && m.method != Method::kDbfgs && m.method != Method::kDd) {
      throw ConfigError(path, "only dbfgs and dd run asynchronously");
    }
  }
  require(c.curvature.gamma > 0.0, "dbfgs.gamma", "must be > 0");
  require(c.curvature.Gamma > 0.0, "dbfgs.Gamma", "must be > 0");
  require(c.initial_curvature > 0.0, "dbfgs.initial_curvature", "must be > 0");
  if (c.asynchronous) {
    require(c.clock_mean > 0.0, "regime.clock_mean", "must be > 0");
    require(c.clock_stddev >= 0.0, "regime.clock_stddev", "must be >= 0");
    require(c.message_delay >= 0.0, "regime.message_delay", "must be >= 0");
  }
  require(c.iterations >= 1, "run.iterations", "must be >= 1");
  require(c.threshold > 0.0, "run.threshold", "must be > 0");
  require(!c.seeds.empty(), "run.seeds", "at least one seed is required");
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "name = \"" << c.name << "\"\n\n[topology]\nn = " << c.n << "\nd = " << c.d << "\n\n";
  os << "[problem]\nkind = \"" << (c.problem == ProblemKind::kQuadratic ? "quadratic" : "logistic")
     << "\"\np = " << c.p << "\neta = " << fmt(c.eta) << "\nq = " << c.q
     << "\nlambda = " << fmt(c.lambda) << "\nfeature_mean = " << fmt(c.feature_mean)
     << "\nsigma_pos = " << fmt(c.sigma_pos) << "\nsigma_neg = " << fmt(c.sigma_neg) << "\n\n";
  os << "[mode]\nkind = \"" << mode_name(c.mode) << "\"\nalpha = " << fmt(c.alpha)
     << "\nscaling = \"" << (c.scaling == PenaltyScaling::kNormalized ? "normalized" : "raw")
     << "\"\n\n[methods]\n";
  for (const auto& m : c.methods) os << method_name(m.method) << " = " << fmt(m.stepsize) << '\n';
  os << "\n[dbfgs]\ngamma = " << fmt(c.curvature.gamma) << "\nGamma = " << fmt(c.curvature.Gamma)
     << "\ninitial_curvature = " << fmt(c.initial_curvature) << "\n\n";
  os << "[regime]\nkind = \"" << (c.asynchronous ? "async" : "sync")
     << "\"\nclock_mean = " << fmt(c.clock_mean) << "\nclock_stddev = " << fmt(c.clock_stddev)
     << "\nmessage_delay = " << fmt(c.message_delay) << "\n\n";
  os << "[run]\niterations = " << c.iterations << "\nthreshold = " << fmt(c.threshold)
     << "\nstop_at_threshold = " << (c.stop_at_threshold ? "true" : "false") << "\nseeds = [";
  for (std::size_t k = 0; k < c.seeds.size(); ++k) os << (k ? ", " : "") << c.seeds[k];
  os << "]\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Trace run_single(const ExperimentConfig& cfg, const MethodSpec& method, std::uint64_t seed) {
  Graph g = build_d_regular_cycle(cfg.n, cfg.d);
  WeightMatrix w = build_weight_matrix(g, cfg.d);
  Instance inst = cfg.problem == ProblemKind::kQuadratic
                      ? Instance(make_quadratic(cfg.n, cfg.p, cfg.eta, seed))
                      : Instance(make_logistic(cfg.n, cfg.p, cfg.q, cfg.lambda, cfg.feature_mean,
                                               cfg.sigma_pos, cfg.sigma_neg, seed));
  const DistributedObjective obj =
      cfg.mode == Mode::kPrimal
          ? DistributedObjective::primal(std::move(g), std::move(w), std::move(inst), cfg.alpha,
                                         cfg.scaling)
          : DistributedObjective::dual(std::move(g), std::move(w), std::move(inst));

  if (cfg.asynchronous) {
    AsyncConfig a;
    a.method = method.method;
    a.stepsize = method.stepsize;
    a.curvature = cfg.curvature;
    a.initial_curvature = cfg.initial_curvature;
    a.max_local_iterations = cfg.iterations;
    a.message_delay = cfg.message_delay;
    a.seed = seed;
    // Long enough that every node reaches the budget with overwhelming probability.
    const double horizon =
        1.25 * static_cast<double>(cfg.iterations + 1) * cfg.clock_mean + 10.0 * cfg.clock_mean;
    const ClockSchedule sched =
        gen_clock_schedule(cfg.n, cfg.clock_mean, cfg.clock_stddev, horizon, schedule_seed(seed));
    return method.method == Method::kDbfgs ? run_dbfgs_async(obj, a, sched)
                                           : run_dd_async(obj, a, sched);
  }
  SyncConfig s;
  s.method = method.method;
  s.stepsize = method.stepsize;
  s.curvature = cfg.curvature;
  s.initial_curvature = cfg.initial_curvature;
  s.max_iterations = cfg.iterations;
  s.error_threshold = cfg.stop_at_threshold ? cfg.threshold : 0.0;
  s.seed = seed;
  return run_sync(obj, s);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& output_dir,
                                std::size_t jobs) {
  validate_config(cfg);
  struct Task {
    MethodSpec method;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& m : cfg.methods) {
    for (auto s : cfg.seeds) tasks.push_back({m, s});
  }
  const std::string hash = config_hash(cfg);
  if (output_dir) std::filesystem::create_directories(*output_dir);

  ExperimentResult result;
  result.traces.resize(tasks.size());
  result.runs.resize(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const Task& t = tasks[k];
      try {
        Trace trace = run_single(cfg, t.method, t.seed);
        RunSummary& r = result.runs[k];
        r.method = t.method.method;
        r.seed = t.seed;
        r.status = trace.status;
        r.final_error = trace.last().error;
        r.final_grad_norm = trace.last().grad_norm;
        r.exchanges_to_threshold = trace.exchanges_to(cfg.threshold);
        if (output_dir) {
          r.csv = *output_dir / (cfg.name + "-" + std::string(method_name(t.method.method)) +
                                 "-seed" + std::to_string(t.seed) + "-" + hash + ".csv");
          std::ostringstream os;
          write_trace_csv(os, trace);
          write_atomically(r.csv, os.str());
        }
        result.traces[k] = std::move(trace);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, tasks.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (!errors[k].empty()) {
      throw std::runtime_error(std::string(method_name(tasks[k].method.method)) + " seed " +
                               std::to_string(tasks[k].seed) + ": " + errors[k]);
    }
  }

  if (output_dir) {
    std::ostringstream os;
    os.precision(17);
    os << "method,seed,status,final_error,final_grad_norm,exchanges_to_threshold,csv\n";
    for (const auto& r : result.runs) {
      os << method_name(r.method) << ',' << r.seed << ',' << status_name(r.status) << ','
         << r.final_error << ',' << r.final_grad_norm << ',';
      if (r.exchanges_to_threshold) os << *r.exchanges_to_threshold;
      os << ',' << r.csv.filename().string() << '\n';
    }
    result.summary = *output_dir / (cfg.name + "-summary-" + hash + ".csv");
    write_atomically(result.summary, os.str());
  }
  return result;
}

double MethodHistogram::censored_median() const {
  const std::size_t total = reached.size() + censored;
  if (total == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> all(reached.begin(), reached.end());
  all.resize(total, std::numeric_limits<double>::infinity());
  std::sort(all.begin(), all.end());
  if (total % 2 == 1) return all[total / 2];
  const double a = all[total / 2 - 1];
  const double b = all[total / 2];
  return std::isinf(b) ? b : 0.5 * (a + b);
}

const MethodHistogram* HistogramResult::find(Method m) const {
  for (const auto& h : methods) {
    if (h.method == m) return &h;
  }
  return nullptr;
}

HistogramResult histogram_exchanges(const std::vector<Trace>& traces, double threshold) {
  HistogramResult out;
  out.threshold = threshold;
  for (const auto& t : traces) {
    auto it = std::find_if(out.methods.begin(), out.methods.end(),
                           [&](const MethodHistogram& h) { return h.method == t.method; });
    if (it == out.methods.end()) {
      out.methods.push_back(MethodHistogram{t.method, {}, 0});
      it = std::prev(out.methods.end());
    }
    if (auto e = t.exchanges_to(threshold)) {
      it->reached.push_back(*e);
    } else {
      ++it->censored;
    }
  }
  for (auto& h : out.methods) {
    std::sort(h.reached.begin(), h.reached.end());
    h.min = quantile(h.reached, 0.0);
    h.q25 = quantile(h.reached, 0.25);
    h.median = quantile(h.reached, 0.5);
    h.q75 = quantile(h.reached, 0.75);
    h.max = quantile(h.reached, 1.0);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size();
  return k % 2 ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
}

bool SuiteReport::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed; });
}

}  // namespace dbfgs
