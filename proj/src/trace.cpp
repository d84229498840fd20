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

#include "dbfgs/trace.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dbfgs {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kDbfgs: return "dbfgs";
    case Method::kDgd: return "dgd";
    case Method::kDd: return "dd";
    case Method::kAdmm: return "admm";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view s) {
  if (s == "dbfgs") return Method::kDbfgs;
  if (s == "dgd") return Method::kDgd;
  if (s == "dd") return Method::kDd;
  if (s == "admm") return Method::kAdmm;
  return std::nullopt;
}

std::string_view mode_name(Mode m) { return m == Mode::kPrimal ? "primal" : "dual"; }

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "primal") return Mode::kPrimal;
  if (s == "dual") return Mode::kDual;
  return std::nullopt;
}

std::size_t exchanges_per_iteration(Method m, Mode mode) {
  if (m == Method::kDbfgs) return mode == Mode::kDual ? 2 : 3;
  return 1;
}

std::string_view status_name(RunStatus s) {
  switch (s) {
    case RunStatus::kMaxIterations: return "max_iterations";
    case RunStatus::kErrorThreshold: return "error_threshold";
    case RunStatus::kGradThreshold: return "grad_threshold";
    case RunStatus::kDiverged: return "diverged";
    case RunStatus::kExhausted: return "schedule_exhausted";
  }
  return "?";
}

const TraceRecord* Trace::at_local_iteration(std::size_t k) const {
  for (const auto& r : records) {
    if (r.local_iter_min >= k) return &r;
  }
  return nullptr;
}

std::optional<std::size_t> Trace::exchanges_to(double threshold) const {
  for (const auto& r : records) {
    if (r.error <= threshold) return r.exchanges;
  }
  return std::nullopt;
}

void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << "iter,error,grad_norm,exchanges,method,mode,seed";
  if (trace.asynchronous) os << ",model_time,local_iter_min";
  os << '\n';
  os.precision(17);
  for (const auto& r : trace.records) {
    os << r.iter << ',' << r.error << ',' << r.grad_norm << ',' << r.exchanges << ','
       << method_name(trace.method) << ',' << mode_name(trace.mode) << ',' << trace.seed;
    if (trace.asynchronous) os << ',' << r.model_time << ',' << r.local_iter_min;
    os << '\n';
  }
}

Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trace csv: empty input");
  Trace t;
  if (line == "iter,error,grad_norm,exchanges,method,mode,seed") {
    t.asynchronous = false;
  } else if (line == "iter,error,grad_norm,exchanges,method,mode,seed,model_time,local_iter_min") {
    t.asynchronous = true;
  } else {
    throw std::runtime_error("trace csv: unexpected header '" + line + "'");
  }
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::size_t expect = t.asynchronous ? 9 : 7;
    if (cells.size() != expect) {
      throw std::runtime_error("trace csv: row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " columns");
    }
    TraceRecord r;
    try {
      r.iter = std::stoull(cells[0]);
      r.error = std::stod(cells[1]);
      r.grad_norm = std::stod(cells[2]);
      r.exchanges = std::stoull(cells[3]);
      if (t.asynchronous) {
        r.model_time = std::stod(cells[7]);
        r.local_iter_min = std::stoull(cells[8]);
      } else {
        r.model_time = static_cast<double>(r.iter);
        r.local_iter_min = r.iter;
      }
      t.seed = std::stoull(cells[6]);
    } catch (const std::exception&) {
      throw std::runtime_error("trace csv: malformed number in row " + std::to_string(row));
    }
    auto m = parse_method(cells[4]);
    auto md = parse_mode(cells[5]);
    if (!m || !md) throw std::runtime_error("trace csv: bad method/mode in row " + std::to_string(row));
    t.method = *m;
    t.mode = *md;
    t.records.push_back(r);
  }
  return t;
}

}  // namespace dbfgs
