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

#ifndef DBFGS_TRACE_HPP_
#define DBFGS_TRACE_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dbfgs/objectives.hpp"

namespace dbfgs {

enum class Method { kDbfgs, kDgd, kDd, kAdmm };

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view s);
std::string_view mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

/// Neighbor exchanges charged per synchronous iteration: D-BFGS needs 2 in
/// the dual domain and 3 in the primal domain; the first-order methods 1.
std::size_t exchanges_per_iteration(Method m, Mode mode);

enum class RunStatus { kMaxIterations, kErrorThreshold, kGradThreshold, kDiverged, kExhausted };

std::string_view status_name(RunStatus s);

struct TraceRecord {
  std::size_t iter = 0;
  double error = 0.0;
  double grad_norm = 0.0;
  std::size_t exchanges = 0;
  double model_time = 0.0;
  std::size_t local_iter_min = 0;
};

/// One run. Row 0 is the initial point; synchronous runs append one row per
/// iteration, asynchronous runs one row per event time.
struct Trace {
  Method method = Method::kDbfgs;
  Mode mode = Mode::kPrimal;
  std::uint64_t seed = 0;
  bool asynchronous = false;
  RunStatus status = RunStatus::kMaxIterations;
  std::size_t accepted_updates = 0;
  std::size_t skipped_updates = 0;
  std::vector<TraceRecord> records;

  const TraceRecord& last() const { return records.back(); }
  /// First record with local_iter_min >= k (asynchronous runs).
  const TraceRecord* at_local_iteration(std::size_t k) const;
  /// First cumulative exchange count with error <= threshold.
  std::optional<std::size_t> exchanges_to(double threshold) const;
};

/// Header `iter,error,grad_norm,exchanges,method,mode,seed`, plus
/// `,model_time,local_iter_min` for asynchronous traces.
void write_trace_csv(std::ostream& os, const Trace& trace);
Trace read_trace_csv(std::istream& is);

}  // namespace dbfgs

#endif  // DBFGS_TRACE_HPP_
