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

// Round-based executors. Every round is computed node by node from
// neighborhood data only, with a barrier between the descent, variable and
// gradient exchanges.

#ifndef DBFGS_SYNC_RUNTIME_HPP_
#define DBFGS_SYNC_RUNTIME_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dbfgs/curvature.hpp"
#include "dbfgs/objectives.hpp"
#include "dbfgs/trace.hpp"

namespace dbfgs {

struct SyncConfig {
  Method method = Method::kDbfgs;
  double stepsize = 0.01;  // ADMM: penalty parameter rho
  CurvatureParams curvature;
  double initial_curvature = 1.0;  // B(0) = c I
  std::size_t max_iterations = 200;
  double error_threshold = 0.0;      // 0 disables
  double grad_norm_threshold = 0.0;  // 0 disables
  double divergence_limit = 1e12;
  std::uint64_t seed = 0;  // recorded in the trace only
  std::optional<BlockVector> initial;       // x(0) or nu(0); zero if unset
  std::optional<BlockVector> initial_dual;  // ADMM multipliers; zero if unset
};

/// Throws std::invalid_argument naming the offending field.
void validate_sync_config(const SyncConfig& cfg, const DistributedObjective& obj);

/// Norm reported as grad_norm: |grad phi| in primal mode regardless of the
/// penalty scaling, |grad psi| in dual mode.
double reported_grad_norm(const DistributedObjective& obj, const BlockVector& g);

/// State of one D-BFGS round, handed to the observer after step t -> t+1.
struct SyncStep {
  std::size_t iteration;  // t
  const BlockVector& z_old;
  const BlockVector& z_new;
  const BlockVector& g_old;
  const BlockVector& g_new;
  const BlockVector& descent;  // d(t), before scaling by the stepsize
  const std::vector<CurvatureState>& states_before;
  const std::vector<CurvatureState>& states_after;
  const std::vector<UpdateOutcome>& outcomes;
};

using SyncObserver = std::function<void(const SyncStep&)>;

/// Called with every iterate, including z(0).
using IterateObserver = std::function<void(std::size_t iteration, const BlockVector& z)>;

Trace run_dbfgs_sync(const DistributedObjective& obj, const SyncConfig& cfg,
                     const SyncObserver& observer = {});
Trace run_dgd(const DistributedObjective& obj, const SyncConfig& cfg,
              const IterateObserver& observer = {});
Trace run_dd(const DistributedObjective& obj, const SyncConfig& cfg,
             const IterateObserver& observer = {});
/// In the observer, z holds the primal iterates.
Trace run_admm(const DistributedObjective& obj, const SyncConfig& cfg,
               const IterateObserver& observer = {});

/// Dispatches on cfg.method.
Trace run_sync(const DistributedObjective& obj, const SyncConfig& cfg);

}  // namespace dbfgs

#endif  // DBFGS_SYNC_RUNTIME_HPP_
