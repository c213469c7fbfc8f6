/*
 * Copyright 2026 The Rambda Project
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "rambda/bench/config.hpp"
#include "rambda/bench/experiment.hpp"
#include "rambda/bench/metrics.hpp"

namespace rambda::bench {

/// Optional test instrumentation for a pipeline run.
struct RunHooks {
  /// Called per completed request in per-connection order with the original
  /// request payload and the response payload.
  std::function<void(std::uint32_t conn, std::uint64_t seq,
                     std::span<const std::uint8_t> request,
                     std::span<const std::uint8_t> response)>
      on_response;
  /// TX pipelines: called once per replica after its NVM regions exist, so
  /// tests can install persist hooks and inspect durable state.
  std::function<void(mem::MemoryModel& m, int replica,
                     mem::RegionId data_region, mem::RegionId log_region)>
      on_tx_replica;
};

MetricsReport run_kvs_rambda(const ExperimentConfig& c,
                             const RunHooks* hooks = nullptr);
MetricsReport run_kvs_cpu_rpc(const ExperimentConfig& c,
                              const RunHooks* hooks = nullptr);
MetricsReport run_kvs_smartnic(const ExperimentConfig& c,
                               const RunHooks* hooks = nullptr);
MetricsReport run_tx_rambda(const ExperimentConfig& c,
                            const RunHooks* hooks = nullptr);
MetricsReport run_tx_hyperloop(const ExperimentConfig& c,
                               const RunHooks* hooks = nullptr);
MetricsReport run_dlrm_rambda(const ExperimentConfig& c,
                              const RunHooks* hooks = nullptr);
MetricsReport run_dlrm_cpu_rpc(const ExperimentConfig& c,
                               const RunHooks* hooks = nullptr);

}  // namespace rambda::bench
