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
#include "rambda/bench/metrics.hpp"

namespace rambda::bench {

/// Wires client entities, the NIC layer, and the configured server pipeline,
/// runs the workload to exhaustion, and returns the report.
MetricsReport run_experiment(const ExperimentConfig& cfg);

struct PingPongReport {
  std::string mode;  // "cpoll" or "poll"
  std::uint32_t interval_cycles = 0;
  std::uint64_t iterations = 0;
  double mean_ns = 0.0;
  std::uint64_t p50_ns = 0;
  std::uint64_t p99_ns = 0;
  std::uint64_t duration_ns = 0;
  std::uint64_t poll_count = 0;
  double poll_cc_bytes_per_s = 0.0;
  std::vector<std::uint64_t> samples;
};

/// The local CPU<->accelerator ping-pong: one-direction notification latency
/// for cpoll or spin-polling at the given interval.
PingPongReport run_pingpong(const ExperimentConfig& cfg, bool use_cpoll,
                            std::uint32_t interval_cycles);

nlohmann::json pingpong_to_json(const PingPongReport& r);

/// Cartesian sweep: doc is a regular config plus a "sweep" object mapping
/// dotted parameter paths to value lists. Runs are independent engines and
/// may execute in parallel workers.
std::vector<MetricsReport> run_sweep(const nlohmann::json& doc,
                                     unsigned parallelism);
void export_sweep_csv(const std::vector<MetricsReport>& runs,
                      const std::string& path);

}  // namespace rambda::bench
