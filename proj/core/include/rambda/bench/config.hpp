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

#include <string>

#include <json.hpp>

#include "rambda/accel.hpp"
#include "rambda/apps/dlrm.hpp"
#include "rambda/bench/workload.hpp"
#include "rambda/cpoll.hpp"
#include "rambda/mem.hpp"
#include "rambda/rnic.hpp"

namespace rambda::bench {

enum class Pipeline : std::uint8_t { kRambda, kCpuRpc, kSmartNic, kHyperloop };

std::string to_string(Pipeline p);
std::string to_string(AppKind a);

struct BaselineSpec {
  // cpu_rpc: MICA-style two-sided RPC, keyhash-partitioned across cores
  std::uint32_t cpu_cores = 10;
  std::uint64_t cpu_req_overhead_ns = 300;
  std::uint32_t cpu_mlp = 8;  // overlapped accesses within a batch
  std::uint64_t cpu_dlrm_row_ns = 50;
  // smartnic: wimpy cores with an on-board LRU cache over entries and pairs
  std::uint32_t smartnic_cores = 8;
  std::uint64_t smartnic_service_ns = 750;
  double smartnic_cache_fraction = 0.073;  // 512 MB : 7 GB, scaled
  std::uint64_t smartnic_local_ns = 90;
  std::uint64_t smartnic_pcie_rt_ns = 5000;  // host access round trip
};

struct TxSetup {
  std::uint32_t replicas = 2;
  std::uint64_t forwarder_extra_ns = 2500;  // DPU ARM routing between ports
  std::uint32_t value_size = 64;
  std::uint64_t data_len = 1 << 20;
  std::uint64_t log_len = 32 << 20;
};

struct KvsSetup {
  std::uint32_t bucket_count = 32768;
  std::uint32_t pair_slot_bytes = 64;
};

struct DlrmSetup {
  std::uint32_t tables = 4;
  std::uint32_t rows_per_table = 20000;
  std::uint32_t dim = 64;
  std::uint64_t fc_latency_ns = 5000;
  bool accel_local = false;  // embedding tables in accelerator memory
};

struct PingPongSetup {
  std::uint32_t iterations = 60000;
  std::uint32_t poll_interval_cycles = 15;
  bool background_noise = true;
  std::uint64_t noise_period_cycles = 5;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string scenario = "default";
  Pipeline pipeline = Pipeline::kRambda;
  mem::LatencyConfig memory;
  rnic::RnicConfig rnic;
  accel::AccelConfig accel;
  accel::CpuServiceConfig cpu_services;
  cpoll::CpollConfig cpoll;
  WorkloadSpec workload;
  BaselineSpec baseline;
  KvsSetup kvs;
  TxSetup tx;
  DlrmSetup dlrm;
  PingPongSetup pingpong;
  nlohmann::json echo;  // parsed document for report embedding

  void validate() const;
};

/// Parses a config document; unknown keys raise with the offending key so
/// config typos fail loudly.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace rambda::bench
