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

#include <cstdint>
#include <string>
#include <vector>

#include "rambda/apps/wire.hpp"
#include "rambda/sim.hpp"

namespace rambda::bench {

enum class AppKind : std::uint8_t { kKvs, kTx, kDlrm, kPingPong };
enum class Distribution : std::uint8_t { kUniform, kZipfian };

struct WorkloadSpec {
  AppKind app = AppKind::kKvs;
  std::uint64_t key_space = 100000;
  Distribution distribution = Distribution::kUniform;
  double zipf_theta = 0.9;
  double get_fraction = 1.0;
  double put_fraction = 0.0;
  double update_fraction = 0.0;
  std::uint64_t request_count = 100000;
  std::uint32_t value_size = 32;
  std::uint32_t clients = 4;
  std::uint32_t window = 32;            // closed-loop outstanding per client
  std::uint64_t interarrival_ns = 0;    // > 0: open loop at this period
  std::uint32_t batch_size = 1;         // doorbell batch (rambda) or request
                                        // processing batch (cpu/smartnic)
  bool preload = true;                  // populate the key space first
  // tx
  std::uint32_t tx_read_count = 0;
  std::uint32_t tx_write_count = 1;
  // dlrm
  std::uint32_t dlrm_min_query = 10;
  std::uint32_t dlrm_max_query = 80;
  wire::AggregateOp dlrm_op = wire::AggregateOp::kSum;
  bool dlrm_cycle_ops = false;  // rotate through all four aggregate ops

  void validate() const;
};

/// Zipf(theta) over {1..n} by rejection inversion; matches the analytic
/// frequency mass of rank-1 keys for the test's tolerance.
class ZipfianGenerator {
 public:
  ZipfianGenerator(std::uint64_t n, double theta);
  std::uint64_t next(sim::RngStream& rng);
  double rank_probability(std::uint64_t rank) const;  // analytic mass

 private:
  double h(double x) const;
  double h_inv(double x) const;

  std::uint64_t n_;
  double theta_;
  double h_x1_;
  double h_n_;
  double s_;
  double harmonic_;  // sum of k^-theta
};

struct KvOpRecord {
  wire::KvOp op;
  std::uint64_t key;
};

/// Deterministic request stream for the KVS workloads; keys are 8-byte
/// little-endian encodings of the drawn key id, values derive from (key, seq).
class KvWorkload {
 public:
  KvWorkload(const WorkloadSpec& spec, std::uint64_t seed);
  KvOpRecord next();
  static std::vector<std::uint8_t> key_bytes(std::uint64_t key);
  std::vector<std::uint8_t> value_bytes(std::uint64_t key);

 private:
  WorkloadSpec spec_;
  sim::RngStream op_rng_;
  sim::RngStream key_rng_;
  sim::RngStream val_rng_;
  ZipfianGenerator zipf_;
};

/// Deterministic (read, write) transaction stream over an offset space.
class TxWorkload {
 public:
  TxWorkload(const WorkloadSpec& spec, std::uint64_t data_len,
             std::uint32_t value_size, std::uint64_t seed);
  wire::TxnRequest next();

 private:
  WorkloadSpec spec_;
  std::uint64_t slots_;
  std::uint32_t value_size_;
  sim::RngStream rng_;
};

/// Deterministic embedding-query stream.
class DlrmWorkload {
 public:
  DlrmWorkload(const WorkloadSpec& spec, std::uint32_t tables,
               std::uint32_t rows, std::uint64_t seed);
  wire::DlrmQuery next();

 private:
  WorkloadSpec spec_;
  std::uint32_t tables_;
  std::uint32_t rows_;
  std::uint64_t drawn_ = 0;
  sim::RngStream rng_;
};

}  // namespace rambda::bench
