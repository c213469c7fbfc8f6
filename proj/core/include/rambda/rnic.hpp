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
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "rambda/mem.hpp"
#include "rambda/sim.hpp"

namespace rambda::rnic {

enum class WqeOp : std::uint8_t { kWrite, kRead };
enum class QpEnd : std::uint8_t { kA, kB };  // A: client side, B: server side

inline QpEnd peer(QpEnd e) { return e == QpEnd::kA ? QpEnd::kB : QpEnd::kA; }

struct Wqe {
  WqeOp op = WqeOp::kWrite;
  std::uint64_t remote_addr = 0;
  std::vector<std::uint8_t> payload;
  bool signaled = false;
  std::optional<bool> tph_override;  // default: inherit from the region
};

struct Cqe {
  std::uint32_t qp_id;
  std::uint64_t wqe_seq;
  sim::TimeNs completion_time;
};

struct RnicConfig {
  std::uint64_t network_oneway_ns = 1250;
  double network_bw_bytes_per_ns = 12.5;  // 100 Gbps
  std::uint32_t signaled_interval = 64;
  std::uint32_t doorbell_batch = 1;
  double opportunistic_prob = 0.0;  // early WQE execution before doorbell
  std::uint64_t mmio_fence_cpu_ns = 10;
  std::uint64_t mmio_fence_accel_ns = 100;  // sfence around MMIO is expensive
  std::uint64_t mmio_bytes = 8;
};

/// One RNIC: attaches to its machine's memory model over PCIe and owns the
/// outbound network serialization channel.
class Nic {
 public:
  Nic(sim::Simulator& sim, mem::MemoryModel& local, RnicConfig cfg,
      std::string name);

  sim::Simulator& sim() { return sim_; }
  mem::MemoryModel& memory() { return mem_; }
  const RnicConfig& config() const { return cfg_; }
  mem::BandwidthChannel& tx() { return tx_; }

  std::uint64_t doorbells() const { return doorbells_; }
  std::uint64_t network_tx_bytes() const { return network_tx_bytes_; }
  void count_doorbell() { ++doorbells_; }
  void count_tx(std::uint64_t b) { network_tx_bytes_ += b; }
  const std::string& name() const { return name_; }

 private:
  sim::Simulator& sim_;
  mem::MemoryModel& mem_;
  RnicConfig cfg_;
  std::string name_;
  mem::BandwidthChannel tx_;
  std::uint64_t doorbells_ = 0;
  std::uint64_t network_tx_bytes_ = 0;
};

/// Reliable connected queue pair between two NICs. WQEs staged on one end are
/// released by a doorbell (or opportunistically before it) and deliver
/// in post order; only signaled WQEs produce CQEs.
class QueuePair {
 public:
  QueuePair(std::uint32_t id, Nic& a, Nic& b, std::uint64_t extra_oneway_ns = 0);

  std::uint32_t id() const { return id_; }

  /// Stages a WQE; nothing moves until a doorbell unless the NIC executes it
  /// opportunistically (in order, probability from rnic config).
  std::uint64_t post(QpEnd from, Wqe wqe);

  /// One MMIO write releases n staged WQEs. The poster pays the fence and
  /// MMIO cost (accel posters also cross the cc link).
  void ring_doorbell(QpEnd from, std::uint32_t n, mem::Origin poster);

  /// Drains completed signaled entries for this end's CQ.
  std::vector<Cqe> poll_cq(QpEnd end);

  /// One-sided read: payload arrives after 2x network one-way plus the
  /// remote memory latency.
  void rdma_read(QpEnd from, std::uint64_t remote_addr, std::uint32_t len,
                 std::function<void(std::vector<std::uint8_t>, sim::TimeNs)> done);

  void close() { open_ = false; }
  bool open() const { return open_; }

  std::uint32_t staged(QpEnd end) const { return side(end).staged; }
  std::uint64_t delivered(QpEnd end) const { return side(end).delivered; }
  sim::TimeNs last_delivery(QpEnd end) const { return side(end).last_delivery; }

 private:
  struct Side {
    std::deque<std::pair<std::uint64_t, Wqe>> sq;  // (seq, wqe), unreleased
    std::uint64_t next_seq = 0;
    std::uint32_t staged = 0;
    std::uint64_t delivered = 0;
    sim::TimeNs last_delivery = 0;  // per-QP in-order watermark
    std::vector<Cqe> cq;
  };

  Side& side(QpEnd e) { return e == QpEnd::kA ? a_side_ : b_side_; }
  const Side& side(QpEnd e) const { return e == QpEnd::kA ? a_side_ : b_side_; }
  Nic& nic(QpEnd e) { return e == QpEnd::kA ? a_ : b_; }

  void execute(QpEnd from, sim::TimeNs start, std::uint64_t seq, Wqe wqe);

  std::uint32_t id_;
  Nic& a_;
  Nic& b_;
  std::uint64_t extra_oneway_ns_;
  bool open_ = true;
  Side a_side_, b_side_;
  sim::RngStream opportunistic_rng_;
};

}  // namespace rambda::rnic
