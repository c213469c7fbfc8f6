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

#include <deque>
#include <unordered_map>

#include "rambda/accel.hpp"
#include "rambda/apps/wire.hpp"

namespace rambda::apps {

struct TxConfig {
  std::uint64_t data_base = 0;  // NVM region addressed by offset
  std::uint64_t data_len = 0;
  std::uint64_t log_base = 0;  // NVM redo-log ring: 64 B meta, then entries
  std::uint64_t log_len = 0;
  std::uint32_t read_size = 64;  // bytes returned per read offset
  bool tail = true;              // last replica: acks instead of forwarding
};

inline constexpr std::uint64_t kLogMetaBytes = 64;

/// Parses a durable redo-log image (meta word + entries): returns every
/// complete entry up to the persisted tail; a torn trailing entry past the
/// tail is discarded. A zero tuple_count or a truncated entry inside the
/// persisted range is corruption and fail-stops.
std::vector<std::vector<wire::TxTuple>> parse_log(
    std::span<const std::uint8_t> log_image);

/// Replays parsed entries in order onto a data image.
void replay_log(const std::vector<std::vector<wire::TxTuple>>& entries,
                std::span<std::uint8_t> data);

/// Chain-replicated transaction APU: per-key concurrency control with FIFO
/// waiters, write-ahead redo logging into the NVM ring (entry flush, then
/// tail-meta flush, then apply), chain forwarding, and ack back-propagation.
class TxApp : public accel::Application {
 public:
  TxApp(TxConfig cfg, mem::MemoryModel& mem);

  /// Head/middle replicas forward committed entries downstream through this
  /// endpoint; acks come back on the matching resume ring.
  void set_successor(ring::ClientEndpoint* ep) { successor_ = ep; }

  std::string_view name() const override { return "rambda-tx"; }
  void on_request(accel::RequestContext& ctx,
                  std::span<const std::uint8_t> payload) override;
  void on_mem_complete(accel::RequestContext& ctx, std::uint64_t tag) override;
  void on_resume(accel::RequestContext& ctx,
                 std::span<const std::uint8_t> body) override;

  std::uint64_t committed() const { return committed_; }
  std::uint64_t log_appended_bytes() const { return log_tail_; }
  const TxConfig& config() const { return cfg_; }

 private:
  struct Pend;
  struct CcEntry {
    bool busy = false;
    std::deque<std::uint64_t> waiters;  // FIFO, resumed in arrival order
  };

  Pend& pend(accel::RequestContext& ctx);
  void try_acquire(accel::RequestContext& ctx);
  void locks_ready(accel::RequestContext& ctx);
  void start_log_append(accel::RequestContext& ctx);
  void log_durable(accel::RequestContext& ctx);
  void start_apply(accel::RequestContext& ctx);
  void applied(accel::RequestContext& ctx);
  void local_commit(accel::RequestContext& ctx);
  void release_locks(accel::RequestContext& ctx);

  TxConfig cfg_;
  mem::MemoryModel& mem_;
  ring::ClientEndpoint* successor_ = nullptr;

  std::unordered_map<std::uint64_t, CcEntry> cc_;
  std::uint64_t log_tail_ = 0;  // volatile mirror of the persisted meta word
  bool log_busy_ = false;       // appends persist strictly in order
  std::deque<std::uint64_t> log_waiters_;
  std::uint64_t committed_ = 0;
};

}  // namespace rambda::apps
