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
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rambda/mem.hpp"
#include "rambda/ring.hpp"
#include "rambda/sim.hpp"

namespace rambda::cpoll {

enum class Placement : std::uint8_t { kPinnedCache, kAccelMemory };

struct CpollConfig {
  Placement placement = Placement::kPinnedCache;
  bool pointer_buffer = true;
  std::uint32_t poll_interval_cycles = 15;  // spin-poll baseline only
  std::uint32_t accel_clock_mhz = 400;
  std::uint64_t accel_cache_bytes = 64 * 1024;
};

/// Notification handed to the accelerator: which request buffer changed and
/// the pointer value observed when the signal was taken.
struct CpollSignal {
  std::uint32_t buffer_id;
  std::uint32_t observed_pointer;
  sim::TimeNs fire_time;
};

/// Contiguous array of 4-byte little-endian monotonic counters, one entry per
/// request buffer. Entry i holds the total messages ever posted to buffer i.
class PointerBuffer {
 public:
  PointerBuffer(mem::MemoryModel& m, std::uint64_t base, std::uint32_t entries);

  std::uint64_t entry_addr(std::uint32_t buffer_id) const {
    return base_ + 4ull * buffer_id;
  }
  std::uint32_t read(std::uint32_t buffer_id) const;
  /// Direct-store increment used by the intra-machine path; fires the
  /// memory model's write observers (and therefore the checker).
  void store(std::uint32_t buffer_id, std::uint32_t value);

  std::uint64_t base() const { return base_; }
  std::uint32_t entries() const { return entries_; }
  std::uint64_t bytes() const { return 4ull * entries_; }

 private:
  mem::MemoryModel& mem_;
  std::uint64_t base_;
  std::uint32_t entries_;
};

/// The cpoll checker: snoops a registered contiguous address region and turns
/// coherence-visible writes into per-buffer signals after one cc-link
/// traversal. Writes to a buffer whose signal is still pending coalesce into
/// it; at most one signal per buffer is pending at any instant.
class CpollChecker {
 public:
  using SignalSink = std::function<void(const CpollSignal&)>;

  CpollChecker(sim::Simulator& sim, mem::MemoryModel& mem, CpollConfig cfg);

  /// Pointer-buffer mode: snoop the pointer region; buffer id = entry index.
  void register_pointer_region(const PointerBuffer& pb, Placement placement);
  /// Direct mode: snoop the request-buffer slots themselves. Only valid
  /// pinned in the accelerator cache, so total ring bytes are bounded.
  void register_direct(std::uint32_t buffer_id, std::uint64_t base,
                       std::uint64_t bytes);

  void set_sink(SignalSink sink) { sink_ = std::move(sink); }

  /// Wired as a memory-model write observer; applies coalescing and
  /// schedules delivery cc_link_oneway_ns after the write.
  void on_write(std::uint64_t addr, std::uint64_t len);

  /// Accelerator side: consumes the pending signal for a buffer, returning
  /// the latest observed pointer. A later write starts a fresh signal.
  std::uint32_t take(std::uint32_t buffer_id);

  bool pending(std::uint32_t buffer_id) const;
  std::uint64_t signals_delivered() const { return signals_delivered_; }

 private:
  enum class State : std::uint8_t { kIdle, kInFlight, kQueued };
  struct BufferState {
    State state = State::kIdle;
    std::uint32_t latest = 0;
    std::uint32_t shadow_count = 0;  // direct mode: writes seen
  };
  struct DirectRange {
    std::uint64_t base, bytes;
    std::uint32_t buffer_id;
  };

  void note_write(std::uint32_t buffer_id, std::uint32_t observed);

  sim::Simulator& sim_;
  mem::MemoryModel& mem_;
  CpollConfig cfg_;
  SignalSink sink_;

  bool pointer_mode_ = false;
  std::uint64_t region_base_ = 0;
  std::uint64_t region_bytes_ = 0;
  std::uint32_t entry_size_ = 4;
  std::uint64_t pinned_bytes_ = 0;
  std::vector<DirectRange> direct_ranges_;
  std::unordered_map<std::uint32_t, BufferState> buffers_;
  std::uint64_t signals_delivered_ = 0;
};

/// Accelerator-side record of each ring's last-seen tail; converts coalesced
/// signals into exact new-request counts.
class RingTracker {
 public:
  void set_capacity(std::uint32_t buffer_id, std::uint32_t capacity);
  /// count = (observed - recorded) mod 2^32; faults when the implied count
  /// exceeds the buffer capacity (a producer violated its credits).
  std::uint32_t new_requests(std::uint32_t buffer_id, std::uint32_t observed);
  std::uint32_t recorded_tail(std::uint32_t buffer_id) const;

 private:
  struct Entry {
    std::uint32_t recorded = 0;
    std::uint32_t capacity = 0;
  };
  std::unordered_map<std::uint32_t, Entry> entries_;
};

/// Spin-polling baseline: reads one address every poll_interval_cycles accel
/// cycles, charging 64 B of cc-link traffic per poll. Detection completes a
/// cc round trip after the poll tick that observes the change.
class SpinPoller {
 public:
  using ChangeFn = std::function<void(std::uint32_t value, sim::TimeNs at)>;

  SpinPoller(sim::Simulator& sim, mem::MemoryModel& mem, CpollConfig cfg,
             std::uint64_t addr, ChangeFn on_change);

  void start();
  void stop() { running_ = false; }
  std::uint64_t polls() const { return polls_; }

 private:
  void tick();

  sim::Simulator& sim_;
  mem::MemoryModel& mem_;
  CpollConfig cfg_;
  std::uint64_t addr_;
  ChangeFn on_change_;
  bool running_ = false;
  std::uint64_t cycle_ = 0;
  sim::TimeNs epoch_ = 0;
  std::uint32_t last_seen_ = 0;
  std::uint64_t polls_ = 0;
};

}  // namespace rambda::cpoll
