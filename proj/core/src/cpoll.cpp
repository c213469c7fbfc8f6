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

#include "rambda/cpoll.hpp"

namespace rambda::cpoll {

PointerBuffer::PointerBuffer(mem::MemoryModel& m, std::uint64_t base,
                             std::uint32_t entries)
    : mem_(m), base_(base), entries_(entries) {
  if (entries == 0)
    throw std::invalid_argument("pointer buffer: need at least one entry");
  mem_.region_at(base, bytes());  // must be registered and contiguous
}

std::uint32_t PointerBuffer::read(std::uint32_t buffer_id) const {
  std::uint8_t b[4];
  mem_.read_bytes(entry_addr(buffer_id), b);
  return static_cast<std::uint32_t>(b[0]) |
         static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 |
         static_cast<std::uint32_t>(b[3]) << 24;
}

void PointerBuffer::store(std::uint32_t buffer_id, std::uint32_t value) {
  if (buffer_id >= entries_)
    throw std::out_of_range("pointer buffer: entry out of range");
  const std::uint8_t b[4] = {
      static_cast<std::uint8_t>(value), static_cast<std::uint8_t>(value >> 8),
      static_cast<std::uint8_t>(value >> 16),
      static_cast<std::uint8_t>(value >> 24)};
  mem_.write_bytes(entry_addr(buffer_id), b);
}

CpollChecker::CpollChecker(sim::Simulator& sim, mem::MemoryModel& mem,
                           CpollConfig cfg)
    : sim_(sim), mem_(mem), cfg_(cfg) {}

void CpollChecker::register_pointer_region(const PointerBuffer& pb,
                                           Placement placement) {
  if (placement == Placement::kPinnedCache &&
      pinned_bytes_ + pb.bytes() > cfg_.accel_cache_bytes)
    throw std::invalid_argument(
        "cpoll region of " + std::to_string(pb.bytes()) +
        " B exceeds the accelerator cache (" +
        std::to_string(cfg_.accel_cache_bytes) + " B) when pinned");
  if (placement == Placement::kPinnedCache) pinned_bytes_ += pb.bytes();
  pointer_mode_ = true;
  region_base_ = pb.base();
  region_bytes_ = pb.bytes();
  entry_size_ = 4;
}

void CpollChecker::register_direct(std::uint32_t buffer_id, std::uint64_t base,
                                   std::uint64_t bytes) {
  // The direct (slot-snooping) arrangement exists only pinned in the local
  // cache, so it is bounded by the cache size.
  if (pinned_bytes_ + bytes > cfg_.accel_cache_bytes)
    throw std::invalid_argument(
        "direct cpoll registration exceeds the accelerator cache");
  pinned_bytes_ += bytes;
  mem_.region_at(base, bytes);
  direct_ranges_.push_back(DirectRange{base, bytes, buffer_id});
}

void CpollChecker::note_write(std::uint32_t buffer_id, std::uint32_t observed) {
  auto& st = buffers_[buffer_id];
  st.latest = observed;
  if (st.state != State::kIdle) return;  // coalesce into the pending signal
  st.state = State::kInFlight;
  sim_.schedule(mem_.config().cc_link_oneway_ns, [this, buffer_id] {
    auto& b = buffers_[buffer_id];
    if (b.state != State::kInFlight) return;
    b.state = State::kQueued;
    ++signals_delivered_;
    if (sink_) sink_(CpollSignal{buffer_id, b.latest, sim_.now()});
  });
}

void CpollChecker::on_write(std::uint64_t addr, std::uint64_t len) {
  if (pointer_mode_ && addr >= region_base_ &&
      addr < region_base_ + region_bytes_) {
    const auto first = (addr - region_base_) / entry_size_;
    const auto last = (addr + len - 1 - region_base_) / entry_size_;
    for (auto e = first; e <= last; ++e) {
      const auto id = static_cast<std::uint32_t>(e);
      std::uint8_t b[4];
      mem_.read_bytes(region_base_ + e * entry_size_, b);
      const std::uint32_t v = static_cast<std::uint32_t>(b[0]) |
                              static_cast<std::uint32_t>(b[1]) << 8 |
                              static_cast<std::uint32_t>(b[2]) << 16 |
                              static_cast<std::uint32_t>(b[3]) << 24;
      note_write(id, v);
    }
    return;
  }
  for (const auto& r : direct_ranges_) {
    if (addr >= r.base && addr < r.base + r.bytes) {
      // Slot stores arrive in ring order; each one is a new message.
      auto& st = buffers_[r.buffer_id];
      note_write(r.buffer_id, ++st.shadow_count);
      return;
    }
  }
}

std::uint32_t CpollChecker::take(std::uint32_t buffer_id) {
  auto it = buffers_.find(buffer_id);
  if (it == buffers_.end() || it->second.state != State::kQueued)
    throw std::logic_error("cpoll take: no delivered signal for buffer " +
                           std::to_string(buffer_id));
  it->second.state = State::kIdle;
  return it->second.latest;
}

bool CpollChecker::pending(std::uint32_t buffer_id) const {
  auto it = buffers_.find(buffer_id);
  return it != buffers_.end() && it->second.state != State::kIdle;
}

void RingTracker::set_capacity(std::uint32_t buffer_id,
                               std::uint32_t capacity) {
  entries_[buffer_id] = Entry{0, capacity};
}

std::uint32_t RingTracker::new_requests(std::uint32_t buffer_id,
                                        std::uint32_t observed) {
  auto it = entries_.find(buffer_id);
  if (it == entries_.end())
    throw std::out_of_range("ring tracker: unknown buffer " +
                            std::to_string(buffer_id));
  const std::uint32_t count = observed - it->second.recorded;  // mod 2^32
  if (count > it->second.capacity)
    throw ring::ProtocolFault(
        "ring tracker: buffer " + std::to_string(buffer_id) + " implies " +
        std::to_string(count) + " new requests, over capacity " +
        std::to_string(it->second.capacity) + " (credits violated)");
  it->second.recorded = observed;
  return count;
}

std::uint32_t RingTracker::recorded_tail(std::uint32_t buffer_id) const {
  auto it = entries_.find(buffer_id);
  if (it == entries_.end())
    throw std::out_of_range("ring tracker: unknown buffer " +
                            std::to_string(buffer_id));
  return it->second.recorded;
}

SpinPoller::SpinPoller(sim::Simulator& sim, mem::MemoryModel& mem,
                       CpollConfig cfg, std::uint64_t addr, ChangeFn on_change)
    : sim_(sim), mem_(mem), cfg_(cfg), addr_(addr),
      on_change_(std::move(on_change)) {}

void SpinPoller::start() {
  running_ = true;
  epoch_ = sim_.now();
  cycle_ = 0;
  std::uint8_t b[4];
  mem_.read_bytes(addr_, b);
  last_seen_ = static_cast<std::uint32_t>(b[0]) |
               static_cast<std::uint32_t>(b[1]) << 8 |
               static_cast<std::uint32_t>(b[2]) << 16 |
               static_cast<std::uint32_t>(b[3]) << 24;
  tick();
}

void SpinPoller::tick() {
  if (!running_) return;
  cycle_ += cfg_.poll_interval_cycles;
  // Integer-ns fire times: cycles * 1000 / MHz keeps the long-run rate exact
  // (e.g. 15 cycles at 400 MHz alternates 37/38 ns around 37.5).
  const sim::TimeNs next =
      epoch_ + cycle_ * 1000ull / cfg_.accel_clock_mhz;
  sim_.schedule(next - sim_.now(), [this] {
    if (!running_) return;
    ++polls_;
    // Each poll refetches the line over the cc link.
    const auto now = sim_.now();
    const auto wait = mem_.cc_transfer(now, mem_.config().cacheline_bytes) -
                      now;
    const auto done = now + wait + 2 * mem_.config().cc_link_oneway_ns;
    std::uint8_t b[4];
    mem_.read_bytes(addr_, b);
    const std::uint32_t v = static_cast<std::uint32_t>(b[0]) |
                            static_cast<std::uint32_t>(b[1]) << 8 |
                            static_cast<std::uint32_t>(b[2]) << 16 |
                            static_cast<std::uint32_t>(b[3]) << 24;
    if (v != last_seen_) {
      last_seen_ = v;
      if (on_change_) {
        const std::uint32_t seen = v;
        sim_.schedule(done - now, [this, seen, done] {
          if (on_change_) on_change_(seen, done);
        });
      }
    }
    tick();
  });
}

}  // namespace rambda::cpoll
