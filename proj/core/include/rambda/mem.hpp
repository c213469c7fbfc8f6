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

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rambda/sim.hpp"

namespace rambda::mem {

enum class MediaKind : std::uint8_t { kDram, kNvm };
enum class Origin : std::uint8_t { kCpu, kAccel, kDma };
enum class AccessOp : std::uint8_t { kRead, kWrite };

struct LatencyConfig {
  std::uint64_t dram_access_ns = 90;
  std::uint64_t nvm_read_ns = 300;
  std::uint64_t nvm_write_ns = 100;  // per write-granularity unit
  std::uint64_t llc_access_ns = 20;
  std::uint64_t cc_link_oneway_ns = 50;
  std::uint64_t pcie_oneway_ns = 1000;
  double cc_link_bw_bytes_per_ns = 20.8;
  double pcie_bw_bytes_per_ns = 16.0;
  double host_mem_bw_bytes_per_ns = 40.0;
  double nvm_bw_bytes_per_ns = 2.56;
  std::uint64_t nvm_write_granularity_bytes = 256;
  std::uint64_t cacheline_bytes = 64;
  // Accelerator-attached local memory (HBM/DDR on the device).
  std::uint64_t accel_local_access_ns = 100;
  double accel_local_bw_bytes_per_ns = 400.0;
  // LLC geometry. io_way_fraction is the DDIO-eligible slice.
  std::uint64_t llc_capacity_bytes = 28835840;  // 27.5 MiB
  std::uint32_t llc_ways = 20;
  double llc_io_way_fraction = 0.10;

  void validate() const;
};

using RegionId = std::uint32_t;

struct MemRegion {
  RegionId id;
  std::uint64_t base;
  std::uint64_t length;
  MediaKind kind;
  bool tph_on_write;     // may be true only for DRAM regions
  bool accel_attached;   // lives in accelerator-local memory
};

struct AccessRequest {
  std::uint64_t addr;
  std::uint32_t size;
  AccessOp op;
  Origin origin;
  bool tph = false;  // dma only: effective per-packet TPH bit
};

/// Counter snapshot. mem_* is host main-memory traffic (DRAM or NVM media),
/// llc_write_bytes is DMA traffic injected into the LLC, nvm_media_write_bytes
/// is bytes that reached NVM media including write amplification.
struct MemCounters {
  std::uint64_t mem_read_bytes = 0;
  std::uint64_t mem_write_bytes = 0;
  std::uint64_t llc_write_bytes = 0;
  std::uint64_t nvm_media_write_bytes = 0;
  std::uint64_t cc_link_bytes = 0;
  std::uint64_t pcie_bytes = 0;
  bool operator==(const MemCounters&) const = default;
};

/// FIFO serialization over a fixed-rate link; acquire() returns the time the
/// transfer completes and accrues queuing when the link is busy.
class BandwidthChannel {
 public:
  BandwidthChannel() = default;
  explicit BandwidthChannel(double bytes_per_ns) : rate_(bytes_per_ns) {}
  sim::TimeNs acquire(sim::TimeNs now, std::uint64_t bytes) {
    const auto start = std::max(now, busy_until_);
    sim::TimeNs dur = 0;
    if (bytes > 0 && rate_ > 0.0)
      dur = static_cast<sim::TimeNs>(
          std::ceil(static_cast<double>(bytes) / rate_));
    busy_until_ = start + dur;
    return busy_until_;
  }
  sim::TimeNs busy_until() const { return busy_until_; }

 private:
  double rate_ = 0.0;
  sim::TimeNs busy_until_ = 0;
};

/// Timed model of one machine's memory system: LLC with a DDIO io-way slice,
/// DRAM and NVM media with bandwidth channels, the cc-interconnect and PCIe
/// links, plus the byte-level backing store the data plane reads and writes.
///
/// NVM regions keep a durable shadow: bytes become durable when a line is
/// flushed or evicted to media, or when DMA lands on media directly. A crash
/// resets volatile contents back to the shadow.
class MemoryModel {
 public:
  using WriteObserver =
      std::function<void(std::uint64_t addr, std::uint64_t len)>;
  using PersistHook =
      std::function<void(std::uint64_t unit_addr, std::uint64_t bytes)>;

  MemoryModel(sim::Simulator& sim, LatencyConfig cfg, std::string name);

  RegionId register_region(std::uint64_t base, std::uint64_t length,
                           MediaKind kind, bool tph_on_write,
                           bool accel_attached = false);
  const MemRegion& region(RegionId id) const;
  const MemRegion& region_at(std::uint64_t addr, std::uint64_t len = 1) const;

  /// Timing plane: returns completion latency in ns and updates counters.
  /// DMA-write destination: LLC io slice when ddio or the packet TPH bit is
  /// set, main memory otherwise.
  std::uint64_t access(const AccessRequest& req);

  /// Writes one dirty line back to media. NVM lines rewrite the full
  /// write-granularity unit; already-dirty lines of the same unit co-evict.
  /// Returns media bytes written.
  std::uint64_t evict(std::uint64_t line_addr);

  /// Persists every dirty line in [addr, addr+len). Returns the latency until
  /// the last media write completes. The persist path for apps (clwb-style).
  std::uint64_t flush(std::uint64_t addr, std::uint64_t len);

  void set_ddio(bool enabled) { ddio_enabled_ = enabled; }
  bool ddio_enabled() const { return ddio_enabled_; }

  MemCounters counters() const { return counters_; }
  void publish_counters(sim::CounterSet& out, const std::string& prefix) const;

  // --- data plane -----------------------------------------------------
  void write_bytes(std::uint64_t addr, std::span<const std::uint8_t> data);
  void read_bytes(std::uint64_t addr, std::span<std::uint8_t> out) const;
  /// Direct view into a region's backing store (allocates it if needed).
  std::uint8_t* raw(std::uint64_t addr, std::uint64_t len);
  void add_write_observer(WriteObserver fn) {
    observers_.push_back(std::move(fn));
  }

  // --- durability -----------------------------------------------------
  /// Drops all volatile state: LLC contents and DRAM region bytes are lost,
  /// NVM region bytes revert to the durable shadow.
  void crash_reset_volatile();
  void set_persist_hook(PersistHook fn) { persist_hook_ = std::move(fn); }
  /// Durable view of an NVM region's bytes (what survives a crash).
  std::span<const std::uint8_t> durable_view(RegionId id) const;

  // --- shared links ----------------------------------------------------
  /// Charges the PCIe link; returns transfer completion time.
  sim::TimeNs pcie_transfer(sim::TimeNs now, std::uint64_t bytes);
  /// Charges the cc-interconnect; returns transfer completion time.
  sim::TimeNs cc_transfer(sim::TimeNs now, std::uint64_t bytes);
  /// Charges host memory bandwidth directly (baseline pipelines).
  sim::TimeNs host_mem_transfer(sim::TimeNs now, std::uint64_t bytes,
                                bool is_read = true);

  const LatencyConfig& config() const { return cfg_; }
  std::uint64_t lines_spanned(std::uint64_t addr, std::uint64_t size) const;
  bool line_dirty(std::uint64_t line_addr) const;
  std::uint64_t llc_resident_lines() const { return directory_.size(); }

 private:
  struct Region {
    MemRegion meta;
    std::vector<std::uint8_t> data;     // allocated lazily
    std::vector<std::uint8_t> durable;  // NVM only, allocated lazily
    bool backed = false;
  };
  struct LineState {
    std::uint32_t set;
    bool dirty;
    bool io;  // injected by DMA; resides in the io-way slice
  };

  Region& mutable_region_at(std::uint64_t addr, std::uint64_t len);
  void ensure_backing(Region& r);

  std::uint32_t set_of(std::uint64_t line_addr) const;
  // Inserts a line; evicts a random victim from the matching slice if full.
  void insert_line(std::uint64_t line_addr, bool dirty, bool io);
  void mark_dirty_or_insert(std::uint64_t addr, std::uint32_t size, bool io);
  bool all_lines_resident(std::uint64_t addr, std::uint32_t size) const;
  void invalidate_lines(std::uint64_t addr, std::uint64_t size);
  // Writes one line (plus co-evicted unit neighbours on NVM) to media.
  std::uint64_t write_back_line(std::uint64_t line_addr, bool count_evict);
  void persist_range(Region& r, std::uint64_t addr, std::uint64_t len);

  sim::Simulator& sim_;
  LatencyConfig cfg_;
  std::string name_;
  bool ddio_enabled_ = false;  // guideline: DDIO off globally by default

  std::vector<Region> regions_;  // sorted by base
  MemCounters counters_;

  // LLC directory: line address -> state; per-set occupancy lists split into
  // the io slice and the regular slice.
  std::uint32_t sets_ = 0;
  std::uint32_t io_ways_ = 0;
  std::uint32_t cpu_ways_ = 0;
  std::unordered_map<std::uint64_t, LineState> directory_;
  std::vector<std::vector<std::uint64_t>> set_io_lines_;
  std::vector<std::vector<std::uint64_t>> set_cpu_lines_;
  sim::RngStream victim_rng_;

  BandwidthChannel cc_link_;
  BandwidthChannel pcie_;
  BandwidthChannel host_mem_;
  BandwidthChannel nvm_media_;
  BandwidthChannel accel_local_;

  std::vector<WriteObserver> observers_;
  PersistHook persist_hook_;
};

}  // namespace rambda::mem
