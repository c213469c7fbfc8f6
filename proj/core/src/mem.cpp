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

#include "rambda/mem.hpp"

#include <algorithm>
#include <cstring>

namespace rambda::mem {

void LatencyConfig::validate() const {
  if (cacheline_bytes == 0 || nvm_write_granularity_bytes == 0 ||
      nvm_write_granularity_bytes % cacheline_bytes != 0)
    throw std::invalid_argument(
        "memory config: nvm_write_granularity_bytes must be a positive "
        "multiple of cacheline_bytes");
  if (llc_ways == 0 || llc_capacity_bytes % (cacheline_bytes * llc_ways) != 0)
    throw std::invalid_argument(
        "memory config: llc_capacity_bytes must divide into llc_ways "
        "whole-line sets");
  if (llc_io_way_fraction < 0.0 || llc_io_way_fraction > 1.0)
    throw std::invalid_argument(
        "memory config: llc_io_way_fraction must be in [0,1]");
}

MemoryModel::MemoryModel(sim::Simulator& sim, LatencyConfig cfg,
                         std::string name)
    : sim_(sim),
      cfg_(cfg),
      name_(std::move(name)),
      victim_rng_(sim.seed(), name_ + ".llc.victim"),
      cc_link_(cfg.cc_link_bw_bytes_per_ns),
      pcie_(cfg.pcie_bw_bytes_per_ns),
      host_mem_(cfg.host_mem_bw_bytes_per_ns),
      nvm_media_(cfg.nvm_bw_bytes_per_ns),
      accel_local_(cfg.accel_local_bw_bytes_per_ns) {
  cfg_.validate();
  sets_ = static_cast<std::uint32_t>(cfg_.llc_capacity_bytes /
                                     (cfg_.cacheline_bytes * cfg_.llc_ways));
  io_ways_ = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(cfg_.llc_ways * cfg_.llc_io_way_fraction));
  cpu_ways_ = cfg_.llc_ways - io_ways_;
  set_io_lines_.resize(sets_);
  set_cpu_lines_.resize(sets_);
}

RegionId MemoryModel::register_region(std::uint64_t base, std::uint64_t length,
                                      MediaKind kind, bool tph_on_write,
                                      bool accel_attached) {
  if (length == 0) throw std::invalid_argument("register_region: empty range");
  if (base + length < base)
    throw std::invalid_argument("register_region: address wraparound");
  if (tph_on_write && kind != MediaKind::kDram)
    throw std::invalid_argument(
        "register_region: TPH must not target NVM regions");
  for (const auto& r : regions_) {
    if (base < r.meta.base + r.meta.length && r.meta.base < base + length)
      throw std::invalid_argument("register_region: overlaps region " +
                                  std::to_string(r.meta.id));
  }
  const RegionId id = static_cast<RegionId>(regions_.size());
  regions_.push_back(Region{
      MemRegion{id, base, length, kind, tph_on_write, accel_attached}, {}, {},
      false});
  return id;
}

const MemRegion& MemoryModel::region(RegionId id) const {
  if (id >= regions_.size())
    throw std::out_of_range("unknown region id " + std::to_string(id));
  return regions_[id].meta;
}

const MemRegion& MemoryModel::region_at(std::uint64_t addr,
                                        std::uint64_t len) const {
  for (const auto& r : regions_) {
    if (addr >= r.meta.base && addr + len <= r.meta.base + r.meta.length)
      return r.meta;
  }
  throw std::out_of_range(name_ + ": unmapped address range [" +
                          std::to_string(addr) + ", " +
                          std::to_string(addr + len) + ")");
}

MemoryModel::Region& MemoryModel::mutable_region_at(std::uint64_t addr,
                                                    std::uint64_t len) {
  for (auto& r : regions_) {
    if (addr >= r.meta.base && addr + len <= r.meta.base + r.meta.length)
      return r;
  }
  throw std::out_of_range(name_ + ": unmapped address range [" +
                          std::to_string(addr) + ", " +
                          std::to_string(addr + len) + ")");
}

void MemoryModel::ensure_backing(Region& r) {
  if (r.backed) return;
  r.data.assign(r.meta.length, 0);
  if (r.meta.kind == MediaKind::kNvm) r.durable.assign(r.meta.length, 0);
  r.backed = true;
}

std::uint32_t MemoryModel::set_of(std::uint64_t line_addr) const {
  return static_cast<std::uint32_t>((line_addr / cfg_.cacheline_bytes) %
                                    sets_);
}

std::uint64_t MemoryModel::lines_spanned(std::uint64_t addr,
                                         std::uint64_t size) const {
  const auto first = addr / cfg_.cacheline_bytes;
  const auto last = (addr + size - 1) / cfg_.cacheline_bytes;
  return last - first + 1;
}

bool MemoryModel::line_dirty(std::uint64_t line_addr) const {
  auto it = directory_.find(line_addr);
  return it != directory_.end() && it->second.dirty;
}

bool MemoryModel::all_lines_resident(std::uint64_t addr,
                                     std::uint32_t size) const {
  const auto lb = cfg_.cacheline_bytes;
  for (auto line = addr / lb * lb; line < addr + size; line += lb)
    if (!directory_.contains(line)) return false;
  return true;
}

void MemoryModel::insert_line(std::uint64_t line_addr, bool dirty, bool io) {
  auto it = directory_.find(line_addr);
  if (it != directory_.end()) {
    it->second.dirty |= dirty;
    return;
  }
  const auto set = set_of(line_addr);
  auto& slice = io ? set_io_lines_[set] : set_cpu_lines_[set];
  const auto ways = io ? io_ways_ : cpu_ways_;
  if (slice.size() >= ways) {
    const auto vi = victim_rng_.next_below(slice.size());
    const auto victim = slice[vi];
    slice[vi] = slice.back();
    slice.pop_back();
    auto vit = directory_.find(victim);
    if (vit != directory_.end()) {
      const bool vdirty = vit->second.dirty;
      directory_.erase(vit);
      if (vdirty) write_back_line(victim, /*count_evict=*/false);
    }
  }
  directory_.emplace(line_addr, LineState{set_of(line_addr), dirty, io});
  slice.push_back(line_addr);
}

void MemoryModel::mark_dirty_or_insert(std::uint64_t addr, std::uint32_t size,
                                       bool io) {
  const auto lb = cfg_.cacheline_bytes;
  for (auto line = addr / lb * lb; line < addr + size; line += lb)
    insert_line(line, /*dirty=*/true, io);
}

void MemoryModel::invalidate_lines(std::uint64_t addr, std::uint64_t size) {
  const auto lb = cfg_.cacheline_bytes;
  for (auto line = addr / lb * lb; line < addr + size; line += lb) {
    auto it = directory_.find(line);
    if (it == directory_.end()) continue;
    auto& slice =
        it->second.io ? set_io_lines_[it->second.set] : set_cpu_lines_[it->second.set];
    auto pos = std::find(slice.begin(), slice.end(), line);
    if (pos != slice.end()) {
      *pos = slice.back();
      slice.pop_back();
    }
    directory_.erase(it);
  }
}

std::uint64_t MemoryModel::write_back_line(std::uint64_t line_addr,
                                           bool count_evict) {
  const auto& meta = region_at(line_addr, 1);
  auto& r = mutable_region_at(line_addr, 1);
  const auto lb = cfg_.cacheline_bytes;

  auto clean_line = [&](std::uint64_t line) {
    auto it = directory_.find(line);
    if (it != directory_.end()) it->second.dirty = false;
  };

  if (meta.kind == MediaKind::kDram) {
    counters_.mem_write_bytes += lb;
    host_mem_.acquire(sim_.now(), lb);
    clean_line(line_addr);
    (void)count_evict;
    return lb;
  }

  // NVM: the media rewrites a full granularity unit. Dirty lines found in the
  // same unit are co-evicted so one unit write covers them all.
  const auto unit = cfg_.nvm_write_granularity_bytes;
  const auto unit_base = line_addr / unit * unit;
  ensure_backing(r);
  for (auto line = unit_base; line < unit_base + unit; line += lb) {
    auto it = directory_.find(line);
    if (it != directory_.end() && it->second.dirty) {
      it->second.dirty = false;
      persist_range(r, line, lb);
    } else if (line == line_addr) {
      // evict() path for a line the capacity walk already removed.
      persist_range(r, line, lb);
    }
  }
  counters_.nvm_media_write_bytes += unit;
  nvm_media_.acquire(sim_.now(), unit);
  if (persist_hook_) persist_hook_(unit_base, unit);
  return unit;
}

void MemoryModel::persist_range(Region& r, std::uint64_t addr,
                                std::uint64_t len) {
  if (r.meta.kind != MediaKind::kNvm) return;
  ensure_backing(r);
  const auto off = addr - r.meta.base;
  const auto n = std::min<std::uint64_t>(len, r.meta.length - off);
  std::memcpy(r.durable.data() + off, r.data.data() + off, n);
}

std::uint64_t MemoryModel::access(const AccessRequest& req) {
  if (req.size == 0) throw std::invalid_argument("access: size must be > 0");
  const auto& meta = region_at(req.addr, req.size);
  const auto now = sim_.now();

  if (req.origin == Origin::kDma) {
    if (req.op == AccessOp::kWrite) {
      if (ddio_enabled_ || req.tph) {
        // DDIO/TPH destination: inject into the LLC io-way slice.
        mark_dirty_or_insert(req.addr, req.size, /*io=*/true);
        counters_.llc_write_bytes += req.size;
        return cfg_.llc_access_ns;
      }
      // Straight to main memory. Resident copies are superseded.
      invalidate_lines(req.addr, req.size);
      counters_.mem_write_bytes += req.size;
      if (meta.kind == MediaKind::kNvm) {
        counters_.nvm_media_write_bytes += req.size;
        const auto fin = nvm_media_.acquire(now, req.size);
        auto& r = mutable_region_at(req.addr, req.size);
        persist_range(r, req.addr, req.size);
        if (persist_hook_) persist_hook_(req.addr, req.size);
        return cfg_.nvm_write_ns + (fin - now);
      }
      const auto fin = host_mem_.acquire(now, req.size);
      return cfg_.dram_access_ns + (fin - now);
    }
    // DMA read (device pulling host memory).
    if (all_lines_resident(req.addr, req.size)) return cfg_.llc_access_ns;
    counters_.mem_read_bytes += req.size;
    if (meta.kind == MediaKind::kNvm) {
      const auto fin = nvm_media_.acquire(now, req.size);
      return cfg_.nvm_read_ns + (fin - now);
    }
    const auto fin = host_mem_.acquire(now, req.size);
    return cfg_.dram_access_ns + (fin - now);
  }

  // CPU / accelerator accesses.
  std::uint64_t link_ns = 0;
  const bool crosses_cc = (req.origin == Origin::kAccel) != meta.accel_attached;
  if (crosses_cc) {
    counters_.cc_link_bytes += req.size;
    const auto start = std::max(now, cc_link_.busy_until());
    cc_link_.acquire(now, req.size);
    link_ns = 2 * cfg_.cc_link_oneway_ns + (start - now);
  }

  if (meta.accel_attached) {
    const auto start = std::max(now, accel_local_.busy_until());
    accel_local_.acquire(now, req.size);
    return link_ns + cfg_.accel_local_access_ns + (start - now);
  }

  if (req.op == AccessOp::kRead) {
    if (all_lines_resident(req.addr, req.size))
      return link_ns + cfg_.llc_access_ns;
    counters_.mem_read_bytes += req.size;
    std::uint64_t media_ns;
    if (meta.kind == MediaKind::kNvm) {
      const auto start = std::max(now, nvm_media_.busy_until());
      nvm_media_.acquire(now, req.size);
      media_ns = cfg_.nvm_read_ns + (start - now);
    } else {
      const auto start = std::max(now, host_mem_.busy_until());
      host_mem_.acquire(now, req.size);
      media_ns = cfg_.dram_access_ns + (start - now);
    }
    const auto lb = cfg_.cacheline_bytes;
    for (auto line = req.addr / lb * lb; line < req.addr + req.size; line += lb)
      insert_line(line, /*dirty=*/false, /*io=*/false);
    return link_ns + media_ns;
  }

  // Write-back cache: stores allocate dirty lines; media cost is paid on
  // eviction or an explicit flush.
  mark_dirty_or_insert(req.addr, req.size, /*io=*/false);
  return link_ns + cfg_.llc_access_ns;
}

std::uint64_t MemoryModel::evict(std::uint64_t line_addr) {
  const auto lb = cfg_.cacheline_bytes;
  line_addr = line_addr / lb * lb;
  auto it = directory_.find(line_addr);
  if (it == directory_.end() || !it->second.dirty)
    throw std::invalid_argument("evict: line " + std::to_string(line_addr) +
                                " is not dirty in the LLC");
  return write_back_line(line_addr, /*count_evict=*/true);
}

std::uint64_t MemoryModel::flush(std::uint64_t addr, std::uint64_t len) {
  const auto now = sim_.now();
  const auto lb = cfg_.cacheline_bytes;
  sim::TimeNs done = now;
  for (auto line = addr / lb * lb; line < addr + len; line += lb) {
    auto it = directory_.find(line);
    if (it == directory_.end() || !it->second.dirty) continue;
    write_back_line(line, /*count_evict=*/false);
    done = std::max(
        done, std::max(nvm_media_.busy_until(), host_mem_.busy_until()));
  }
  return done - now;
}

void MemoryModel::publish_counters(sim::CounterSet& out,
                                   const std::string& prefix) const {
  out.add(prefix + "mem_read_bytes", counters_.mem_read_bytes);
  out.add(prefix + "mem_write_bytes", counters_.mem_write_bytes);
  out.add(prefix + "llc_write_bytes", counters_.llc_write_bytes);
  out.add(prefix + "nvm_media_write_bytes", counters_.nvm_media_write_bytes);
  out.add(prefix + "cc_link_bytes", counters_.cc_link_bytes);
  out.add(prefix + "pcie_bytes", counters_.pcie_bytes);
}

void MemoryModel::write_bytes(std::uint64_t addr,
                              std::span<const std::uint8_t> data) {
  auto& r = mutable_region_at(addr, data.size());
  ensure_backing(r);
  std::memcpy(r.data.data() + (addr - r.meta.base), data.data(), data.size());
  for (auto& fn : observers_) fn(addr, data.size());
}

void MemoryModel::read_bytes(std::uint64_t addr,
                             std::span<std::uint8_t> out) const {
  const auto& meta = region_at(addr, out.size());
  const auto& r = regions_[meta.id];
  if (!r.backed) {
    std::fill(out.begin(), out.end(), 0);
    return;
  }
  std::memcpy(out.data(), r.data.data() + (addr - meta.base), out.size());
}

std::uint8_t* MemoryModel::raw(std::uint64_t addr, std::uint64_t len) {
  auto& r = mutable_region_at(addr, len);
  ensure_backing(r);
  return r.data.data() + (addr - r.meta.base);
}

void MemoryModel::crash_reset_volatile() {
  directory_.clear();
  for (auto& s : set_io_lines_) s.clear();
  for (auto& s : set_cpu_lines_) s.clear();
  for (auto& r : regions_) {
    if (!r.backed) continue;
    if (r.meta.kind == MediaKind::kNvm)
      r.data = r.durable;
    else
      std::fill(r.data.begin(), r.data.end(), 0);
  }
}

std::span<const std::uint8_t> MemoryModel::durable_view(RegionId id) const {
  const auto& meta = region(id);
  const auto& r = regions_[id];
  if (meta.kind != MediaKind::kNvm)
    throw std::invalid_argument("durable_view: region is not NVM");
  if (!r.backed) {
    static const std::vector<std::uint8_t> empty;
    return {empty.data(), 0};
  }
  return {r.durable.data(), r.durable.size()};
}

sim::TimeNs MemoryModel::pcie_transfer(sim::TimeNs now, std::uint64_t bytes) {
  counters_.pcie_bytes += bytes;
  return pcie_.acquire(now, bytes);
}

sim::TimeNs MemoryModel::cc_transfer(sim::TimeNs now, std::uint64_t bytes) {
  counters_.cc_link_bytes += bytes;
  return cc_link_.acquire(now, bytes);
}

sim::TimeNs MemoryModel::host_mem_transfer(sim::TimeNs now,
                                           std::uint64_t bytes, bool is_read) {
  if (is_read)
    counters_.mem_read_bytes += bytes;
  else
    counters_.mem_write_bytes += bytes;
  return host_mem_.acquire(now, bytes);
}

}  // namespace rambda::mem
