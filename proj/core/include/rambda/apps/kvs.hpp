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
#include <optional>
#include <unordered_map>

#include "rambda/accel.hpp"
#include "rambda/apps/wire.hpp"
#include "rambda/mem.hpp"

namespace rambda::apps {

struct KvsConfig {
  std::uint64_t table_base = 0;
  std::uint32_t bucket_count = 0;  // power of two
  std::uint64_t slab_base = 0;
  std::uint64_t slab_len = 0;
  std::uint32_t pair_slot_bytes = 64;
  // CPU-managed pool for chained buckets (allocated via the alloc service).
  std::uint64_t chain_pool_base = 0;
  std::uint64_t chain_pool_len = 0;
};

/// Set-associative hash table: 8-way buckets of packed (tag16 | ptr48)
/// entries plus an overflow pointer, on a 128 B stride so one bucket read
/// always touches two cachelines. Pairs live in a fixed-slot slab.
class KvStore {
 public:
  static constexpr std::uint32_t kBucketEntries = 8;
  static constexpr std::uint32_t kBucketBytes = 72;   // 8x8 entries + overflow
  static constexpr std::uint32_t kBucketStride = 128;

  struct Access {
    std::uint64_t addr;
    std::uint32_t size;
    bool write;
  };
  using Trace = std::vector<Access>;

  KvStore(mem::MemoryModel& m, KvsConfig cfg);

  const KvsConfig& config() const { return cfg_; }
  std::uint64_t bucket_addr(std::uint32_t index) const {
    return cfg_.table_base + static_cast<std::uint64_t>(index) * kBucketStride;
  }
  std::uint32_t bucket_of(std::uint64_t hash) const {
    return static_cast<std::uint32_t>(hash & (cfg_.bucket_count - 1));
  }
  std::uint16_t tag_of(std::uint64_t hash) const {
    return static_cast<std::uint16_t>(hash >> bucket_bits_);
  }

  // Packed-entry helpers (tag in bits [63:48], pointer in [47:0], zero =
  // empty).
  static std::uint64_t pack_entry(std::uint16_t tag, std::uint64_t ptr) {
    return static_cast<std::uint64_t>(tag) << 48 | (ptr & 0xffffffffffffULL);
  }
  static std::uint16_t entry_tag(std::uint64_t e) {
    return static_cast<std::uint16_t>(e >> 48);
  }
  static std::uint64_t entry_ptr(std::uint64_t e) {
    return e & 0xffffffffffffULL;
  }

  std::uint64_t read_entry(std::uint64_t bucket_addr, std::uint32_t i) const;
  void write_entry(std::uint64_t bucket_addr, std::uint32_t i, std::uint64_t e);
  std::uint64_t read_overflow(std::uint64_t bucket_addr) const;
  void write_overflow(std::uint64_t bucket_addr, std::uint64_t ptr);

  // Pair slot: key_len u16 | val_len u16 | key | value.
  void write_pair(std::uint64_t pair_addr, std::span<const std::uint8_t> key,
                  std::span<const std::uint8_t> value);
  bool pair_matches(std::uint64_t pair_addr,
                    std::span<const std::uint8_t> key) const;
  std::vector<std::uint8_t> pair_value(std::uint64_t pair_addr) const;
  std::uint32_t max_value_bytes(std::uint32_t key_len) const {
    return cfg_.pair_slot_bytes - 4 - key_len;
  }

  /// APU-managed slab: pre-defined pool, bump allocation of fixed slots.
  std::uint64_t slab_alloc();
  std::uint64_t slab_allocated() const { return slab_next_; }

  // Synchronous reference path used by the CPU / Smart NIC pipelines and the
  // oracle tests; optional trace records every (addr, size) touched.
  std::optional<std::vector<std::uint8_t>> get(std::span<const std::uint8_t> key,
                                               Trace* trace = nullptr);
  wire::Status put(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> value, Trace* trace = nullptr);
  wire::Status update(std::span<const std::uint8_t> key,
                      std::span<const std::uint8_t> value,
                      Trace* trace = nullptr);

  /// Direct chained-bucket allocation for the synchronous path (the accel
  /// path allocates through the CPU alloc service instead).
  std::uint64_t chain_alloc_direct();

  mem::MemoryModel& memory() { return mem_; }

 private:
  mem::MemoryModel& mem_;
  KvsConfig cfg_;
  std::uint32_t bucket_bits_;
  std::uint64_t slab_next_ = 0;
  std::uint64_t chain_next_ = 0;
};

/// Lines touched by an access trace, the unit the per-op access counts use.
std::uint64_t trace_lines(const KvStore::Trace& t, std::uint64_t cacheline);

/// The fully-offloaded key-value APU: hash -> bucket read -> pair read with
/// tag verification, chained buckets on overflow, slab-backed PUT, and
/// CPU-assisted chained-bucket allocation.
class KvsApp : public accel::Application {
 public:
  KvsApp(KvStore& store, accel::AccelConfig accel_cfg);

  std::string_view name() const override { return "rambda-kv"; }
  void on_request(accel::RequestContext& ctx,
                  std::span<const std::uint8_t> payload) override;
  void on_mem_complete(accel::RequestContext& ctx, std::uint64_t tag) override;
  void on_cpu_reply(accel::RequestContext& ctx,
                    std::span<const std::uint8_t> body) override;

  // Per-op memory access accounting in cachelines (GET and PUT gate the
  // three-and-four access averages).
  std::uint64_t get_ops() const { return get_ops_; }
  std::uint64_t get_lines() const { return get_lines_; }
  std::uint64_t put_ops() const { return put_ops_; }
  std::uint64_t put_lines() const { return put_lines_; }
  std::uint64_t update_ops() const { return update_ops_; }

 private:
  struct Pending;

  void bucket_loaded(accel::RequestContext& ctx, Pending& p);
  void pair_loaded(accel::RequestContext& ctx, Pending& p);
  void continue_scan(accel::RequestContext& ctx, Pending& p);
  void finish(accel::RequestContext& ctx, Pending& p, wire::Status st,
              std::span<const std::uint8_t> value = {});
  void count_lines(Pending& p, std::uint64_t addr, std::uint32_t size);

  KvStore& store_;
  std::uint64_t action_ns_;
  std::uint64_t get_ops_ = 0, get_lines_ = 0;
  std::uint64_t put_ops_ = 0, put_lines_ = 0;
  std::uint64_t update_ops_ = 0, update_lines_ = 0;
  // Per-bucket hazard queue: mutators on one home bucket run one at a time;
  // lookups stay lock-free (pair-before-entry ordering keeps them safe).
  std::unordered_map<std::uint32_t, std::deque<std::uint64_t>> waiting_;
  std::unordered_map<std::uint32_t, bool> busy_;
};

}  // namespace rambda::apps
