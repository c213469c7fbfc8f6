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

#include "rambda/apps/kvs.hpp"

#include <bit>
#include <cstring>
#include <deque>
#include <unordered_map>

namespace rambda::apps {

namespace {

constexpr std::uint64_t kTagBucketRead = 1;
constexpr std::uint64_t kTagPairRead = 2;
constexpr std::uint64_t kTagPairWrite = 3;
constexpr std::uint64_t kTagEntryWrite = 4;

std::uint64_t load_le64_at(mem::MemoryModel& m, std::uint64_t addr) {
  std::uint8_t b[8];
  m.read_bytes(addr, b);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void store_le64_at(mem::MemoryModel& m, std::uint64_t addr, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  m.write_bytes(addr, b);
}

}  // namespace

KvStore::KvStore(mem::MemoryModel& m, KvsConfig cfg) : mem_(m), cfg_(cfg) {
  if (cfg_.bucket_count == 0 || !std::has_single_bit(cfg_.bucket_count))
    throw std::invalid_argument("kvs: bucket_count must be a power of two");
  bucket_bits_ = static_cast<std::uint32_t>(std::countr_zero(cfg_.bucket_count));
  mem_.region_at(cfg_.table_base,
                 static_cast<std::uint64_t>(cfg_.bucket_count) * kBucketStride);
  mem_.region_at(cfg_.slab_base, cfg_.slab_len);
  if (cfg_.slab_base == 0)
    throw std::invalid_argument("kvs: slab_base 0 clashes with empty entries");
}

std::uint64_t KvStore::read_entry(std::uint64_t bucket_addr,
                                  std::uint32_t i) const {
  return load_le64_at(mem_, bucket_addr + 8ull * i);
}

void KvStore::write_entry(std::uint64_t bucket_addr, std::uint32_t i,
                          std::uint64_t e) {
  store_le64_at(mem_, bucket_addr + 8ull * i, e);
}

std::uint64_t KvStore::read_overflow(std::uint64_t bucket_addr) const {
  return load_le64_at(mem_, bucket_addr + 64);
}

void KvStore::write_overflow(std::uint64_t bucket_addr, std::uint64_t ptr) {
  store_le64_at(mem_, bucket_addr + 64, ptr);
}

void KvStore::write_pair(std::uint64_t pair_addr,
                         std::span<const std::uint8_t> key,
                         std::span<const std::uint8_t> value) {
  if (4 + key.size() + value.size() > cfg_.pair_slot_bytes)
    throw std::invalid_argument("kvs: pair exceeds slab slot");
  std::vector<std::uint8_t> buf(cfg_.pair_slot_bytes, 0);
  buf[0] = static_cast<std::uint8_t>(key.size());
  buf[1] = static_cast<std::uint8_t>(key.size() >> 8);
  buf[2] = static_cast<std::uint8_t>(value.size());
  buf[3] = static_cast<std::uint8_t>(value.size() >> 8);
  std::memcpy(buf.data() + 4, key.data(), key.size());
  std::memcpy(buf.data() + 4 + key.size(), value.data(), value.size());
  mem_.write_bytes(pair_addr, buf);
}

bool KvStore::pair_matches(std::uint64_t pair_addr,
                           std::span<const std::uint8_t> key) const {
  std::vector<std::uint8_t> buf(cfg_.pair_slot_bytes);
  mem_.read_bytes(pair_addr, buf);
  const std::uint16_t klen = buf[0] | buf[1] << 8;
  return klen == key.size() &&
         std::memcmp(buf.data() + 4, key.data(), klen) == 0;
}

std::vector<std::uint8_t> KvStore::pair_value(std::uint64_t pair_addr) const {
  std::vector<std::uint8_t> buf(cfg_.pair_slot_bytes);
  mem_.read_bytes(pair_addr, buf);
  const std::uint16_t klen = buf[0] | buf[1] << 8;
  const std::uint16_t vlen = buf[2] | buf[3] << 8;
  return {buf.begin() + 4 + klen, buf.begin() + 4 + klen + vlen};
}

std::uint64_t KvStore::slab_alloc() {
  if (slab_next_ + cfg_.pair_slot_bytes > cfg_.slab_len)
    throw std::runtime_error("kvs: slab pool exhausted");
  const auto addr = cfg_.slab_base + slab_next_;
  slab_next_ += cfg_.pair_slot_bytes;
  return addr;
}

std::uint64_t KvStore::chain_alloc_direct() {
  if (chain_next_ + kBucketStride > cfg_.chain_pool_len)
    throw std::runtime_error("kvs: chained-bucket pool exhausted");
  const auto addr = cfg_.chain_pool_base + chain_next_;
  chain_next_ += kBucketStride;
  return addr;
}

std::uint64_t trace_lines(const KvStore::Trace& t, std::uint64_t cacheline) {
  std::uint64_t lines = 0;
  for (const auto& a : t) {
    const auto first = a.addr / cacheline;
    const auto last = (a.addr + a.size - 1) / cacheline;
    lines += last - first + 1;
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Synchronous reference path

std::optional<std::vector<std::uint8_t>> KvStore::get(
    std::span<const std::uint8_t> key, Trace* trace) {
  const auto h = wire::fnv1a64(key);
  const auto tag = tag_of(h);
  auto bucket = bucket_addr(bucket_of(h));
  while (bucket != 0) {
    if (trace) trace->push_back({bucket, kBucketBytes, false});
    for (std::uint32_t i = 0; i < kBucketEntries; ++i) {
      const auto e = read_entry(bucket, i);
      if (e == 0 || entry_tag(e) != tag) continue;
      const auto pair = entry_ptr(e);
      if (trace) trace->push_back({pair, cfg_.pair_slot_bytes, false});
      if (pair_matches(pair, key)) return pair_value(pair);
    }
    bucket = read_overflow(bucket);
  }
  return std::nullopt;
}

wire::Status KvStore::put(std::span<const std::uint8_t> key,
                          std::span<const std::uint8_t> value, Trace* trace) {
  const auto h = wire::fnv1a64(key);
  const auto tag = tag_of(h);
  auto bucket = bucket_addr(bucket_of(h));
  std::uint64_t claim_bucket = 0, tail_bucket = bucket;
  std::uint32_t claim_idx = 0;
  bool have_claim = false;
  while (bucket != 0) {
    if (trace) trace->push_back({bucket, kBucketBytes, false});
    for (std::uint32_t i = 0; i < kBucketEntries; ++i) {
      const auto e = read_entry(bucket, i);
      if (e == 0) {
        if (!have_claim) {
          claim_bucket = bucket;
          claim_idx = i;
          have_claim = true;
        }
        continue;
      }
      if (entry_tag(e) != tag) continue;
      const auto pair = entry_ptr(e);
      if (trace) trace->push_back({pair, cfg_.pair_slot_bytes, false});
      if (pair_matches(pair, key)) {
        write_pair(pair, key, value);
        if (trace) trace->push_back({pair, cfg_.pair_slot_bytes, true});
        return wire::Status::kOk;
      }
    }
    tail_bucket = bucket;
    bucket = read_overflow(bucket);
  }
  if (!have_claim) {
    const auto fresh = chain_alloc_direct();
    write_overflow(tail_bucket, fresh);
    if (trace) trace->push_back({tail_bucket + 64, 8, true});
    claim_bucket = fresh;
    claim_idx = 0;
    if (trace) trace->push_back({fresh, kBucketBytes, false});
  }
  const auto pair = slab_alloc();
  write_pair(pair, key, value);
  if (trace) trace->push_back({pair, cfg_.pair_slot_bytes, true});
  write_entry(claim_bucket, claim_idx, pack_entry(tag, pair));
  if (trace) trace->push_back({claim_bucket + 8ull * claim_idx, 8, true});
  return wire::Status::kOk;
}

wire::Status KvStore::update(std::span<const std::uint8_t> key,
                             std::span<const std::uint8_t> value,
                             Trace* trace) {
  const auto h = wire::fnv1a64(key);
  const auto tag = tag_of(h);
  auto bucket = bucket_addr(bucket_of(h));
  while (bucket != 0) {
    if (trace) trace->push_back({bucket, kBucketBytes, false});
    for (std::uint32_t i = 0; i < kBucketEntries; ++i) {
      const auto e = read_entry(bucket, i);
      if (e == 0 || entry_tag(e) != tag) continue;
      const auto pair = entry_ptr(e);
      if (trace) trace->push_back({pair, cfg_.pair_slot_bytes, false});
      if (pair_matches(pair, key)) {
        write_pair(pair, key, value);
        if (trace) trace->push_back({pair, cfg_.pair_slot_bytes, true});
        return wire::Status::kOk;
      }
    }
    bucket = read_overflow(bucket);
  }
  return wire::Status::kNotFound;
}

// ---------------------------------------------------------------------------
// APU application

struct KvsApp::Pending : accel::RequestState {
  wire::KvOp op;
  std::vector<std::uint8_t> key, value;
  std::uint16_t tag = 0;
  std::uint64_t cur_bucket = 0;
  std::uint32_t scan_idx = 0;
  std::uint64_t cand_pair = 0;
  std::uint64_t lines = 0;
  // put bookkeeping
  bool have_claim = false;
  std::uint64_t claim_bucket = 0;
  std::uint32_t claim_idx = 0;
  std::uint64_t tail_bucket = 0;
  std::uint64_t new_pair = 0;
  std::vector<std::uint8_t> response_value;
};

KvsApp::KvsApp(KvStore& store, accel::AccelConfig accel_cfg)
    : store_(store), action_ns_(accel_cfg.apu_action_ns) {}

void KvsApp::count_lines(Pending& p, std::uint64_t addr, std::uint32_t size) {
  const auto lb = store_.memory().config().cacheline_bytes;
  p.lines += (addr + size - 1) / lb - addr / lb + 1;
}

void KvsApp::on_request(accel::RequestContext& ctx,
                        std::span<const std::uint8_t> payload) {
  wire::Reader r(payload);
  auto p = std::make_unique<Pending>();
  p->op = static_cast<wire::KvOp>(r.u8());
  const auto klen = r.u16();
  auto k = r.bytes(klen);
  p->key.assign(k.begin(), k.end());
  if (p->op != wire::KvOp::kGet) {
    const auto vlen = r.u16();
    auto v = r.bytes(vlen);
    p->value.assign(v.begin(), v.end());
  }
  const auto h = wire::fnv1a64(p->key);
  p->tag = store_.tag_of(h);
  p->cur_bucket = store_.bucket_addr(store_.bucket_of(h));
  p->tail_bucket = p->cur_bucket;
  Pending* raw = p.get();
  ctx.set_state(std::move(p));

  const auto bucket = static_cast<std::uint32_t>(
      (raw->cur_bucket - store_.config().table_base) / KvStore::kBucketStride);
  if (raw->op != wire::KvOp::kGet) {
    if (busy_[bucket]) {
      waiting_[bucket].push_back(ctx.request_id());
      return;
    }
    busy_[bucket] = true;
  }
  // Hash unit charges one APU action before the first table access.
  count_lines(*raw, raw->cur_bucket, KvStore::kBucketBytes);
  ctx.read(raw->cur_bucket, KvStore::kBucketBytes, kTagBucketRead, action_ns_);
}

void KvsApp::on_mem_complete(accel::RequestContext& ctx, std::uint64_t tag) {
  auto& p = *static_cast<Pending*>(ctx.state());
  switch (tag) {
    case kTagBucketRead:
      p.scan_idx = 0;
      continue_scan(ctx, p);
      break;
    case kTagPairRead:
      pair_loaded(ctx, p);
      break;
    case kTagPairWrite:
      if (p.op == wire::KvOp::kGet)
        throw std::logic_error("kvs: pair write completion on a GET");
      if (p.new_pair) {
        // Fresh insert: expose the entry only after the pair is written.
        const auto e = KvStore::pack_entry(p.tag, p.new_pair);
        store_.write_entry(p.claim_bucket, p.claim_idx, e);
        count_lines(p, p.claim_bucket + 8ull * p.claim_idx, 8);
        ctx.write_timed(p.claim_bucket + 8ull * p.claim_idx, 8, kTagEntryWrite);
      } else {
        finish(ctx, p, wire::Status::kOk);
      }
      break;
    case kTagEntryWrite:
      finish(ctx, p, wire::Status::kOk);
      break;
    default:
      throw std::logic_error("kvs: unknown completion tag");
  }
}

void KvsApp::continue_scan(accel::RequestContext& ctx, Pending& p) {
  while (p.scan_idx < KvStore::kBucketEntries) {
    const auto i = p.scan_idx++;
    const auto e = store_.read_entry(p.cur_bucket, i);
    if (e == 0) {
      if (!p.have_claim && p.op != wire::KvOp::kGet) {
        p.have_claim = true;
        p.claim_bucket = p.cur_bucket;
        p.claim_idx = i;
      }
      continue;
    }
    if (KvStore::entry_tag(e) != p.tag) continue;
    p.cand_pair = KvStore::entry_ptr(e);
    count_lines(p, p.cand_pair, store_.config().pair_slot_bytes);
    ctx.read(p.cand_pair, store_.config().pair_slot_bytes, kTagPairRead);
    return;
  }
  const auto overflow = store_.read_overflow(p.cur_bucket);
  if (overflow != 0) {
    p.tail_bucket = overflow;
    p.cur_bucket = overflow;
    count_lines(p, overflow, KvStore::kBucketBytes);
    ctx.read(overflow, KvStore::kBucketBytes, kTagBucketRead);
    return;
  }
  // Chain exhausted without a key match.
  switch (p.op) {
    case wire::KvOp::kGet:
    case wire::KvOp::kUpdate:
      finish(ctx, p, wire::Status::kNotFound);
      return;
    case wire::KvOp::kPut:
      if (p.have_claim) {
        p.new_pair = store_.slab_alloc();
        store_.write_pair(p.new_pair, p.key, p.value);
        count_lines(p, p.new_pair, store_.config().pair_slot_bytes);
        ctx.write_timed(p.new_pair, store_.config().pair_slot_bytes,
                        kTagPairWrite);
      } else {
        std::vector<std::uint8_t> args(4);
        const std::uint32_t want = KvStore::kBucketStride;
        std::memcpy(args.data(), &want, 4);
        ctx.cpu_call(accel::ServiceId::kAlloc, args);
      }
      return;
  }
}

void KvsApp::pair_loaded(accel::RequestContext& ctx, Pending& p) {
  if (!store_.pair_matches(p.cand_pair, p.key)) {
    continue_scan(ctx, p);  // 16-bit tag false positive: one extra pair read
    return;
  }
  switch (p.op) {
    case wire::KvOp::kGet:
      p.response_value = store_.pair_value(p.cand_pair);
      finish(ctx, p, wire::Status::kOk, p.response_value);
      return;
    case wire::KvOp::kPut:
    case wire::KvOp::kUpdate:
      store_.write_pair(p.cand_pair, p.key, p.value);
      count_lines(p, p.cand_pair, store_.config().pair_slot_bytes);
      p.new_pair = 0;  // in-place overwrite
      ctx.write_timed(p.cand_pair, store_.config().pair_slot_bytes,
                      kTagPairWrite);
      return;
  }
}

void KvsApp::on_cpu_reply(accel::RequestContext& ctx,
                          std::span<const std::uint8_t> body) {
  auto& p = *static_cast<Pending*>(ctx.state());
  wire::Reader r(body);
  const auto service = r.u8();
  if (service != static_cast<std::uint8_t>(accel::ServiceId::kAlloc))
    throw std::logic_error("kvs: unexpected cpu service reply");
  const auto fresh = r.u64();
  store_.write_overflow(p.tail_bucket, fresh);
  count_lines(p, p.tail_bucket + 64, 8);
  ctx.write_timed(p.tail_bucket + 64, 8);
  p.claim_bucket = fresh;
  p.claim_idx = 0;
  p.have_claim = true;
  p.new_pair = store_.slab_alloc();
  store_.write_pair(p.new_pair, p.key, p.value);
  count_lines(p, p.new_pair, store_.config().pair_slot_bytes);
  ctx.write_timed(p.new_pair, store_.config().pair_slot_bytes, kTagPairWrite);
}

void KvsApp::finish(accel::RequestContext& ctx, Pending& p, wire::Status st,
                    std::span<const std::uint8_t> value) {
  switch (p.op) {
    case wire::KvOp::kGet:
      ++get_ops_;
      get_lines_ += p.lines;
      break;
    case wire::KvOp::kPut:
      ++put_ops_;
      put_lines_ += p.lines;
      break;
    case wire::KvOp::kUpdate:
      ++update_ops_;
      update_lines_ += p.lines;
      break;
  }
  const bool mutator = p.op != wire::KvOp::kGet;
  const auto home = store_.bucket_of(wire::fnv1a64(p.key));
  ctx.respond(wire::encode_kv_response(st, value));
  if (mutator) {
    auto& q = waiting_[home];
    if (q.empty()) {
      busy_[home] = false;
    } else {
      const auto next_rid = q.front();
      q.pop_front();
      accel::RequestContext next_ctx(ctx.engine(), next_rid);
      auto& np = *static_cast<Pending*>(next_ctx.state());
      count_lines(np, np.cur_bucket, KvStore::kBucketBytes);
      next_ctx.read(np.cur_bucket, KvStore::kBucketBytes, kTagBucketRead,
                    action_ns_);
    }
  }
}

}  // namespace rambda::apps
