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

#include "rambda/apps/tx.hpp"

#include <algorithm>

namespace rambda::apps {

namespace {

constexpr std::uint64_t kTagLogFlush = 1;
constexpr std::uint64_t kTagMetaFlush = 2;
constexpr std::uint64_t kTagReadBase = 0x1000;
constexpr std::uint64_t kTagApplyBase = 0x2000;

}  // namespace

std::vector<std::vector<wire::TxTuple>> parse_log(
    std::span<const std::uint8_t> log_image) {
  if (log_image.size() < kLogMetaBytes)
    throw std::invalid_argument("tx log: image smaller than the meta block");
  std::uint64_t tail = 0;
  for (int i = 7; i >= 0; --i) tail = (tail << 8) | log_image[i];
  if (kLogMetaBytes + tail > log_image.size())
    throw std::runtime_error("tx log: persisted tail exceeds the region");

  std::vector<std::vector<wire::TxTuple>> entries;
  wire::Reader r(log_image.subspan(kLogMetaBytes, tail));
  while (!r.done()) {
    const auto tuple_count = r.u8();
    if (tuple_count == 0)
      throw std::runtime_error(
          "tx log: zero tuple_count inside the persisted range (corrupt log)");
    std::vector<wire::TxTuple> tuples;
    try {
      for (std::uint32_t i = 0; i < tuple_count; ++i) {
        wire::TxTuple t;
        t.len = r.u32();
        t.offset = r.u64();
        auto d = r.bytes(t.len);
        t.data.assign(d.begin(), d.end());
        tuples.push_back(std::move(t));
      }
    } catch (const std::out_of_range&) {
      throw std::runtime_error(
          "tx log: entry truncated inside the persisted range (corrupt log)");
    }
    entries.push_back(std::move(tuples));
  }
  return entries;
}

void replay_log(const std::vector<std::vector<wire::TxTuple>>& entries,
                std::span<std::uint8_t> data) {
  for (const auto& e : entries)
    for (const auto& t : e) {
      if (t.offset + t.len > data.size())
        throw std::runtime_error("tx log: replay write out of range");
      std::copy(t.data.begin(), t.data.end(), data.begin() + t.offset);
    }
}

struct TxApp::Pend : accel::RequestState {
  bool from_chain = false;
  std::uint64_t origin_rid = 0;
  std::vector<wire::TxTuple> writes;
  std::vector<std::uint64_t> read_offsets;
  std::vector<std::uint64_t> lock_order;  // ascending; precludes deadlock
  std::size_t acquired = 0;
  std::uint32_t reads_pending = 0;
  std::vector<std::vector<std::uint8_t>> read_values;
  std::vector<std::uint8_t> entry_bytes;
  std::uint64_t entry_addr = 0;
  std::uint32_t applies_pending = 0;
};

TxApp::TxApp(TxConfig cfg, mem::MemoryModel& mem) : cfg_(cfg), mem_(mem) {
  mem_.region_at(cfg_.data_base, cfg_.data_len);
  mem_.region_at(cfg_.log_base, cfg_.log_len);
}

TxApp::Pend& TxApp::pend(accel::RequestContext& ctx) {
  return *static_cast<Pend*>(ctx.state());
}

void TxApp::on_request(accel::RequestContext& ctx,
                       std::span<const std::uint8_t> payload) {
  wire::Reader r(payload);
  auto p = std::make_unique<Pend>();
  const auto op = static_cast<wire::TxOp>(r.u8());
  if (op == wire::TxOp::kChainForward) {
    p->from_chain = true;
    p->origin_rid = r.u64();
    auto txn = wire::decode_txn_request(r);
    p->writes = std::move(txn.writes);
  } else if (op == wire::TxOp::kTxn) {
    auto txn = wire::decode_txn_request(r);
    p->writes = std::move(txn.writes);
    p->read_offsets = std::move(txn.read_offsets);
  } else {
    throw std::invalid_argument("tx: pure reads bypass the APU via RDMA read");
  }
  for (const auto& w : p->writes) {
    if (w.offset + w.data.size() > cfg_.data_len)
      throw std::out_of_range("tx: write offset out of the data region");
    p->lock_order.push_back(w.offset);
  }
  for (auto off : p->read_offsets) {
    if (off + cfg_.read_size > cfg_.data_len)
      throw std::out_of_range("tx: read offset out of the data region");
    p->lock_order.push_back(off);
  }
  std::sort(p->lock_order.begin(), p->lock_order.end());
  p->lock_order.erase(
      std::unique(p->lock_order.begin(), p->lock_order.end()),
      p->lock_order.end());
  p->read_values.resize(p->read_offsets.size());
  ctx.set_state(std::move(p));
  try_acquire(ctx);
}

void TxApp::try_acquire(accel::RequestContext& ctx) {
  auto& p = pend(ctx);
  while (p.acquired < p.lock_order.size()) {
    auto& e = cc_[p.lock_order[p.acquired]];
    if (e.busy) {
      e.waiters.push_back(ctx.request_id());
      return;
    }
    e.busy = true;
    ++p.acquired;
  }
  locks_ready(ctx);
}

void TxApp::locks_ready(accel::RequestContext& ctx) {
  auto& p = pend(ctx);
  if (!p.read_offsets.empty()) {
    p.reads_pending = static_cast<std::uint32_t>(p.read_offsets.size());
    for (std::size_t i = 0; i < p.read_offsets.size(); ++i)
      ctx.read(cfg_.data_base + p.read_offsets[i], cfg_.read_size,
               kTagReadBase + i);
    return;
  }
  start_log_append(ctx);
}

void TxApp::start_log_append(accel::RequestContext& ctx) {
  if (log_busy_) {
    // Entries persist strictly in append order so the tail meta never
    // covers an earlier entry that is still in flight.
    log_waiters_.push_back(ctx.request_id());
    return;
  }
  log_busy_ = true;
  auto& p = pend(ctx);
  p.entry_bytes = wire::encode_log_entry(p.writes);
  if (kLogMetaBytes + log_tail_ + p.entry_bytes.size() > cfg_.log_len)
    throw std::runtime_error("tx: redo log ring exhausted for this run");
  p.entry_addr = cfg_.log_base + kLogMetaBytes + log_tail_;
  log_tail_ += p.entry_bytes.size();
  ctx.write(p.entry_addr, p.entry_bytes);
  ctx.flush(p.entry_addr, p.entry_bytes.size(), kTagLogFlush);
}

void TxApp::log_durable(accel::RequestContext& ctx) {
  // Entry is durable; advance and persist the tail meta word.
  std::uint8_t meta[8];
  for (int i = 0; i < 8; ++i)
    meta[i] = static_cast<std::uint8_t>(log_tail_ >> (8 * i));
  ctx.write(cfg_.log_base, meta);
  ctx.flush(cfg_.log_base, 8, kTagMetaFlush);
}

void TxApp::start_apply(accel::RequestContext& ctx) {
  auto& p = pend(ctx);
  log_busy_ = false;
  if (!log_waiters_.empty()) {
    const auto next = log_waiters_.front();
    log_waiters_.pop_front();
    accel::RequestContext nctx(ctx.engine(), next);
    start_log_append(nctx);
  }
  p.applies_pending = static_cast<std::uint32_t>(p.writes.size());
  for (std::size_t i = 0; i < p.writes.size(); ++i) {
    const auto& w = p.writes[i];
    ctx.write(cfg_.data_base + w.offset, w.data);
    ctx.flush(cfg_.data_base + w.offset, w.data.size(), kTagApplyBase + i);
  }
}

void TxApp::applied(accel::RequestContext& ctx) {
  auto& p = pend(ctx);
  if (!cfg_.tail && successor_) {
    std::vector<std::uint8_t> fwd;
    wire::put_u8(fwd, static_cast<std::uint8_t>(wire::TxOp::kChainForward));
    wire::put_u64(fwd, ctx.request_id());
    wire::put_bytes(fwd, wire::encode_log_entry(p.writes));
    // Reads were already served locally; only writes travel down the chain.
    std::vector<std::uint8_t> chain_req;
    chain_req = std::move(fwd);
    wire::put_u8(chain_req, 0);  // read_count: none
    if (successor_->try_post(chain_req) == ring::PostResult::kNoCredit)
      throw ring::ProtocolFault("tx: chain connection out of credits");
    return;  // commit on ack
  }
  local_commit(ctx);
}

void TxApp::on_resume(accel::RequestContext& ctx,
                      std::span<const std::uint8_t> body) {
  if (body.empty() || body[0] != 0)
    throw std::runtime_error("tx: successor reported failure");
  local_commit(ctx);
}

void TxApp::local_commit(accel::RequestContext& ctx) {
  auto& p = pend(ctx);
  ++committed_;
  release_locks(ctx);
  std::vector<std::uint8_t> resp;
  if (p.from_chain) {
    // Ack upstream: correlated by the origin's request id.
    wire::put_u64(resp, p.origin_rid);
    wire::put_u8(resp, 0);
  } else {
    wire::put_u8(resp, 0);
    wire::put_u8(resp, static_cast<std::uint8_t>(p.read_values.size()));
    for (const auto& v : p.read_values) {
      wire::put_u32(resp, static_cast<std::uint32_t>(v.size()));
      wire::put_bytes(resp, v);
    }
  }
  ctx.respond(resp);
}

void TxApp::release_locks(accel::RequestContext& ctx) {
  auto& p = pend(ctx);
  for (std::size_t i = 0; i < p.acquired; ++i) {
    auto& e = cc_[p.lock_order[i]];
    if (!e.waiters.empty()) {
      const auto next = e.waiters.front();
      e.waiters.pop_front();
      accel::RequestContext nctx(ctx.engine(), next);
      auto& np = pend(nctx);
      ++np.acquired;  // ownership hands off directly to the next waiter
      try_acquire(nctx);
    } else {
      e.busy = false;
    }
  }
  p.acquired = 0;
}

void TxApp::on_mem_complete(accel::RequestContext& ctx, std::uint64_t tag) {
  auto& p = pend(ctx);
  if (tag >= kTagReadBase && tag < kTagApplyBase) {
    const auto idx = tag - kTagReadBase;
    auto& v = p.read_values[idx];
    v.resize(cfg_.read_size);
    mem_.read_bytes(cfg_.data_base + p.read_offsets[idx], v);
    if (--p.reads_pending == 0) start_log_append(ctx);
    return;
  }
  if (tag == kTagLogFlush) {
    log_durable(ctx);
    return;
  }
  if (tag == kTagMetaFlush) {
    start_apply(ctx);
    return;
  }
  if (tag >= kTagApplyBase) {
    if (--p.applies_pending == 0) applied(ctx);
    return;
  }
  throw std::logic_error("tx: unknown completion tag");
}

}  // namespace rambda::apps
