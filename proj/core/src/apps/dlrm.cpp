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

#include "rambda/apps/dlrm.hpp"

#include <cstring>
#include <map>

namespace rambda::apps {

namespace {
constexpr std::uint64_t kTagRowBase = 0x100;
constexpr std::uint64_t kTagFcDone = 1;
}  // namespace

void init_embedding_tables(mem::MemoryModel& mem, const DlrmConfig& cfg,
                           std::uint64_t seed) {
  sim::RngStream rng(seed, "dlrm.tables");
  const auto total = cfg.total_bytes();
  std::vector<std::uint8_t> buf(total);
  for (std::uint64_t i = 0; i < total / 4; ++i) {
    const float v = static_cast<float>(rng.next_unit()) * 2.0f - 1.0f;
    std::memcpy(buf.data() + i * 4, &v, 4);
  }
  mem.write_bytes(cfg.table_base, buf);
}

struct DlrmApp::Pend : accel::RequestState {
  wire::DlrmQuery query;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> rows;  // (table, index)
  std::uint32_t next_issue = 0;
  std::uint32_t cursor = 0;  // rows folded so far, in query order
  std::uint32_t outstanding = 0;
  std::map<std::uint32_t, std::vector<float>> ready;  // reorder window
  std::vector<std::vector<float>> accum;              // per table
  std::vector<bool> table_started;
};

DlrmApp::DlrmApp(DlrmConfig cfg, mem::MemoryModel& mem)
    : cfg_(cfg), mem_(mem) {
  mem_.region_at(cfg_.table_base, cfg_.total_bytes());
}

void DlrmApp::on_request(accel::RequestContext& ctx,
                         std::span<const std::uint8_t> payload) {
  // Parsing and transforming the raw request is irregular, branch-rich work;
  // it runs on the CPU co-processor.
  ctx.cpu_call(accel::ServiceId::kPreprocess, payload);
}

void DlrmApp::on_cpu_reply(accel::RequestContext& ctx,
                           std::span<const std::uint8_t> body) {
  wire::Reader r(body);
  const auto service = r.u8();
  if (service != static_cast<std::uint8_t>(accel::ServiceId::kPreprocess))
    throw std::logic_error("dlrm: unexpected cpu service reply");
  wire::Reader q(body.subspan(1));
  auto p = std::make_unique<Pend>();
  p->query = wire::decode_dlrm_request(q);
  for (std::uint32_t t = 0; t < p->query.table_indices.size(); ++t)
    for (auto idx : p->query.table_indices[t]) {
      if (idx >= cfg_.rows_per_table)
        throw std::out_of_range("dlrm: embedding index out of range");
      p->rows.emplace_back(t, idx);
    }
  p->accum.assign(p->query.table_indices.size(),
                  std::vector<float>(cfg_.dim, 0.0f));
  p->table_started.assign(p->query.table_indices.size(), false);
  Pend* raw = p.get();
  ctx.set_state(std::move(p));
  if (raw->rows.empty()) {
    ctx.delay(cfg_.fc_latency_ns, kTagFcDone);
    return;
  }
  issue_more(ctx, *raw);
}

void DlrmApp::issue_more(accel::RequestContext& ctx, Pend& p) {
  while (p.outstanding < cfg_.max_outstanding_rows &&
         p.next_issue < p.rows.size()) {
    const auto pos = p.next_issue++;
    const auto [table, idx] = p.rows[pos];
    ++p.outstanding;
    peak_outstanding_ = std::max(peak_outstanding_, p.outstanding);
    ctx.gather_read(cfg_.row_addr(table, idx), cfg_.row_bytes(),
                    kTagRowBase + pos);
  }
}

void DlrmApp::fold_ready_rows(accel::RequestContext& ctx, Pend& p) {
  while (true) {
    auto it = p.ready.find(p.cursor);
    if (it == p.ready.end()) break;
    // Fixed accumulation order: rows fold in query order per table, so
    // float results are bit-exact against the sequential oracle.
    const auto [table, idx] = p.rows[p.cursor];
    auto& acc = p.accum[table];
    const auto& row = it->second;
    if (!p.table_started[table]) {
      acc = row;
      p.table_started[table] = true;
    } else {
      switch (p.query.op) {
        case wire::AggregateOp::kSum:
          for (std::uint32_t d = 0; d < cfg_.dim; ++d) acc[d] += row[d];
          break;
        case wire::AggregateOp::kMax:
          for (std::uint32_t d = 0; d < cfg_.dim; ++d)
            acc[d] = std::max(acc[d], row[d]);
          break;
        case wire::AggregateOp::kMin:
          for (std::uint32_t d = 0; d < cfg_.dim; ++d)
            acc[d] = std::min(acc[d], row[d]);
          break;
        case wire::AggregateOp::kInnerProduct:
          for (std::uint32_t d = 0; d < cfg_.dim; ++d) acc[d] *= row[d];
          break;
      }
    }
    p.ready.erase(it);
    ++p.cursor;
  }
  if (p.cursor == p.rows.size()) {
    ctx.delay(cfg_.fc_latency_ns, kTagFcDone);
    return;
  }
  issue_more(ctx, p);
}

void DlrmApp::on_mem_complete(accel::RequestContext& ctx, std::uint64_t tag) {
  auto& p = *static_cast<Pend*>(ctx.state());
  if (tag == kTagFcDone) {
    std::vector<std::uint8_t> resp;
    wire::put_u8(resp, 0);
    wire::put_u8(resp, static_cast<std::uint8_t>(p.accum.size()));
    for (const auto& acc : p.accum)
      for (auto v : acc) wire::put_f32(resp, v);
    ++queries_;
    ctx.respond(resp);
    return;
  }
  const auto pos = static_cast<std::uint32_t>(tag - kTagRowBase);
  const auto [table, idx] = p.rows[pos];
  std::vector<float> row(cfg_.dim);
  std::vector<std::uint8_t> raw(cfg_.row_bytes());
  mem_.read_bytes(cfg_.row_addr(table, idx), raw);
  std::memcpy(row.data(), raw.data(), raw.size());
  p.ready.emplace(pos, std::move(row));
  --p.outstanding;
  fold_ready_rows(ctx, p);
}

}  // namespace rambda::apps
