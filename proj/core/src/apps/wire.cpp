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

#include "rambda/apps/wire.hpp"

namespace rambda::wire {

std::vector<std::uint8_t> encode_kv_request(KvOp op,
                                            std::span<const std::uint8_t> key,
                                            std::span<const std::uint8_t> value) {
  std::vector<std::uint8_t> out;
  put_u8(out, static_cast<std::uint8_t>(op));
  put_u16(out, static_cast<std::uint16_t>(key.size()));
  put_bytes(out, key);
  if (op != KvOp::kGet) {
    put_u16(out, static_cast<std::uint16_t>(value.size()));
    put_bytes(out, value);
  }
  return out;
}

std::vector<std::uint8_t> encode_kv_response(Status st,
                                             std::span<const std::uint8_t> value) {
  std::vector<std::uint8_t> out;
  put_u8(out, static_cast<std::uint8_t>(st));
  put_u16(out, static_cast<std::uint16_t>(value.size()));
  put_bytes(out, value);
  return out;
}

std::vector<std::uint8_t> encode_txn_request(const TxnRequest& t) {
  if (t.writes.empty())
    throw std::invalid_argument("txn encode: tuple_count must be >= 1");
  std::vector<std::uint8_t> out;
  put_u8(out, static_cast<std::uint8_t>(TxOp::kTxn));
  put_u8(out, static_cast<std::uint8_t>(t.writes.size()));
  for (const auto& w : t.writes) {
    put_u32(out, static_cast<std::uint32_t>(w.data.size()));
    put_u64(out, w.offset);
    put_bytes(out, w.data);
  }
  put_u8(out, static_cast<std::uint8_t>(t.read_offsets.size()));
  for (auto off : t.read_offsets) put_u64(out, off);
  return out;
}

TxnRequest decode_txn_request(Reader& r) {
  TxnRequest t;
  const auto tuples = r.u8();
  if (tuples == 0)
    throw std::invalid_argument("txn decode: tuple_count is 0");
  for (std::uint32_t i = 0; i < tuples; ++i) {
    TxTuple w;
    w.len = r.u32();
    w.offset = r.u64();
    auto d = r.bytes(w.len);
    w.data.assign(d.begin(), d.end());
    t.writes.push_back(std::move(w));
  }
  const auto reads = r.u8();
  for (std::uint32_t i = 0; i < reads; ++i) t.read_offsets.push_back(r.u64());
  return t;
}

std::vector<std::uint8_t> encode_log_entry(const std::vector<TxTuple>& tuples) {
  if (tuples.empty() || tuples.size() > 255)
    throw std::invalid_argument("log entry: tuple_count must be in [1,255]");
  std::vector<std::uint8_t> out;
  put_u8(out, static_cast<std::uint8_t>(tuples.size()));
  for (const auto& w : tuples) {
    put_u32(out, static_cast<std::uint32_t>(w.data.size()));
    put_u64(out, w.offset);
    put_bytes(out, w.data);
  }
  return out;
}

std::vector<std::uint8_t> encode_dlrm_request(const DlrmQuery& q) {
  std::vector<std::uint8_t> out;
  put_u8(out, 1);  // opcode: embedding reduction query
  put_u8(out, static_cast<std::uint8_t>(q.table_indices.size()));
  for (const auto& idx : q.table_indices) {
    put_u16(out, static_cast<std::uint16_t>(idx.size()));
    for (auto i : idx) put_u32(out, i);
  }
  put_u8(out, static_cast<std::uint8_t>(q.op));
  return out;
}

DlrmQuery decode_dlrm_request(Reader& r) {
  DlrmQuery q;
  const auto opcode = r.u8();
  if (opcode != 1)
    throw std::invalid_argument("dlrm decode: unknown opcode " +
                                std::to_string(opcode));
  const auto tables = r.u8();
  q.table_indices.resize(tables);
  for (std::uint32_t t = 0; t < tables; ++t) {
    const auto n = r.u16();
    q.table_indices[t].reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) q.table_indices[t].push_back(r.u32());
  }
  q.op = static_cast<AggregateOp>(r.u8());
  if (q.op < AggregateOp::kSum || q.op > AggregateOp::kInnerProduct)
    throw std::invalid_argument("dlrm decode: unknown aggregate op");
  return q;
}

}  // namespace rambda::wire
