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
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rambda::wire {

// All request/response schemas are little-endian on the wire.

inline void put_u8(std::vector<std::uint8_t>& v, std::uint8_t x) {
  v.push_back(x);
}
inline void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& v, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) v.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}
inline void put_f32(std::vector<std::uint8_t>& v, float x) {
  std::uint32_t bits;
  std::memcpy(&bits, &x, 4);
  put_u32(v, bits);
}
inline void put_bytes(std::vector<std::uint8_t>& v,
                      std::span<const std::uint8_t> b) {
  v.insert(v.end(), b.begin(), b.end());
}

/// Bounds-checked cursor over a received message.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto p = take(2);
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
  }
  std::uint32_t u32() {
    auto p = take(4);
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 |
           static_cast<std::uint32_t>(p[3]) << 24;
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    return lo | static_cast<std::uint64_t>(u32()) << 32;
  }
  float f32() {
    const auto bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) { return take(n); }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > data_.size())
      throw std::out_of_range("wire: truncated message (need " +
                              std::to_string(n) + " bytes, have " +
                              std::to_string(data_.size() - pos_) + ")");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// --- KVS -------------------------------------------------------------------

enum class KvOp : std::uint8_t { kGet = 1, kPut = 2, kUpdate = 3 };
enum class Status : std::uint8_t { kOk = 0, kNotFound = 1, kError = 2 };

// opcode 1B | key_len 2B | key | (value_len 2B | value)
std::vector<std::uint8_t> encode_kv_request(KvOp op,
                                            std::span<const std::uint8_t> key,
                                            std::span<const std::uint8_t> value = {});
std::vector<std::uint8_t> encode_kv_response(Status st,
                                             std::span<const std::uint8_t> value = {});

// --- TX --------------------------------------------------------------------

enum class TxOp : std::uint8_t { kTxn = 1, kPureRead = 2, kChainForward = 3 };

struct TxTuple {
  std::uint32_t len = 0;
  std::uint64_t offset = 0;
  std::vector<std::uint8_t> data;
};

struct TxnRequest {
  std::vector<TxTuple> writes;
  std::vector<std::uint64_t> read_offsets;
};

// opcode 1B | tuple_count 1B | tuples (len 4B | offset 8B | data) |
// read_count 1B | read offsets 8B each
std::vector<std::uint8_t> encode_txn_request(const TxnRequest& t);
TxnRequest decode_txn_request(Reader& r);
// Log-entry body: tuple_count 1B | tuples, shared with the NVM redo log.
std::vector<std::uint8_t> encode_log_entry(const std::vector<TxTuple>& tuples);

// --- DLRM ------------------------------------------------------------------

enum class AggregateOp : std::uint8_t {
  kSum = 1,
  kMax = 2,
  kMin = 3,
  kInnerProduct = 4
};

struct DlrmQuery {
  std::vector<std::vector<std::uint32_t>> table_indices;
  AggregateOp op = AggregateOp::kSum;
};

// opcode 1B | table_count 1B | per table (index_count 2B | 4B indices) | op 1B
std::vector<std::uint8_t> encode_dlrm_request(const DlrmQuery& q);
DlrmQuery decode_dlrm_request(Reader& r);

}  // namespace rambda::wire
