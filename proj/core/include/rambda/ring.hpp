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

#include <atomic>
#include <memory>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rambda/mem.hpp"

namespace rambda::ring {

/// Slot wire layout, shared bit-exact by the RDMA and coherent-store paths:
///   offset 0            : payload length, u32 little-endian
///   offset 4 .. 4+len   : payload bytes
///   offset slot_size-1  : valid byte (0 = empty, 1 = full), written last
struct SlotLayout {
  static constexpr std::uint32_t kHeader = 4;
  static constexpr std::uint32_t kTrailer = 1;
  static constexpr std::uint32_t kMinSlot = 16;

  static std::uint32_t max_payload(std::uint32_t slot_size) {
    return slot_size - kHeader - kTrailer;
  }
  /// Renders a full slot image (len | payload | zero pad | valid=1).
  static void encode(std::span<std::uint8_t> slot,
                     std::span<const std::uint8_t> payload);
  /// Length field of an encoded slot.
  static std::uint32_t length_of(std::span<const std::uint8_t> slot);
};

class ProtocolFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PostResult : std::uint8_t { kPosted, kNoCredit };

/// Fixed-slot SPSC message ring over raw bytes. The same code runs inside the
/// simulator (over memory-model backing) and across two real threads in the
/// stress harness; the valid byte is accessed with acquire/release atomics so
/// a consumer that sees valid=1 sees the complete payload.
class SpscRing {
 public:
  SpscRing(std::uint8_t* base, std::uint32_t capacity, std::uint32_t slot_size);

  /// Producer side. Returns false when the target slot is still occupied
  /// (ring full). Payloads longer than max_payload throw.
  bool try_produce(std::span<const std::uint8_t> payload);

  /// Consumer side. Copies the payload out, zeroes the whole slot, advances.
  std::optional<std::vector<std::uint8_t>> try_consume();

  std::uint64_t produced() const { return produced_; }
  std::uint64_t consumed() const { return consumed_; }
  std::uint32_t capacity() const { return capacity_; }
  std::uint32_t slot_size() const { return slot_size_; }
  std::uint32_t max_payload() const { return SlotLayout::max_payload(slot_size_); }

  std::uint8_t* slot_ptr(std::uint64_t count) const {
    return base_ + (count & mask_) * slot_size_;
  }
  /// Monotonic consumer count needed by simulator-side wiring that lands
  /// messages via one-sided writes rather than try_produce.
  void note_remote_produce() { ++produced_; }

 private:
  std::uint8_t* base_;
  std::uint32_t capacity_;
  std::uint32_t slot_size_;
  std::uint32_t mask_;
  std::uint64_t produced_ = 0;  // owned by producer
  std::uint64_t consumed_ = 0;  // owned by consumer
};

/// Client-side credit ledger: monotonic posted-request and consumed-response
/// counts; the window equals the ring capacity.
class CreditState {
 public:
  explicit CreditState(std::uint32_t window) : window_(window) {}
  bool available() const { return req_tail_ - resp_head_ < window_; }
  std::uint32_t credits() const {
    return window_ - static_cast<std::uint32_t>(req_tail_ - resp_head_);
  }
  std::uint64_t on_post() { return req_tail_++; }
  void on_response() {
    if (resp_head_ == req_tail_)
      throw ProtocolFault("credit: response without outstanding request");
    ++resp_head_;
  }
  std::uint64_t posted() const { return req_tail_; }

 private:
  std::uint32_t window_;
  std::uint64_t req_tail_ = 0;
  std::uint64_t resp_head_ = 0;
};

struct PairConfig {
  std::uint32_t capacity = 1024;
  std::uint32_t slot_size = 64;
  // Client-polled connections pair response slots positionally with their
  // request; accelerator-consumed rings post sequentially instead (messages
  // carry their own correlation id and the ring tracker needs contiguity).
  bool slot_paired_responses = true;
};

/// Client endpoint of a connection: posts requests through a transport seam
/// (direct store or staged RDMA write) and consumes responses locally.
class ClientEndpoint {
 public:
  /// Writes one encoded slot image. `count` is the monotonic message count
  /// (slot index = count mod capacity); the pointer-buffer path also derives
  /// its 4-byte entry value from it.
  using SlotWriter =
      std::function<void(std::uint64_t count,
                         std::span<const std::uint8_t> slot_image)>;

  ClientEndpoint(PairConfig cfg, std::uint8_t* response_base,
                 SlotWriter request_writer);

  PostResult try_post(std::span<const std::uint8_t> payload);
  std::optional<std::vector<std::uint8_t>> try_consume_response();
  std::uint32_t credits() const { return credits_.credits(); }
  std::uint64_t posted() const { return credits_.posted(); }
  const PairConfig& config() const { return cfg_; }

 private:
  PairConfig cfg_;
  CreditState credits_;
  SpscRing response_ring_;
  SlotWriter write_request_;
  std::vector<std::uint8_t> scratch_;
};

/// Server endpoint: consumes requests locally, posts responses through the
/// transport seam. Credit tracking mirrors the client (request head vs
/// response tail).
class ServerEndpoint {
 public:
  using SlotWriter = ClientEndpoint::SlotWriter;

  ServerEndpoint(PairConfig cfg, std::uint8_t* request_base,
                 SlotWriter response_writer);

  std::optional<std::vector<std::uint8_t>> try_consume_request();
  /// Responses are slot-paired with their request (response for the request
  /// consumed at count i lands in response slot i mod capacity), so
  /// out-of-order completion correlates positionally.
  PostResult try_post_response(std::uint64_t request_count,
                               std::span<const std::uint8_t> payload);
  std::uint32_t response_credits() const { return credits_.credits(); }
  std::uint64_t consumed() const { return request_ring_.consumed(); }
  const PairConfig& config() const { return cfg_; }
  SpscRing& request_ring() { return request_ring_; }

 private:
  PairConfig cfg_;
  CreditState credits_;  // resp_tail vs req_head, symmetric scheme
  SpscRing request_ring_;
  SlotWriter write_response_;
  std::vector<std::uint8_t> scratch_;
};

struct Pair {
  std::unique_ptr<ClientEndpoint> client;
  std::unique_ptr<ServerEndpoint> server;
  std::uint64_t request_base = 0;   // in server memory
  std::uint64_t response_base = 0;  // in client memory
};

/// Builds an intra-machine pair: the request ring lives in server memory, the
/// response ring in client memory, and posts are direct coherent stores into
/// the peer's region (write observers fire for cpoll).
Pair create_pair(mem::MemoryModel& server_mem, std::uint64_t request_base,
                 mem::MemoryModel& client_mem, std::uint64_t response_base,
                 PairConfig cfg);

}  // namespace rambda::ring
