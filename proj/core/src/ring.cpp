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

#include "rambda/ring.hpp"

#include <bit>
#include <cstring>
#include <memory>

namespace rambda::ring {

namespace {

void store_le32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

std::uint32_t load_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

void SlotLayout::encode(std::span<std::uint8_t> slot,
                        std::span<const std::uint8_t> payload) {
  if (payload.size() > max_payload(static_cast<std::uint32_t>(slot.size())))
    throw std::invalid_argument("slot encode: payload exceeds slot capacity");
  std::memset(slot.data(), 0, slot.size());
  store_le32(slot.data(), static_cast<std::uint32_t>(payload.size()));
  std::memcpy(slot.data() + kHeader, payload.data(), payload.size());
  slot[slot.size() - 1] = 1;
}

std::uint32_t SlotLayout::length_of(std::span<const std::uint8_t> slot) {
  return load_le32(slot.data());
}

SpscRing::SpscRing(std::uint8_t* base, std::uint32_t capacity,
                   std::uint32_t slot_size)
    : base_(base), capacity_(capacity), slot_size_(slot_size),
      mask_(capacity - 1) {
  if (capacity == 0 || !std::has_single_bit(capacity))
    throw std::invalid_argument("ring capacity must be a power of two");
  if (slot_size < SlotLayout::kMinSlot)
    throw std::invalid_argument("ring slot_size too small");
}

bool SpscRing::try_produce(std::span<const std::uint8_t> payload) {
  if (payload.size() > max_payload())
    throw std::invalid_argument("try_produce: oversized payload");
  std::uint8_t* slot = slot_ptr(produced_);
  std::atomic_ref<std::uint8_t> valid(slot[slot_size_ - 1]);
  if (valid.load(std::memory_order_acquire) != 0) return false;
  store_le32(slot, static_cast<std::uint32_t>(payload.size()));
  if (!payload.empty())
    std::memcpy(slot + SlotLayout::kHeader, payload.data(), payload.size());
  valid.store(1, std::memory_order_release);
  ++produced_;
  return true;
}

std::optional<std::vector<std::uint8_t>> SpscRing::try_consume() {
  std::uint8_t* slot = slot_ptr(consumed_);
  std::atomic_ref<std::uint8_t> valid(slot[slot_size_ - 1]);
  if (valid.load(std::memory_order_acquire) == 0) return std::nullopt;
  const std::uint32_t len = load_le32(slot);
  if (len > max_payload())
    throw ProtocolFault("try_consume: corrupted slot, len " +
                        std::to_string(len) + " exceeds payload capacity");
  std::vector<std::uint8_t> out(len);
  if (len) std::memcpy(out.data(), slot + SlotLayout::kHeader, len);
  // Zero everything but the valid byte first, then release it so the
  // producer never observes a half-reset slot.
  std::memset(slot, 0, slot_size_ - 1);
  valid.store(0, std::memory_order_release);
  ++consumed_;
  return out;
}

ClientEndpoint::ClientEndpoint(PairConfig cfg, std::uint8_t* response_base,
                               SlotWriter request_writer)
    : cfg_(cfg),
      credits_(cfg.capacity),
      response_ring_(response_base, cfg.capacity, cfg.slot_size),
      write_request_(std::move(request_writer)),
      scratch_(cfg.slot_size) {}

PostResult ClientEndpoint::try_post(std::span<const std::uint8_t> payload) {
  if (payload.size() > SlotLayout::max_payload(cfg_.slot_size))
    throw std::invalid_argument("try_post: oversized payload");
  if (!credits_.available()) return PostResult::kNoCredit;
  SlotLayout::encode(scratch_, payload);
  const std::uint64_t count = credits_.on_post();
  write_request_(count, scratch_);
  return PostResult::kPosted;
}

std::optional<std::vector<std::uint8_t>>
ClientEndpoint::try_consume_response() {
  auto msg = response_ring_.try_consume();
  if (msg) credits_.on_response();
  return msg;
}

ServerEndpoint::ServerEndpoint(PairConfig cfg, std::uint8_t* request_base,
                               SlotWriter response_writer)
    : cfg_(cfg),
      credits_(cfg.capacity),
      request_ring_(request_base, cfg.capacity, cfg.slot_size),
      write_response_(std::move(response_writer)),
      scratch_(cfg.slot_size) {}

std::optional<std::vector<std::uint8_t>>
ServerEndpoint::try_consume_request() {
  return request_ring_.try_consume();
}

PostResult ServerEndpoint::try_post_response(
    std::uint64_t request_count, std::span<const std::uint8_t> payload) {
  if (payload.size() > SlotLayout::max_payload(cfg_.slot_size))
    throw std::invalid_argument("try_post_response: oversized payload");
  // Symmetric scheme: response tail must stay within a window of consumed
  // requests. One response per request keeps this from ever blocking.
  if (credits_.posted() >= request_ring_.consumed() + cfg_.capacity)
    return PostResult::kNoCredit;
  SlotLayout::encode(scratch_, payload);
  const auto count = credits_.on_post();
  write_response_(cfg_.slot_paired_responses ? request_count : count,
                  scratch_);
  return PostResult::kPosted;
}

Pair create_pair(mem::MemoryModel& server_mem, std::uint64_t request_base,
                 mem::MemoryModel& client_mem, std::uint64_t response_base,
                 PairConfig cfg) {
  if (cfg.capacity == 0 || !std::has_single_bit(cfg.capacity))
    throw std::invalid_argument("create_pair: capacity must be a power of two");
  const std::uint64_t bytes =
      static_cast<std::uint64_t>(cfg.capacity) * cfg.slot_size;
  // Validates registration; throws when the rings fall outside a region.
  server_mem.region_at(request_base, bytes);
  client_mem.region_at(response_base, bytes);

  Pair pair;
  pair.request_base = request_base;
  pair.response_base = response_base;
  pair.client = std::make_unique<ClientEndpoint>(
      cfg, client_mem.raw(response_base, bytes),
      [&server_mem, request_base, cfg](std::uint64_t count,
                                       std::span<const std::uint8_t> image) {
        const auto idx = count & (cfg.capacity - 1);
        server_mem.write_bytes(request_base + idx * cfg.slot_size, image);
      });
  pair.server = std::make_unique<ServerEndpoint>(
      cfg, server_mem.raw(request_base, bytes),
      [&client_mem, response_base, cfg](std::uint64_t count,
                                        std::span<const std::uint8_t> image) {
        const auto idx = count & (cfg.capacity - 1);
        client_mem.write_bytes(response_base + idx * cfg.slot_size, image);
      });
  return pair;
}

}  // namespace rambda::ring
