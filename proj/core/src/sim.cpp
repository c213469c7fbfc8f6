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

#include "rambda/sim.hpp"

#include <utility>

namespace rambda::sim {

namespace {

// SplitMix64 finalizer; full-period mixing of a 64-bit counter.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::string_view name)
    : key_(mix64(master_seed ^ mix64(fnv1a64(name)))) {}

std::uint64_t RngStream::next() {
  return mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ULL);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("RngStream: bound must be > 0");
  // Rejection to avoid modulo bias.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % bound;
}

double RngStream::next_unit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

Simulator::Simulator(std::uint64_t seed) : seed_(seed) {}

EventId Simulator::schedule(TimeNs delay, std::function<void()> fn) {
  if (delay > kTimeInfinity - now_)
    throw std::invalid_argument("schedule: delay overflows virtual time");
  const EventId id = next_id_++;
  queue_.push(Event{now_ + delay, id, std::move(fn)});
  return id;
}

CounterSet Simulator::run_until(TimeNs limit) {
  while (!queue_.empty() && queue_.top().at <= limit) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.at;
    ++events_executed_;
    try {
      ev.fn();
    } catch (const SimAbort&) {
      throw;
    } catch (const std::exception& e) {
      throw SimAbort(ev.id, ev.at, e.what());
    }
  }
  return counters_;
}

Simulator::StreamId Simulator::register_rng_stream(std::string_view name) {
  auto it = stream_ids_.find(name);
  if (it != stream_ids_.end()) return it->second;
  const StreamId id = static_cast<StreamId>(streams_.size());
  streams_.emplace_back(seed_, name);
  stream_ids_.emplace(std::string(name), id);
  return id;
}

std::uint64_t Simulator::rng_draw(StreamId id) {
  if (id >= streams_.size())
    throw std::out_of_range("rng_draw: unknown stream id " +
                            std::to_string(id));
  return streams_[id].next();
}

}  // namespace rambda::sim
