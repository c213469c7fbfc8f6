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
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rambda::sim {

using TimeNs = std::uint64_t;
using EventId = std::uint64_t;

inline constexpr TimeNs kTimeInfinity = std::numeric_limits<TimeNs>::max();

/// Raised when an event callback throws; carries the event id and fire time.
class SimAbort : public std::runtime_error {
 public:
  SimAbort(EventId id, TimeNs at, const std::string& what)
      : std::runtime_error("event " + std::to_string(id) + " at t=" +
                           std::to_string(at) + "ns: " + what),
        event_id(id),
        fire_time(at) {}
  EventId event_id;
  TimeNs fire_time;
};

/// Named monotonic 64-bit counters. Values never decrease during a run.
class CounterSet {
 public:
  void add(const std::string& name, std::uint64_t delta) {
    values_[name] += delta;
  }
  std::uint64_t get(const std::string& name) const {
    auto it = values_.find(name);
    return it == values_.end() ? 0 : it->second;
  }
  /// Copies every counter of `other` into this set under `prefix + name`.
  void merge_prefixed(const std::string& prefix, const CounterSet& other) {
    for (const auto& [k, v] : other.values_) values_[prefix + k] += v;
  }
  const std::map<std::string, std::uint64_t>& values() const { return values_; }
  bool operator==(const CounterSet&) const = default;

 private:
  std::map<std::string, std::uint64_t> values_;
};

/// Counter-based splittable generator: draw n of stream s is a pure function
/// of (master seed, stream name, n), so streams are order-independent.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t master_seed, std::string_view name);

  std::uint64_t next();
  /// Uniform in [0, bound) without modulo bias.
  std::uint64_t next_below(std::uint64_t bound);
  /// Uniform double in [0, 1).
  double next_unit();

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Deterministic discrete-event engine: virtual nanosecond clock, an event
/// queue ordered by (fire_time, event id), seeded named RNG streams, and the
/// global counter set experiments report from.
class Simulator {
 public:
  using StreamId = std::uint32_t;

  explicit Simulator(std::uint64_t seed);

  TimeNs now() const { return now_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t events_executed() const { return events_executed_; }

  /// Enqueues a callback at now() + delay. Ties fire in scheduling order.
  EventId schedule(TimeNs delay, std::function<void()> fn);

  /// Executes every event with fire_time <= limit in (time, id) order.
  /// Events beyond the limit stay pending and a later run resumes them.
  /// Returns a snapshot of the counters.
  CounterSet run_until(TimeNs limit);
  CounterSet run() { return run_until(kTimeInfinity); }

  bool has_pending() const { return !queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }

  CounterSet& counters() { return counters_; }
  const CounterSet& counters() const { return counters_; }

  StreamId register_rng_stream(std::string_view name);
  std::uint64_t rng_draw(StreamId id);
  /// Detached stream derived from the master seed; draws do not interact
  /// with registered streams.
  RngStream stream(std::string_view name) const {
    return RngStream(seed_, name);
  }

 private:
  struct Event {
    TimeNs at;
    EventId id;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.id > b.id;
    }
  };

  std::uint64_t seed_;
  TimeNs now_ = 0;
  EventId next_id_ = 0;
  std::uint64_t events_executed_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  CounterSet counters_;
  std::vector<RngStream> streams_;
  std::map<std::string, StreamId, std::less<>> stream_ids_;
};

}  // namespace rambda::sim
