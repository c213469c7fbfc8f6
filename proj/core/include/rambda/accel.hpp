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
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rambda/cpoll.hpp"
#include "rambda/mem.hpp"
#include "rambda/ring.hpp"
#include "rambda/rnic.hpp"
#include "rambda/sim.hpp"

namespace rambda::accel {

struct AccelConfig {
  std::uint32_t max_outstanding = 256;
  std::uint64_t apu_action_ns = 10;  // ~4 cycles of bookkeeping at 400 MHz
  std::uint64_t cq_poll_interval_ns = 1000;
  std::uint64_t doorbell_flush_ns = 20000;  // partial-batch doorbell timeout
  // Gather engine issue rate for bulk row fetches (bytes per ns through the
  // issue pipeline; 102.4 = one 256 B row per 400 MHz cycle).
  double gather_issue_bytes_per_ns = 102.4;
};

enum class ServiceId : std::uint8_t { kAlloc = 1, kPreprocess = 2, kCustom = 3 };

struct CpuServiceConfig {
  std::uint64_t alloc_ns = 200;
  std::uint64_t preprocess_ns = 400;
  std::uint64_t custom_ns = 500;
  std::uint64_t cpu_poll_interval_ns = 100;
};

class Engine;

/// Per-request application scratch; apps subclass and downcast.
struct RequestState {
  virtual ~RequestState() = default;
};

inline constexpr std::uint64_t kNoCompletion =
    std::numeric_limits<std::uint64_t>::max();

/// Facade handed to application callbacks; every operation is issued on
/// behalf of one in-flight request.
class RequestContext {
 public:
  RequestContext(Engine& engine, std::uint64_t request_id)
      : engine_(engine), request_id_(request_id) {}

  std::uint64_t request_id() const { return request_id_; }
  Engine& engine() { return engine_; }
  sim::Simulator& sim();
  mem::MemoryModel& memory();

  /// Timed memory read; on_mem_complete(tag) fires when it completes.
  /// extra_delay_ns postpones the issue (e.g. one action for hashing).
  void read(std::uint64_t addr, std::uint32_t size, std::uint64_t tag,
            sim::TimeNs extra_delay_ns = 0);
  /// Bulk row fetch serialized through the gather issue pipeline; shares the
  /// completion path with read().
  void gather_read(std::uint64_t addr, std::uint32_t size, std::uint64_t tag);
  /// Timed write (data lands immediately in the byte plane, the completion
  /// models store visibility). tag = kNoCompletion skips the callback.
  void write(std::uint64_t addr, std::span<const std::uint8_t> data,
             std::uint64_t tag = kNoCompletion);
  /// Timing-only write for bytes the data plane already holds.
  void write_timed(std::uint64_t addr, std::uint32_t size,
                   std::uint64_t tag = kNoCompletion);
  /// Persists dirty lines to media; completion fires when the last media
  /// write is durable.
  void flush(std::uint64_t addr, std::uint64_t len, std::uint64_t tag);
  void cpu_call(ServiceId service, std::span<const std::uint8_t> args);
  /// Fixed-latency pipelined unit (e.g. a fully-connected stage); fires
  /// on_mem_complete(tag) after ns without occupying the APU.
  void delay(sim::TimeNs ns, std::uint64_t tag);
  void respond(std::span<const std::uint8_t> payload);

  RequestState* state();
  void set_state(std::unique_ptr<RequestState> s);

 private:
  Engine& engine_;
  std::uint64_t request_id_;
};

/// The application processing unit's plug-in surface: a request parser /
/// FSM transition function / response builder triple, the only
/// application-specific part of the accelerator.
class Application {
 public:
  virtual ~Application() = default;
  virtual std::string_view name() const = 0;
  virtual void on_request(RequestContext& ctx,
                          std::span<const std::uint8_t> payload) = 0;
  virtual void on_mem_complete(RequestContext& ctx, std::uint64_t tag) = 0;
  virtual void on_cpu_reply(RequestContext& ctx,
                            std::span<const std::uint8_t> body) {}
  /// Chain acks and other correlated resume messages.
  virtual void on_resume(RequestContext& ctx,
                         std::span<const std::uint8_t> body) {}
};

/// Response-side RDMA SQ handler state for one connection: stages response
/// WQEs, rings one doorbell per batch, signals every k-th WQE, and flushes a
/// partial batch after an idle timeout.
class BatchedWqePoster {
 public:
  BatchedWqePoster(sim::Simulator& sim, rnic::QueuePair& qp, rnic::QpEnd end,
                   std::uint64_t response_base, std::uint32_t slot_size,
                   std::uint32_t capacity, std::uint32_t batch,
                   std::uint32_t signaled_interval, std::uint64_t flush_ns,
                   mem::Origin poster = mem::Origin::kAccel);

  /// Remote rings consumed by a peer accelerator also need the 4-byte
  /// pointer-entry write; it rides as a second WQE after each slot.
  void set_pointer_entry(std::uint64_t addr) {
    pointer_entry_addr_ = addr;
    has_pointer_entry_ = true;
  }

  void post_slot(std::uint64_t count, std::span<const std::uint8_t> image);
  void flush_now();
  std::uint64_t posted() const { return posted_; }

  ring::ServerEndpoint::SlotWriter writer();

 private:
  void arm_flush();

  sim::Simulator& sim_;
  rnic::QueuePair& qp_;
  rnic::QpEnd end_;
  std::uint64_t response_base_;
  std::uint32_t slot_size_;
  std::uint32_t mask_;
  std::uint32_t batch_;
  std::uint32_t signaled_interval_;
  std::uint64_t flush_ns_;
  mem::Origin poster_;
  std::uint64_t pointer_entry_addr_ = 0;
  bool has_pointer_entry_ = false;
  std::uint32_t staged_ = 0;
  std::uint64_t posted_ = 0;
  bool flush_armed_ = false;
};

/// The cc-accelerator framework: round-robin scheduler over cpoll signals,
/// ring tracker, table-based FSM over up to max_outstanding out-of-order
/// requests, the response SQ path, and the CPU co-processor invocation path.
class Engine {
 public:
  Engine(sim::Simulator& sim, mem::MemoryModel& mem, cpoll::CpollChecker& chk,
         AccelConfig cfg, std::string name);

  /// A request buffer the APU serves with `app`.
  void attach_app_buffer(std::uint32_t buffer_id, ring::ServerEndpoint* ep,
                         std::uint64_t request_ring_base, Application* app);
  /// A response/reply ring the engine consumes to resume waiting requests.
  /// Messages carry [request_id u64 LE | body]; kind routes the callback.
  enum class ResumeKind : std::uint8_t { kCpuReply, kChainAck };
  void attach_resume_buffer(std::uint32_t buffer_id, ring::ClientEndpoint* ep,
                            std::uint64_t ring_base, ResumeKind kind);
  /// Endpoint used by cpu_call posts (client of the CPU service host).
  void set_cpu_call_endpoint(ring::ClientEndpoint* ep);

  void add_cq(rnic::QueuePair* qp, rnic::QpEnd end);
  void start();

  void on_signal(const cpoll::CpollSignal& s);
  cpoll::RingTracker& tracker() { return tracker_; }

  /// Strict round-robin pick across buffers with pending work; nullopt when
  /// idle. Pure peek; dispatch uses the same order.
  std::optional<std::uint32_t> scheduler_next() const;

  std::uint32_t in_flight() const {
    return static_cast<std::uint32_t>(fsm_.size());
  }
  std::uint64_t dispatched() const { return dispatched_; }
  std::uint64_t retired() const { return retired_; }
  std::uint64_t responses() const { return responses_; }
  std::uint64_t served(std::uint32_t buffer_id) const;
  std::uint64_t cqes_drained() const { return cqes_drained_; }
  const AccelConfig& config() const { return cfg_; }
  const std::string& name() const { return name_; }
  sim::Simulator& sim() { return sim_; }
  mem::MemoryModel& memory() { return mem_; }

 private:
  friend class RequestContext;

  struct FsmEntry {
    std::uint64_t request_id;
    std::uint32_t buffer_id;
    std::uint64_t ring_count;  // request's slot count; responses pair to it
    Application* app;
    sim::TimeNs arrival;
    std::unique_ptr<RequestState> state;
  };
  struct Binding {
    ring::ServerEndpoint* server = nullptr;
    ring::ClientEndpoint* client = nullptr;
    std::uint64_t ring_base = 0;
    Application* app = nullptr;
    bool resume = false;
    ResumeKind resume_kind = ResumeKind::kCpuReply;
  };

  /// Serializes APU bookkeeping: each action occupies apu_action_ns.
  void schedule_action(std::function<void()> fn);
  void pump();
  void convert_signals();
  void do_dispatch(std::uint32_t buffer_id);
  void do_resume(std::uint32_t buffer_id);
  void complete_mem(std::uint64_t request_id, std::uint64_t tag);
  void respond_from(std::uint64_t request_id,
                    std::vector<std::uint8_t> payload);
  void retry_deferred_cpu_calls();
  void poll_cqs();
  FsmEntry& entry(std::uint64_t request_id);

  sim::Simulator& sim_;
  mem::MemoryModel& mem_;
  cpoll::CpollChecker& checker_;
  AccelConfig cfg_;
  std::string name_;

  std::map<std::uint32_t, Binding> bindings_;  // rr iterates in id order
  cpoll::RingTracker tracker_;
  std::set<std::uint32_t> signaled_;
  std::map<std::uint32_t, std::uint64_t> pending_;
  std::map<std::uint32_t, std::uint64_t> served_;
  mutable std::uint32_t rr_last_ = 0;
  bool rr_started_ = false;

  std::unordered_map<std::uint64_t, FsmEntry> fsm_;
  std::uint64_t next_request_id_ = 1;
  std::uint32_t reserved_ = 0;  // fsm_ plus dispatches already scheduled
  std::uint64_t dispatched_ = 0;
  std::uint64_t retired_ = 0;
  std::uint64_t responses_ = 0;

  sim::TimeNs busy_until_ = 0;
  mem::BandwidthChannel gather_issue_;

  ring::ClientEndpoint* cpu_call_ep_ = nullptr;
  std::deque<std::vector<std::uint8_t>> deferred_cpu_calls_;

  std::vector<std::pair<rnic::QueuePair*, rnic::QpEnd>> cqs_;
  bool cq_poll_armed_ = false;
  std::uint64_t cqes_drained_ = 0;
};

/// Simulated CPU core hosting accelerator-invoked services (alloc,
/// preprocessing, custom). Spin-polls the accel->cpu request ring, executes
/// calls serially per core, and posts replies on the cpoll-notified reply
/// ring. Calls complete in FIFO order per service.
class CpuServiceHost {
 public:
  using Handler = std::function<std::vector<std::uint8_t>(
      std::span<const std::uint8_t> args)>;

  CpuServiceHost(sim::Simulator& sim, mem::MemoryModel& mem,
                 CpuServiceConfig cfg, ring::ServerEndpoint* ep,
                 std::uint64_t request_ring_base, std::uint64_t ring_bytes);

  void register_service(ServiceId id, std::uint64_t latency_ns,
                        Handler handler);
  void register_default_services();  // alloc/preprocess latencies from cfg
  void start();

  std::uint64_t calls_served() const { return calls_; }
  sim::TimeNs busy_ns() const { return busy_accum_; }

  /// Bump allocator backing the alloc service; the pool region is CPU-managed.
  void set_alloc_pool(std::uint64_t base, std::uint64_t length,
                      std::uint32_t align = 64);

 private:
  void poll();
  void arm_poll();

  sim::Simulator& sim_;
  mem::MemoryModel& mem_;
  CpuServiceConfig cfg_;
  ring::ServerEndpoint* ep_;
  struct Service {
    std::uint64_t latency_ns;
    Handler handler;
  };
  std::map<std::uint8_t, Service> services_;
  sim::TimeNs core_busy_ = 0;
  sim::TimeNs busy_accum_ = 0;
  std::uint64_t calls_ = 0;
  bool poll_armed_ = false;
  std::uint64_t alloc_base_ = 0, alloc_len_ = 0, alloc_next_ = 0;
  std::uint32_t alloc_align_ = 64;
};

}  // namespace rambda::accel
