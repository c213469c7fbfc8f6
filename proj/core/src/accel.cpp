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

#include "rambda/accel.hpp"

#include <cstring>

namespace rambda::accel {

namespace {

std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void store_le64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

// ---------------------------------------------------------------------------
// RequestContext

sim::Simulator& RequestContext::sim() { return engine_.sim_; }
mem::MemoryModel& RequestContext::memory() { return engine_.mem_; }

void RequestContext::read(std::uint64_t addr, std::uint32_t size,
                          std::uint64_t tag, sim::TimeNs extra_delay_ns) {
  Engine* e = &engine_;
  const auto rid = request_id_;
  auto issue = [e, addr, size, tag, rid] {
    const auto lat = e->mem_.access(mem::AccessRequest{
        addr, size, mem::AccessOp::kRead, mem::Origin::kAccel, false});
    e->sim_.schedule(lat, [e, rid, tag] { e->complete_mem(rid, tag); });
  };
  if (extra_delay_ns == 0)
    issue();
  else
    engine_.sim_.schedule(extra_delay_ns, std::move(issue));
}

void RequestContext::gather_read(std::uint64_t addr, std::uint32_t size,
                                 std::uint64_t tag) {
  Engine* e = &engine_;
  const auto rid = request_id_;
  const auto now = engine_.sim_.now();
  const auto issue_at = engine_.gather_issue_.acquire(now, size);
  engine_.sim_.schedule(issue_at - now, [e, addr, size, tag, rid] {
    const auto lat = e->mem_.access(mem::AccessRequest{
        addr, size, mem::AccessOp::kRead, mem::Origin::kAccel, false});
    e->sim_.schedule(lat, [e, rid, tag] { e->complete_mem(rid, tag); });
  });
}

void RequestContext::write(std::uint64_t addr,
                           std::span<const std::uint8_t> data,
                           std::uint64_t tag) {
  engine_.mem_.write_bytes(addr, data);
  const auto lat = engine_.mem_.access(mem::AccessRequest{
      addr, static_cast<std::uint32_t>(data.size()), mem::AccessOp::kWrite,
      mem::Origin::kAccel, false});
  if (tag == kNoCompletion) return;
  Engine* e = &engine_;
  const auto rid = request_id_;
  engine_.sim_.schedule(lat, [e, rid, tag] { e->complete_mem(rid, tag); });
}

void RequestContext::write_timed(std::uint64_t addr, std::uint32_t size,
                                 std::uint64_t tag) {
  const auto lat = engine_.mem_.access(mem::AccessRequest{
      addr, size, mem::AccessOp::kWrite, mem::Origin::kAccel, false});
  if (tag == kNoCompletion) return;
  Engine* e = &engine_;
  const auto rid = request_id_;
  engine_.sim_.schedule(lat, [e, rid, tag] { e->complete_mem(rid, tag); });
}

void RequestContext::flush(std::uint64_t addr, std::uint64_t len,
                           std::uint64_t tag) {
  const auto lat = engine_.mem_.flush(addr, len);
  Engine* e = &engine_;
  const auto rid = request_id_;
  engine_.sim_.schedule(lat, [e, rid, tag] { e->complete_mem(rid, tag); });
}

void RequestContext::cpu_call(ServiceId service,
                              std::span<const std::uint8_t> args) {
  std::vector<std::uint8_t> msg(1 + 8 + args.size());
  msg[0] = static_cast<std::uint8_t>(service);
  store_le64(msg.data() + 1, request_id_);
  std::memcpy(msg.data() + 9, args.data(), args.size());
  if (!engine_.cpu_call_ep_)
    throw std::logic_error("cpu_call: no CPU service endpoint attached");
  if (engine_.cpu_call_ep_->try_post(msg) == ring::PostResult::kNoCredit)
    engine_.deferred_cpu_calls_.push_back(std::move(msg));
}

void RequestContext::delay(sim::TimeNs ns, std::uint64_t tag) {
  Engine* e = &engine_;
  const auto rid = request_id_;
  engine_.sim_.schedule(ns, [e, rid, tag] { e->complete_mem(rid, tag); });
}

void RequestContext::respond(std::span<const std::uint8_t> payload) {
  Engine* e = &engine_;
  const auto rid = request_id_;
  std::vector<std::uint8_t> copy(payload.begin(), payload.end());
  // Building the response WQE is one APU action.
  engine_.schedule_action([e, rid, copy = std::move(copy)]() mutable {
    e->respond_from(rid, std::move(copy));
  });
}

RequestState* RequestContext::state() {
  return engine_.entry(request_id_).state.get();
}

void RequestContext::set_state(std::unique_ptr<RequestState> s) {
  engine_.entry(request_id_).state = std::move(s);
}

// ---------------------------------------------------------------------------
// BatchedWqePoster

BatchedWqePoster::BatchedWqePoster(sim::Simulator& sim, rnic::QueuePair& qp,
                                   rnic::QpEnd end, std::uint64_t response_base,
                                   std::uint32_t slot_size,
                                   std::uint32_t capacity, std::uint32_t batch,
                                   std::uint32_t signaled_interval,
                                   std::uint64_t flush_ns, mem::Origin poster)
    : sim_(sim), qp_(qp), end_(end), response_base_(response_base),
      slot_size_(slot_size), mask_(capacity - 1),
      batch_(batch ? batch : 1),
      signaled_interval_(signaled_interval ? signaled_interval : 1),
      flush_ns_(flush_ns), poster_(poster) {}

void BatchedWqePoster::post_slot(std::uint64_t count,
                                 std::span<const std::uint8_t> image) {
  rnic::Wqe wqe;
  wqe.op = rnic::WqeOp::kWrite;
  wqe.remote_addr = response_base_ + (count & mask_) * slot_size_;
  wqe.payload.assign(image.begin(), image.end());
  ++posted_;
  wqe.signaled = !has_pointer_entry_ && (posted_ % signaled_interval_ == 0);
  qp_.post(end_, std::move(wqe));
  ++staged_;
  if (has_pointer_entry_) {
    // Pointer-entry increment as the second contiguous WQE; only it may be
    // signaled, and slot-before-pointer order rides the QP.
    rnic::Wqe ptr;
    ptr.op = rnic::WqeOp::kWrite;
    ptr.remote_addr = pointer_entry_addr_;
    const auto v = static_cast<std::uint32_t>(count + 1);
    ptr.payload = {static_cast<std::uint8_t>(v),
                   static_cast<std::uint8_t>(v >> 8),
                   static_cast<std::uint8_t>(v >> 16),
                   static_cast<std::uint8_t>(v >> 24)};
    ptr.signaled = (posted_ % signaled_interval_ == 0);
    qp_.post(end_, std::move(ptr));
    ++staged_;
  }
  if (qp_.staged(end_) == 0) {
    // Executed opportunistically before any doorbell.
    staged_ = 0;
    return;
  }
  const auto per_post = has_pointer_entry_ ? 2u : 1u;
  if (staged_ >= batch_ * per_post) {
    const auto n = std::min(staged_, qp_.staged(end_));
    if (n) qp_.ring_doorbell(end_, n, poster_);
    staged_ = 0;
    return;
  }
  arm_flush();
}

void BatchedWqePoster::flush_now() {
  const auto n = std::min(staged_, qp_.staged(end_));
  if (n) qp_.ring_doorbell(end_, n, poster_);
  staged_ = 0;
}

void BatchedWqePoster::arm_flush() {
  if (flush_armed_ || flush_ns_ == 0) return;
  flush_armed_ = true;
  sim_.schedule(flush_ns_, [this] {
    flush_armed_ = false;
    flush_now();
  });
}

ring::ServerEndpoint::SlotWriter BatchedWqePoster::writer() {
  return [this](std::uint64_t count, std::span<const std::uint8_t> image) {
    post_slot(count, image);
  };
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(sim::Simulator& sim, mem::MemoryModel& mem,
               cpoll::CpollChecker& chk, AccelConfig cfg, std::string name)
    : sim_(sim), mem_(mem), checker_(chk), cfg_(cfg), name_(std::move(name)),
      gather_issue_(cfg.gather_issue_bytes_per_ns) {
  checker_.set_sink([this](const cpoll::CpollSignal& s) { on_signal(s); });
}

void Engine::attach_app_buffer(std::uint32_t buffer_id,
                               ring::ServerEndpoint* ep,
                               std::uint64_t request_ring_base,
                               Application* app) {
  Binding b;
  b.server = ep;
  b.ring_base = request_ring_base;
  b.app = app;
  bindings_[buffer_id] = std::move(b);
  tracker_.set_capacity(buffer_id, ep->config().capacity);
}

void Engine::attach_resume_buffer(std::uint32_t buffer_id,
                                  ring::ClientEndpoint* ep,
                                  std::uint64_t ring_base, ResumeKind kind) {
  Binding b;
  b.client = ep;
  b.ring_base = ring_base;
  b.resume = true;
  b.resume_kind = kind;
  bindings_[buffer_id] = std::move(b);
  tracker_.set_capacity(buffer_id, ep->config().capacity);
}

void Engine::set_cpu_call_endpoint(ring::ClientEndpoint* ep) {
  cpu_call_ep_ = ep;
}

void Engine::add_cq(rnic::QueuePair* qp, rnic::QpEnd end) {
  cqs_.emplace_back(qp, end);
}

void Engine::start() {
  if (!cqs_.empty()) {
    cq_poll_armed_ = true;
    sim_.schedule(cfg_.cq_poll_interval_ns, [this] { poll_cqs(); });
  }
}

void Engine::poll_cqs() {
  for (auto& [qp, end] : cqs_) cqes_drained_ += qp->poll_cq(end).size();
  // The poller runs on a CPU core off the critical path; it parks when the
  // accelerator drains so finite workloads can run to exhaustion.
  bool active = !fsm_.empty() || !signaled_.empty();
  for (auto& [id, p] : pending_) active = active || p > 0;
  for (auto& [qp, end] : cqs_) active = active || qp->staged(end) > 0;
  if (active)
    sim_.schedule(cfg_.cq_poll_interval_ns, [this] { poll_cqs(); });
  else
    cq_poll_armed_ = false;
}

void Engine::on_signal(const cpoll::CpollSignal& s) {
  if (!bindings_.contains(s.buffer_id))
    throw std::logic_error(name_ + ": signal for unattached buffer " +
                           std::to_string(s.buffer_id));
  signaled_.insert(s.buffer_id);
  if (!cq_poll_armed_ && !cqs_.empty()) {
    cq_poll_armed_ = true;
    sim_.schedule(cfg_.cq_poll_interval_ns, [this] { poll_cqs(); });
  }
  pump();
}

void Engine::convert_signals() {
  for (auto id : signaled_) {
    const auto observed = checker_.take(id);
    pending_[id] += tracker_.new_requests(id, observed);
  }
  signaled_.clear();
}

std::optional<std::uint32_t> Engine::scheduler_next() const {
  if (bindings_.empty()) return std::nullopt;
  auto it = rr_started_ ? bindings_.upper_bound(rr_last_) : bindings_.begin();
  for (std::size_t i = 0; i <= bindings_.size(); ++i) {
    if (it == bindings_.end()) it = bindings_.begin();
    auto p = pending_.find(it->first);
    if (p != pending_.end() && p->second > 0) return it->first;
    ++it;
  }
  return std::nullopt;
}

void Engine::pump() {
  convert_signals();
  while (true) {
    // Round-robin pick, skipping app buffers while the FSM table is full so
    // replies and acks keep flowing under backpressure.
    std::optional<std::uint32_t> pick;
    auto it = rr_started_ ? bindings_.upper_bound(rr_last_) : bindings_.begin();
    for (std::size_t i = 0; i <= bindings_.size() && !pick; ++i) {
      if (it == bindings_.end()) it = bindings_.begin();
      auto p = pending_.find(it->first);
      if (p != pending_.end() && p->second > 0) {
        if (it->second.resume || reserved_ < cfg_.max_outstanding)
          pick = it->first;
      }
      if (!pick) ++it;
    }
    if (!pick) return;
    rr_last_ = *pick;
    rr_started_ = true;
    --pending_[*pick];
    auto& b = bindings_[*pick];
    const auto id = *pick;
    if (b.resume) {
      schedule_action([this, id] { do_resume(id); });
    } else {
      ++reserved_;
      schedule_action([this, id] { do_dispatch(id); });
    }
  }
}

void Engine::schedule_action(std::function<void()> fn) {
  const auto now = sim_.now();
  const auto start = std::max(now, busy_until_);
  busy_until_ = start + cfg_.apu_action_ns;
  sim_.schedule(busy_until_ - now, std::move(fn));
}

void Engine::do_dispatch(std::uint32_t buffer_id) {
  auto& b = bindings_.at(buffer_id);
  const auto& cfg = b.server->config();
  const auto slot_addr =
      b.ring_base +
      (b.server->consumed() & (cfg.capacity - 1)) * cfg.slot_size;
  auto msg = b.server->try_consume_request();
  if (!msg)
    throw ring::ProtocolFault(
        name_ + ": dispatch found valid=0 on buffer " +
        std::to_string(buffer_id) + " despite a tracked request");
  ++served_[buffer_id];
  ++dispatched_;
  const auto rid = next_request_id_++;
  const auto ring_count = b.server->consumed() - 1;
  fsm_.emplace(rid,
               FsmEntry{rid, buffer_id, ring_count, b.app, sim_.now(), nullptr});

  // The APU reads the slot over the coherent fabric, then resets it.
  const auto lat = mem_.access(mem::AccessRequest{
      slot_addr, cfg.slot_size, mem::AccessOp::kRead, mem::Origin::kAccel,
      false});
  mem_.access(mem::AccessRequest{slot_addr, cfg.slot_size, mem::AccessOp::kWrite,
                                 mem::Origin::kAccel, false});
  Application* app = b.app;
  sim_.schedule(lat, [this, app, rid, msg = std::move(*msg)] {
    RequestContext ctx(*this, rid);
    app->on_request(ctx, msg);
  });
}

void Engine::do_resume(std::uint32_t buffer_id) {
  auto& b = bindings_.at(buffer_id);
  const auto& cfg = b.client->config();
  auto msg = b.client->try_consume_response();
  if (!msg)
    throw ring::ProtocolFault(
        name_ + ": resume found valid=0 on buffer " +
        std::to_string(buffer_id) + " despite a tracked message");
  ++served_[buffer_id];
  if (msg->size() < 8)
    throw ring::ProtocolFault(name_ + ": short resume message");
  const auto rid = load_le64(msg->data());
  auto it = fsm_.find(rid);
  if (it == fsm_.end())
    throw ring::ProtocolFault(name_ + ": resume for unknown request " +
                              std::to_string(rid));
  const auto kind = b.resume_kind;
  Application* app = it->second.app;
  // Same slot-read latency as a dispatch; cfg is captured for the size.
  const auto lat = mem_.access(mem::AccessRequest{
      b.ring_base, cfg.slot_size, mem::AccessOp::kRead, mem::Origin::kAccel,
      false});
  sim_.schedule(lat, [this, app, rid, kind, msg = std::move(*msg)] {
    RequestContext ctx(*this, rid);
    std::span<const std::uint8_t> body(msg.data() + 8, msg.size() - 8);
    if (kind == ResumeKind::kCpuReply)
      app->on_cpu_reply(ctx, body);
    else
      app->on_resume(ctx, body);
  });
  retry_deferred_cpu_calls();
}

void Engine::complete_mem(std::uint64_t request_id, std::uint64_t tag) {
  schedule_action([this, request_id, tag] {
    auto it = fsm_.find(request_id);
    if (it == fsm_.end())
      throw std::logic_error(name_ + ": memory completion for unknown request " +
                             std::to_string(request_id));
    RequestContext ctx(*this, request_id);
    it->second.app->on_mem_complete(ctx, tag);
  });
}

void Engine::respond_from(std::uint64_t request_id,
                          std::vector<std::uint8_t> payload) {
  auto it = fsm_.find(request_id);
  if (it == fsm_.end())
    throw std::logic_error(name_ + ": respond for unknown request " +
                           std::to_string(request_id));
  auto& b = bindings_.at(it->second.buffer_id);
  if (b.server->try_post_response(it->second.ring_count, payload) ==
      ring::PostResult::kNoCredit)
    throw ring::ProtocolFault(name_ + ": response ring out of credits");
  ++responses_;
  ++retired_;
  --reserved_;
  fsm_.erase(it);
  retry_deferred_cpu_calls();
  pump();
}

void Engine::retry_deferred_cpu_calls() {
  while (!deferred_cpu_calls_.empty() && cpu_call_ep_) {
    if (cpu_call_ep_->try_post(deferred_cpu_calls_.front()) ==
        ring::PostResult::kNoCredit)
      return;
    deferred_cpu_calls_.pop_front();
  }
}

std::uint64_t Engine::served(std::uint32_t buffer_id) const {
  auto it = served_.find(buffer_id);
  return it == served_.end() ? 0 : it->second;
}

Engine::FsmEntry& Engine::entry(std::uint64_t request_id) {
  auto it = fsm_.find(request_id);
  if (it == fsm_.end())
    throw std::logic_error(name_ + ": unknown request " +
                           std::to_string(request_id));
  return it->second;
}

// ---------------------------------------------------------------------------
// CpuServiceHost

CpuServiceHost::CpuServiceHost(sim::Simulator& sim, mem::MemoryModel& mem,
                               CpuServiceConfig cfg, ring::ServerEndpoint* ep,
                               std::uint64_t request_ring_base,
                               std::uint64_t ring_bytes)
    : sim_(sim), mem_(mem), cfg_(cfg), ep_(ep) {
  // Wake on stores into the request ring so idle periods schedule no events.
  mem_.add_write_observer(
      [this, request_ring_base, ring_bytes](std::uint64_t addr, std::uint64_t) {
        if (addr >= request_ring_base && addr < request_ring_base + ring_bytes)
          arm_poll();
      });
}

void CpuServiceHost::register_service(ServiceId id, std::uint64_t latency_ns,
                                      Handler handler) {
  services_[static_cast<std::uint8_t>(id)] =
      Service{latency_ns, std::move(handler)};
}

void CpuServiceHost::set_alloc_pool(std::uint64_t base, std::uint64_t length,
                                    std::uint32_t align) {
  alloc_base_ = base;
  alloc_len_ = length;
  alloc_next_ = 0;
  alloc_align_ = align;
}

void CpuServiceHost::register_default_services() {
  register_service(ServiceId::kAlloc, cfg_.alloc_ns,
                   [this](std::span<const std::uint8_t> args) {
                     if (args.size() < 4)
                       throw std::invalid_argument("alloc: short args");
                     std::uint32_t want = args[0] | args[1] << 8 |
                                          args[2] << 16 | args[3] << 24;
                     const auto aligned =
                         (want + alloc_align_ - 1) / alloc_align_ * alloc_align_;
                     if (alloc_next_ + aligned > alloc_len_)
                       throw std::runtime_error("alloc: pool exhausted");
                     const auto off = alloc_base_ + alloc_next_;
                     alloc_next_ += aligned;
                     std::vector<std::uint8_t> reply(8);
                     store_le64(reply.data(), off);
                     return reply;
                   });
  register_service(ServiceId::kPreprocess, cfg_.preprocess_ns,
                   [](std::span<const std::uint8_t> args) {
                     return std::vector<std::uint8_t>(args.begin(), args.end());
                   });
}

void CpuServiceHost::start() { arm_poll(); }

void CpuServiceHost::arm_poll() {
  if (poll_armed_) return;
  poll_armed_ = true;
  sim_.schedule(cfg_.cpu_poll_interval_ns, [this] {
    poll_armed_ = false;
    poll();
  });
}

void CpuServiceHost::poll() {
  bool any = false;
  while (auto msg = ep_->try_consume_request()) {
    any = true;
    if (msg->size() < 9)
      throw ring::ProtocolFault("cpu service: short call message");
    const std::uint8_t service = (*msg)[0];
    const std::uint64_t rid = load_le64(msg->data() + 1);
    auto it = services_.find(service);
    if (it == services_.end())
      throw std::out_of_range("cpu service: unregistered service " +
                              std::to_string(service));
    const auto start = std::max(sim_.now(), core_busy_);
    const auto done = start + it->second.latency_ns;
    core_busy_ = done;
    busy_accum_ += it->second.latency_ns;
    ++calls_;
    std::span<const std::uint8_t> args(msg->data() + 9, msg->size() - 9);
    auto reply_body = it->second.handler(args);
    std::vector<std::uint8_t> reply(8 + 1 + reply_body.size());
    store_le64(reply.data(), rid);
    reply[8] = service;
    std::memcpy(reply.data() + 9, reply_body.data(), reply_body.size());
    sim_.schedule(done - sim_.now(), [this, reply = std::move(reply)] {
      if (ep_->try_post_response(0, reply) == ring::PostResult::kNoCredit)
        throw ring::ProtocolFault("cpu service: reply ring out of credits");
    });
  }
  if (any) arm_poll();  // keep draining while the accelerator is active
}

}  // namespace rambda::accel
