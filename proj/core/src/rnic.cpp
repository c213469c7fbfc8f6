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

#include "rambda/rnic.hpp"

#include <memory>

namespace rambda::rnic {

Nic::Nic(sim::Simulator& sim, mem::MemoryModel& local, RnicConfig cfg,
         std::string name)
    : sim_(sim), mem_(local), cfg_(cfg), name_(std::move(name)),
      tx_(cfg.network_bw_bytes_per_ns) {}

QueuePair::QueuePair(std::uint32_t id, Nic& a, Nic& b,
                     std::uint64_t extra_oneway_ns)
    : id_(id), a_(a), b_(b), extra_oneway_ns_(extra_oneway_ns),
      opportunistic_rng_(a.sim().seed(),
                         "rnic.opportunistic.qp" + std::to_string(id)) {}

std::uint64_t QueuePair::post(QpEnd from, Wqe wqe) {
  if (!open_) throw std::logic_error("post_wqe: queue pair is closed");
  auto& s = side(from);
  auto& remote = nic(peer(from)).memory();
  if (wqe.op == WqeOp::kWrite) {
    // Validates the remote registration up front, mirroring verbs behavior.
    remote.region_at(wqe.remote_addr, wqe.payload.size());
  }
  const std::uint64_t seq = s.next_seq++;
  const double p = nic(from).config().opportunistic_prob;
  // The NIC may fetch and execute a staged WQE before the doorbell, but only
  // in order: everything ahead of it must already be released.
  if (s.sq.empty() && p > 0.0 && opportunistic_rng_.next_unit() < p) {
    execute(from, a_.sim().now(), seq, std::move(wqe));
    return seq;
  }
  s.sq.emplace_back(seq, std::move(wqe));
  ++s.staged;
  return seq;
}

void QueuePair::ring_doorbell(QpEnd from, std::uint32_t n, mem::Origin poster) {
  if (!open_) throw std::logic_error("ring_doorbell: queue pair is closed");
  auto& s = side(from);
  if (n > s.sq.size())
    throw std::invalid_argument("ring_doorbell: " + std::to_string(n) +
                                " exceeds " + std::to_string(s.sq.size()) +
                                " staged WQEs");
  auto& local = nic(from);
  auto& sim = local.sim();
  const auto& cfg = local.config();
  local.count_doorbell();

  sim::TimeNs t = sim.now();
  t += poster == mem::Origin::kAccel ? cfg.mmio_fence_accel_ns
                                     : cfg.mmio_fence_cpu_ns;
  if (poster == mem::Origin::kAccel)
    t = local.memory().cc_transfer(t, cfg.mmio_bytes);
  t = local.memory().pcie_transfer(t, cfg.mmio_bytes);

  for (std::uint32_t i = 0; i < n; ++i) {
    auto [seq, wqe] = std::move(s.sq.front());
    s.sq.pop_front();
    --s.staged;
    execute(from, t, seq, std::move(wqe));
  }
}

void QueuePair::execute(QpEnd from, sim::TimeNs start, std::uint64_t seq,
                        Wqe wqe) {
  auto& local = nic(from);
  auto& remote = nic(peer(from));
  auto& sim = local.sim();
  const auto& cfg = local.config();
  auto& s = side(from);

  if (wqe.op != WqeOp::kWrite)
    throw std::invalid_argument("execute: reads go through rdma_read");

  const auto bytes = static_cast<std::uint64_t>(wqe.payload.size());
  local.count_tx(bytes);
  const auto tx_done = local.tx().acquire(start, bytes);
  const auto arrive = tx_done + cfg.network_oneway_ns + extra_oneway_ns_;
  // Remote-side PCIe injection; per-QP order is preserved by the watermark.
  auto inject = remote.memory().pcie_transfer(arrive, bytes) +
                remote.memory().config().pcie_oneway_ns;
  inject = std::max(inject, s.last_delivery);
  s.last_delivery = inject;

  const bool signaled = wqe.signaled;
  const auto remote_addr = wqe.remote_addr;
  const auto tph = wqe.tph_override;
  auto payload = std::make_shared<std::vector<std::uint8_t>>(
      std::move(wqe.payload));
  sim.schedule(inject - sim.now(), [this, from, seq, remote_addr, tph, payload,
                                    signaled] {
    auto& sim2 = a_.sim();
    auto& rmem = nic(peer(from)).memory();
    const auto& region = rmem.region_at(remote_addr, payload->size());
    rmem.write_bytes(remote_addr, *payload);
    rmem.access(mem::AccessRequest{
        remote_addr, static_cast<std::uint32_t>(payload->size()),
        mem::AccessOp::kWrite, mem::Origin::kDma,
        tph.value_or(region.tph_on_write)});
    ++side(from).delivered;
    if (signaled) {
      const auto delay =
          nic(from).config().network_oneway_ns + extra_oneway_ns_;
      const auto done = sim2.now() + delay;
      sim2.schedule(delay, [this, from, seq, done] {
        side(from).cq.push_back(Cqe{id_, seq, done});
      });
    }
  });
}

std::vector<Cqe> QueuePair::poll_cq(QpEnd end) {
  auto& s = side(end);
  std::vector<Cqe> out;
  out.swap(s.cq);
  return out;
}

void QueuePair::rdma_read(
    QpEnd from, std::uint64_t remote_addr, std::uint32_t len,
    std::function<void(std::vector<std::uint8_t>, sim::TimeNs)> done) {
  if (!open_) throw std::logic_error("rdma_read: queue pair is closed");
  auto& local = nic(from);
  auto& remote = nic(peer(from));
  auto& sim = local.sim();
  const auto& cfg = local.config();

  const auto t_req = sim.now() + cfg.mmio_fence_cpu_ns +
                     cfg.network_oneway_ns + extra_oneway_ns_;
  (void)remote;
  sim.schedule(t_req - sim.now(),
               [this, from, remote_addr, len, done = std::move(done)] {
    auto& sim2 = a_.sim();
    auto& rem = nic(peer(from));
    auto& rmem = rem.memory();
    rmem.region_at(remote_addr, len);  // throws for spans outside one region
    const auto access_ns = rmem.access(mem::AccessRequest{
        remote_addr, len, mem::AccessOp::kRead, mem::Origin::kDma, false});
    rmem.pcie_transfer(sim2.now(), len);
    std::vector<std::uint8_t> data(len);
    rmem.read_bytes(remote_addr, data);
    rem.count_tx(len);
    const auto back = access_ns + rmem.config().pcie_oneway_ns +
                      nic(from).config().network_oneway_ns + extra_oneway_ns_;
    auto* psim = &sim2;
    sim2.schedule(back, [data = std::move(data), done = std::move(done),
                         psim]() mutable {
      done(std::move(data), psim->now());
    });
  });
}

}  // namespace rambda::rnic
