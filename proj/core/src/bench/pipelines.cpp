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

#include "rambda/bench/pipelines.hpp"

#include <cstring>
#include <list>
#include <memory>

#include "rambda/accel.hpp"
#include "rambda/apps/dlrm.hpp"
#include "rambda/apps/kvs.hpp"
#include "rambda/apps/tx.hpp"
#include "rambda/apps/wire.hpp"
#include "rambda/cpoll.hpp"
#include "rambda/rnic.hpp"

namespace rambda::bench {

namespace {

namespace layout {
constexpr std::uint64_t kPtrBuf = 0x1000;
constexpr std::uint64_t kChainResp = 0x200000;
constexpr std::uint64_t kIntra = 0x280000;
constexpr std::uint64_t kReqRings = 0x800000;
constexpr std::uint64_t kApp = 0x10000000;
constexpr std::uint64_t kApp2 = 0x50000000;
constexpr std::uint64_t kApp3 = 0x90000000;
constexpr std::uint64_t kClientResp = 0x800000;
constexpr std::uint64_t kClientScratch = 0x10000;
}  // namespace layout

constexpr sim::TimeNs kClientPollNs = 20;

void store_le32_vec(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v = {static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(x >> 8),
       static_cast<std::uint8_t>(x >> 16), static_cast<std::uint8_t>(x >> 24)};
}

// ---------------------------------------------------------------------------
// Client fleet: posts pre-generated request streams (closed-loop window or
// open-loop arrivals), consumes slot-paired responses in order, and records
// per-request latency from post (or intended arrival) to consumption.

class ClientFleet {
 public:
  struct Conn {
    std::unique_ptr<ring::ClientEndpoint> ep;
    rnic::QueuePair* qp = nullptr;
    std::vector<std::vector<std::uint8_t>> requests;
    std::size_t next = 0;        // next request index not yet issued
    std::size_t inflight = 0;
    std::deque<sim::TimeNs> post_times;
    std::deque<std::size_t> backlog;  // open loop: arrived, awaiting credit
    bool consume_pending = false;
    std::uint64_t consumed = 0;
  };

  ClientFleet(sim::Simulator& sim, const WorkloadSpec& w, LatencyRecorder& lat)
      : sim_(sim), window_(w.window ? w.window : 1),
        interarrival_(w.interarrival_ns), lat_(lat) {}

  Conn& add_conn(std::unique_ptr<ring::ClientEndpoint> ep,
                 rnic::QueuePair* qp) {
    conns_.push_back(std::make_unique<Conn>());
    conns_.back()->ep = std::move(ep);
    conns_.back()->qp = qp;
    return *conns_.back();
  }

  void set_on_response(
      std::function<void(std::uint32_t, std::uint64_t,
                         std::span<const std::uint8_t>,
                         std::span<const std::uint8_t>)> fn) {
    on_response_ = std::move(fn);
  }

  void start() {
    for (auto& c : conns_) total_ += c->requests.size();
    if (interarrival_ > 0) {
      schedule_arrival(0);
      return;
    }
    for (std::uint32_t i = 0; i < conns_.size(); ++i) fill_window(i);
  }

  void note_response_write(std::uint32_t i) {
    auto& c = *conns_[i];
    if (c.consume_pending) return;
    c.consume_pending = true;
    sim_.schedule(kClientPollNs, [this, i] {
      conns_[i]->consume_pending = false;
      consume(i);
    });
  }

  std::uint64_t issued() const { return issued_; }
  std::uint64_t completed() const { return completed_; }
  std::uint64_t total() const { return total_; }
  bool done() const { return completed_ == total_; }
  sim::TimeNs first_post() const {
    return first_post_ == sim::kTimeInfinity ? 0 : first_post_;
  }
  sim::TimeNs last_done() const { return last_done_; }

 private:
  void schedule_arrival(std::uint64_t k) {
    if (k >= total_) return;
    const auto at = k * interarrival_;
    sim_.schedule(at > sim_.now() ? at - sim_.now() : 0, [this, k] {
      const auto i = static_cast<std::uint32_t>(k % conns_.size());
      auto& c = *conns_[i];
      if (c.next < c.requests.size()) {
        // Latency counts from the intended arrival, queueing included.
        c.post_times.push_back(sim_.now());
        ++issued_;
        if (c.backlog.empty() && c.ep->credits() > 0)
          post_idx(i, c.next);
        else
          c.backlog.push_back(c.next);
        ++c.next;
      }
      schedule_arrival(k + 1);
    });
  }

  void fill_window(std::uint32_t i) {
    auto& c = *conns_[i];
    while (c.inflight < window_ && c.next < c.requests.size()) {
      c.post_times.push_back(sim_.now());
      ++issued_;
      post_idx(i, c.next);
      ++c.next;
    }
  }

  void post_idx(std::uint32_t i, std::size_t idx) {
    auto& c = *conns_[i];
    if (first_post_ == sim::kTimeInfinity) first_post_ = sim_.now();
    if (c.ep->try_post(c.requests[idx]) != ring::PostResult::kPosted)
      throw std::logic_error("client fleet: post without credit");
    ++c.inflight;
  }

  void consume(std::uint32_t i) {
    auto& c = *conns_[i];
    if (c.qp) c.qp->poll_cq(rnic::QpEnd::kA);
    while (true) {
      auto msg = c.ep->try_consume_response();
      if (!msg) break;
      const auto posted_at = c.post_times.front();
      c.post_times.pop_front();
      lat_.record(sim_.now() - posted_at);
      ++completed_;
      last_done_ = sim_.now();
      const auto seq = c.consumed++;
      if (on_response_) on_response_(i, seq, c.requests[seq], *msg);
      if (c.inflight) --c.inflight;
      if (interarrival_ > 0) {
        while (!c.backlog.empty() && c.ep->credits() > 0) {
          const auto idx = c.backlog.front();
          c.backlog.pop_front();
          post_idx(i, idx);
        }
      } else {
        fill_window(i);
      }
    }
  }

  sim::Simulator& sim_;
  std::uint32_t window_;
  std::uint64_t interarrival_;
  LatencyRecorder& lat_;
  std::vector<std::unique_ptr<Conn>> conns_;
  std::function<void(std::uint32_t, std::uint64_t,
                     std::span<const std::uint8_t>,
                     std::span<const std::uint8_t>)> on_response_;
  std::uint64_t total_ = 0;
  std::uint64_t issued_ = 0;
  std::uint64_t completed_ = 0;
  sim::TimeNs first_post_ = sim::kTimeInfinity;
  sim::TimeNs last_done_ = 0;
};


// ---------------------------------------------------------------------------
// A rambda server machine: memory, RNIC, cpoll checker over the pointer
// buffer, accelerator engine, CPU service host on the intra-machine pair.

struct RambdaServer {
  std::unique_ptr<mem::MemoryModel> mem;
  std::unique_ptr<rnic::Nic> nic;
  std::unique_ptr<cpoll::CpollChecker> checker;
  std::unique_ptr<cpoll::PointerBuffer> pb;
  std::unique_ptr<accel::Engine> engine;
  std::unique_ptr<ring::ClientEndpoint> cpu_call_ep;
  std::unique_ptr<ring::ServerEndpoint> cpu_host_ep;
  std::unique_ptr<accel::CpuServiceHost> cpu_host;
  std::vector<std::unique_ptr<ring::ServerEndpoint>> server_eps;
  std::vector<std::unique_ptr<accel::BatchedWqePoster>> posters;
  ring::PairConfig ring_cfg;
  std::uint32_t cpu_reply_buffer_id = 0;
  mem::RegionId rings_region = 0;
};

// Pointer-entry map: buffer i <-> entry i. Entry count covers client rings,
// the cpu-reply ring, and chain resume rings.
RambdaServer make_rambda_server(sim::Simulator& sim, const ExperimentConfig& c,
                                const std::string& name,
                                std::uint32_t client_rings,
                                std::uint32_t extra_rings,
                                ring::PairConfig ring_cfg,
                                std::uint32_t intra_slot, bool rings_in_nvm) {
  RambdaServer s;
  s.ring_cfg = ring_cfg;
  s.mem = std::make_unique<mem::MemoryModel>(sim, c.memory, name);
  const std::uint32_t entries = client_rings + extra_rings + 1;
  s.mem->register_region(layout::kPtrBuf, 4096, mem::MediaKind::kDram, true);
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(ring_cfg.capacity) * ring_cfg.slot_size;
  const std::uint64_t intra_bytes = 1024ull * intra_slot;
  s.mem->register_region(layout::kIntra, 2 * intra_bytes,
                         mem::MediaKind::kDram, false);
  if (client_rings + extra_rings > 0)
    s.rings_region = s.mem->register_region(
        layout::kReqRings, (client_rings + extra_rings) * ring_bytes,
        rings_in_nvm ? mem::MediaKind::kNvm : mem::MediaKind::kDram,
        !rings_in_nvm);
  s.nic = std::make_unique<rnic::Nic>(sim, *s.mem, c.rnic, name + "-nic");
  s.checker = std::make_unique<cpoll::CpollChecker>(sim, *s.mem, c.cpoll);
  s.pb = std::make_unique<cpoll::PointerBuffer>(*s.mem, layout::kPtrBuf,
                                                entries);
  s.checker->register_pointer_region(*s.pb, c.cpoll.placement);
  auto* checker = s.checker.get();
  s.mem->add_write_observer([checker](std::uint64_t a, std::uint64_t l) {
    checker->on_write(a, l);
  });
  s.engine = std::make_unique<accel::Engine>(sim, *s.mem, *s.checker, c.accel,
                                             name + "-accel");

  // Intra-machine pair: accel -> cpu requests, cpu -> accel replies. The CPU
  // spin-polls the request ring; the reply ring is cpoll-notified through
  // pointer entry `client_rings + extra_rings`.
  const auto req_base = layout::kIntra;
  const auto reply_base = layout::kIntra + intra_bytes;
  ring::PairConfig intra_cfg{1024, intra_slot, false};
  s.cpu_reply_buffer_id = client_rings + extra_rings;
  auto* m = s.mem.get();
  s.cpu_call_ep = std::make_unique<ring::ClientEndpoint>(
      intra_cfg, m->raw(reply_base, intra_bytes),
      [m, req_base, intra_cfg](std::uint64_t count,
                               std::span<const std::uint8_t> image) {
        const auto a =
            req_base + (count & (intra_cfg.capacity - 1)) * intra_cfg.slot_size;
        m->write_bytes(a, image);
        m->access(mem::AccessRequest{a, intra_cfg.slot_size,
                                     mem::AccessOp::kWrite,
                                     mem::Origin::kAccel, false});
      });
  auto* pb = s.pb.get();
  const auto reply_entry = s.cpu_reply_buffer_id;
  s.cpu_host_ep = std::make_unique<ring::ServerEndpoint>(
      intra_cfg, m->raw(req_base, intra_bytes),
      [m, pb, reply_base, reply_entry, intra_cfg](
          std::uint64_t count, std::span<const std::uint8_t> image) {
        const auto a = reply_base +
                       (count & (intra_cfg.capacity - 1)) * intra_cfg.slot_size;
        m->write_bytes(a, image);
        m->access(mem::AccessRequest{a, intra_cfg.slot_size,
                                     mem::AccessOp::kWrite, mem::Origin::kCpu,
                                     false});
        pb->store(reply_entry, static_cast<std::uint32_t>(count + 1));
        m->access(mem::AccessRequest{pb->entry_addr(reply_entry), 4,
                                     mem::AccessOp::kWrite, mem::Origin::kCpu,
                                     false});
      });
  s.cpu_host = std::make_unique<accel::CpuServiceHost>(
      sim, *s.mem, c.cpu_services, s.cpu_host_ep.get(), req_base, intra_bytes);
  s.cpu_host->register_default_services();
  s.engine->set_cpu_call_endpoint(s.cpu_call_ep.get());
  s.engine->attach_resume_buffer(s.cpu_reply_buffer_id, s.cpu_call_ep.get(),
                                 reply_base,
                                 accel::Engine::ResumeKind::kCpuReply);
  return s;
}

std::uint64_t server_ring_base(const RambdaServer& s, std::uint32_t idx) {
  return layout::kReqRings +
         static_cast<std::uint64_t>(idx) * s.ring_cfg.capacity *
             s.ring_cfg.slot_size;
}

// One client connection: the request path posts two contiguous WQEs (slot
// image, pointer increment) released by one batched doorbell; the response
// path is a server-side BatchedWqePoster into the client's response ring.
std::unique_ptr<ring::ClientEndpoint> connect_client(
    sim::Simulator& sim, const ExperimentConfig& c, RambdaServer& srv,
    mem::MemoryModel& cmem, rnic::Nic& cnic, rnic::QueuePair& qp,
    std::uint32_t idx, std::uint64_t resp_base, accel::Application* app,
    std::uint32_t doorbell_batch) {
  const auto cfg = srv.ring_cfg;
  const auto req_base = server_ring_base(srv, idx);
  const auto ring_bytes =
      static_cast<std::uint64_t>(cfg.capacity) * cfg.slot_size;
  const auto ptr_addr = srv.pb->entry_addr(idx);

  auto client_ep = std::make_unique<ring::ClientEndpoint>(
      cfg, cmem.raw(resp_base, ring_bytes),
      [&qp, req_base, ptr_addr, cfg](std::uint64_t count,
                                     std::span<const std::uint8_t> image) {
        rnic::Wqe slot;
        slot.remote_addr =
            req_base + (count & (cfg.capacity - 1)) * cfg.slot_size;
        slot.payload.assign(image.begin(), image.end());
        qp.post(rnic::QpEnd::kA, std::move(slot));
        rnic::Wqe ptr;
        ptr.remote_addr = ptr_addr;
        store_le32_vec(ptr.payload, static_cast<std::uint32_t>(count + 1));
        ptr.signaled = true;  // only the second WQE is signaled
        qp.post(rnic::QpEnd::kA, std::move(ptr));
        qp.ring_doorbell(rnic::QpEnd::kA, 2, mem::Origin::kCpu);
      });

  srv.posters.push_back(std::make_unique<accel::BatchedWqePoster>(
      sim, qp, rnic::QpEnd::kB, resp_base, cfg.slot_size, cfg.capacity,
      doorbell_batch, c.rnic.signaled_interval, c.accel.doorbell_flush_ns));
  srv.server_eps.push_back(std::make_unique<ring::ServerEndpoint>(
      cfg, srv.mem->raw(req_base, ring_bytes), srv.posters.back()->writer()));
  srv.engine->attach_app_buffer(idx, srv.server_eps.back().get(), req_base,
                                app);
  srv.engine->add_cq(&qp, rnic::QpEnd::kB);
  (void)cnic;
  return client_ep;
}

void collect_counters(MetricsReport& r, sim::Simulator& sim,
                      const mem::MemoryModel* server,
                      const mem::MemoryModel* client, const rnic::Nic* snic,
                      const rnic::Nic* cnic, const accel::Engine* engine) {
  sim::CounterSet all = sim.counters();
  if (server) server->publish_counters(all, "server.");
  if (client) client->publish_counters(all, "client.");
  if (snic) {
    all.add("server.nic_doorbells", snic->doorbells());
    all.add("server.nic_tx_bytes", snic->network_tx_bytes());
  }
  if (cnic) {
    all.add("client.nic_doorbells", cnic->doorbells());
    all.add("client.nic_tx_bytes", cnic->network_tx_bytes());
  }
  if (engine) {
    all.add("accel.dispatched", engine->dispatched());
    all.add("accel.retired", engine->retired());
    all.add("accel.responses", engine->responses());
    all.add("accel.cqes", engine->cqes_drained());
  }
  for (const auto& [k, v] : all.values()) r.counters[k] = v;
}

struct KvWiring {
  KvsConfig store_cfg;
  std::uint64_t table_bytes, slab_bytes, chain_bytes;
};

KvWiring kv_wiring(const ExperimentConfig& c) {
  KvWiring w;
  w.table_bytes = static_cast<std::uint64_t>(c.kvs.bucket_count) *
                  apps::KvStore::kBucketStride;
  w.slab_bytes = 2ull * c.workload.key_space * c.kvs.pair_slot_bytes +
                 (1u << 20);
  w.chain_bytes =
      std::max<std::uint64_t>(1u << 20, c.kvs.bucket_count * 16ull);
  w.store_cfg.table_base = layout::kApp;
  w.store_cfg.bucket_count = c.kvs.bucket_count;
  w.store_cfg.slab_base = layout::kApp2;
  w.store_cfg.slab_len = w.slab_bytes;
  w.store_cfg.pair_slot_bytes = c.kvs.pair_slot_bytes;
  w.store_cfg.chain_pool_base = layout::kApp3;
  w.store_cfg.chain_pool_len = w.chain_bytes / 2;  // direct (preload) half
  return w;
}

void preload_store(apps::KvStore& store, const ExperimentConfig& c) {
  if (!c.workload.preload) return;
  KvWorkload vals(c.workload, c.seed ^ 0x9e3779b9);
  for (std::uint64_t k = 0; k < c.workload.key_space; ++k) {
    const auto key = KvWorkload::key_bytes(k);
    const auto val = vals.value_bytes(k);
    store.put(key, val, nullptr);
  }
}

std::vector<std::vector<std::vector<std::uint8_t>>> kv_request_streams(
    const ExperimentConfig& c) {
  KvWorkload wl(c.workload, c.seed);
  std::vector<std::vector<std::vector<std::uint8_t>>> per_client(
      c.workload.clients);
  for (std::uint64_t i = 0; i < c.workload.request_count; ++i) {
    const auto rec = wl.next();
    const auto key = KvWorkload::key_bytes(rec.key);
    std::vector<std::uint8_t> req;
    if (rec.op == wire::KvOp::kGet)
      req = wire::encode_kv_request(rec.op, key);
    else
      req = wire::encode_kv_request(rec.op, key, wl.value_bytes(rec.key));
    per_client[i % c.workload.clients].push_back(std::move(req));
  }
  return per_client;
}


std::uint32_t slot_for(std::uint32_t max_payload) {
  const std::uint32_t need = max_payload + ring::SlotLayout::kHeader +
                             ring::SlotLayout::kTrailer;
  return (need + 63) / 64 * 64;
}

std::uint32_t effective_batch(const ExperimentConfig& c) {
  return c.workload.batch_size > 1 ? c.workload.batch_size
                                   : std::max<std::uint32_t>(
                                         1, c.rnic.doorbell_batch);
}

MetricsReport base_report(const ExperimentConfig& c) {
  MetricsReport r;
  r.scenario = c.scenario;
  r.pipeline = to_string(c.pipeline);
  r.seed = c.seed;
  r.config_echo = c.echo;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// rambda KVS

MetricsReport run_kvs_rambda(const ExperimentConfig& c, const RunHooks* hooks) {
  sim::Simulator sim(c.seed);
  const auto slot = slot_for(13 + c.workload.value_size);
  ring::PairConfig rcfg{1024, slot, true};
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(rcfg.capacity) * rcfg.slot_size;
  const auto clients = c.workload.clients;

  auto cmem = std::make_unique<mem::MemoryModel>(sim, c.memory, "client");
  cmem->register_region(layout::kClientResp, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto cnic = std::make_unique<rnic::Nic>(sim, *cmem, c.rnic, "client-nic");

  auto srv = make_rambda_server(sim, c, "server", clients, 0, rcfg, 256, false);
  const auto w = kv_wiring(c);
  srv.mem->register_region(layout::kApp, w.table_bytes, mem::MediaKind::kDram,
                           false);
  srv.mem->register_region(layout::kApp2, w.slab_bytes, mem::MediaKind::kDram,
                           false);
  srv.mem->register_region(layout::kApp3, w.chain_bytes, mem::MediaKind::kDram,
                           false);
  apps::KvStore store(*srv.mem, w.store_cfg);
  apps::KvsApp app(store, c.accel);
  srv.cpu_host->set_alloc_pool(layout::kApp3 + w.chain_bytes / 2,
                               w.chain_bytes / 2, apps::KvStore::kBucketStride);
  preload_store(store, c);

  LatencyRecorder lat;
  ClientFleet fleet(sim, c.workload, lat);
  std::vector<std::unique_ptr<rnic::QueuePair>> qps;
  auto streams = kv_request_streams(c);
  const auto batch = effective_batch(c);
  for (std::uint32_t i = 0; i < clients; ++i) {
    qps.push_back(std::make_unique<rnic::QueuePair>(i, *cnic, *srv.nic));
    auto ep = connect_client(sim, c, srv, *cmem, *cnic, *qps[i], i,
                             layout::kClientResp + i * ring_bytes, &app, batch);
    auto& conn = fleet.add_conn(std::move(ep), qps[i].get());
    conn.requests = std::move(streams[i]);
  }
  auto* fl = &fleet;
  cmem->add_write_observer(
      [fl, ring_bytes, clients](std::uint64_t a, std::uint64_t) {
        if (a >= layout::kClientResp &&
            a < layout::kClientResp + clients * ring_bytes)
          fl->note_response_write(
              static_cast<std::uint32_t>((a - layout::kClientResp) / ring_bytes));
      });
  if (hooks && hooks->on_response) fleet.set_on_response(hooks->on_response);

  srv.engine->start();
  srv.cpu_host->start();
  fleet.start();
  sim.run();
  if (!fleet.done())
    throw std::runtime_error("kvs rambda: workload did not drain");

  auto r = base_report(c);
  r.issued = fleet.issued();
  r.fill_from(lat, fleet.first_post(), fleet.last_done());
  r.failed = r.issued - r.completed;
  collect_counters(r, sim, srv.mem.get(), cmem.get(), srv.nic.get(),
                   cnic.get(), srv.engine.get());
  r.counters["kvs.get_ops"] = app.get_ops();
  r.counters["kvs.get_lines"] = app.get_lines();
  r.counters["kvs.put_ops"] = app.put_ops();
  r.counters["kvs.put_lines"] = app.put_lines();
  r.counters["kvs.update_ops"] = app.update_ops();
  return r;
}

// ---------------------------------------------------------------------------
// CPU two-sided RPC baseline (MICA-style, keyhash-partitioned cores)

namespace {

struct PlainConnParts {
  std::unique_ptr<ring::ClientEndpoint> client_ep;
  std::unique_ptr<ring::ServerEndpoint> server_ep;
  std::unique_ptr<accel::BatchedWqePoster> poster;
};

// Client posts one WQE per request (no pointer entry; the server CPU polls).
PlainConnParts connect_plain(sim::Simulator& sim, const ExperimentConfig& c,
                             mem::MemoryModel& smem, rnic::QueuePair& qp,
                             mem::MemoryModel& cmem, std::uint64_t req_base,
                             std::uint64_t resp_base, ring::PairConfig cfg) {
  PlainConnParts parts;
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(cfg.capacity) * cfg.slot_size;
  parts.client_ep = std::make_unique<ring::ClientEndpoint>(
      cfg, cmem.raw(resp_base, ring_bytes),
      [&qp, req_base, cfg](std::uint64_t count,
                           std::span<const std::uint8_t> image) {
        rnic::Wqe slot;
        slot.remote_addr =
            req_base + (count & (cfg.capacity - 1)) * cfg.slot_size;
        slot.payload.assign(image.begin(), image.end());
        slot.signaled = true;
        qp.post(rnic::QpEnd::kA, std::move(slot));
        qp.ring_doorbell(rnic::QpEnd::kA, 1, mem::Origin::kCpu);
      });
  parts.poster = std::make_unique<accel::BatchedWqePoster>(
      sim, qp, rnic::QpEnd::kB, resp_base, cfg.slot_size, cfg.capacity, 1,
      c.rnic.signaled_interval, c.accel.doorbell_flush_ns, mem::Origin::kCpu);
  parts.server_ep = std::make_unique<ring::ServerEndpoint>(
      cfg, smem.raw(req_base, ring_bytes), parts.poster->writer());
  return parts;
}

struct CpuJob {
  sim::TimeNs arrival;
  std::uint32_t conn;
  std::uint64_t ring_count;
  std::vector<std::uint8_t> payload;
};

// Batching server core: collects `batch` requests, then processes them with
// memory accesses overlapped up to the mlp depth.
struct CpuCore {
  std::deque<CpuJob> q;
  sim::TimeNs busy = 0;
  bool flush_armed = false;
};

}  // namespace

MetricsReport run_kvs_cpu_rpc(const ExperimentConfig& c,
                              const RunHooks* hooks) {
  sim::Simulator sim(c.seed);
  const auto slot = slot_for(13 + c.workload.value_size);
  ring::PairConfig rcfg{1024, slot, true};
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(rcfg.capacity) * rcfg.slot_size;
  const auto clients = c.workload.clients;

  auto cmem = std::make_unique<mem::MemoryModel>(sim, c.memory, "client");
  cmem->register_region(layout::kClientResp, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto cnic = std::make_unique<rnic::Nic>(sim, *cmem, c.rnic, "client-nic");

  auto smem = std::make_unique<mem::MemoryModel>(sim, c.memory, "server");
  smem->register_region(layout::kReqRings, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto snic = std::make_unique<rnic::Nic>(sim, *smem, c.rnic, "server-nic");
  const auto w = kv_wiring(c);
  smem->register_region(layout::kApp, w.table_bytes, mem::MediaKind::kDram,
                        false);
  smem->register_region(layout::kApp2, w.slab_bytes, mem::MediaKind::kDram,
                        false);
  smem->register_region(layout::kApp3, w.chain_bytes, mem::MediaKind::kDram,
                        false);
  apps::KvStore store(*smem, w.store_cfg);
  preload_store(store, c);

  LatencyRecorder lat;
  ClientFleet fleet(sim, c.workload, lat);
  std::vector<std::unique_ptr<rnic::QueuePair>> qps;
  std::vector<PlainConnParts> conns;
  auto streams = kv_request_streams(c);
  for (std::uint32_t i = 0; i < clients; ++i) {
    qps.push_back(std::make_unique<rnic::QueuePair>(i, *cnic, *snic));
    auto parts = connect_plain(sim, c, *smem, *qps[i], *cmem,
                               layout::kReqRings + i * ring_bytes,
                               layout::kClientResp + i * ring_bytes, rcfg);
    auto& conn = fleet.add_conn(std::move(parts.client_ep), qps[i].get());
    conn.requests = std::move(streams[i]);
    conns.push_back(std::move(parts));
  }

  const auto batch = effective_batch(c);
  const auto mlp = std::max<std::uint32_t>(
      1, std::min(batch, c.baseline.cpu_mlp));
  auto cores = std::make_unique<std::vector<CpuCore>>(c.baseline.cpu_cores);
  auto* mem_ptr = smem.get();
  auto* store_ptr = &store;
  auto* cores_ptr = cores.get();
  auto* conns_ptr = &conns;
  const auto overhead = c.baseline.cpu_req_overhead_ns;
  const auto flush_ns = c.accel.doorbell_flush_ns;

  // Processes up to `batch` queued jobs on one core.
  auto process = std::make_shared<std::function<void(std::uint32_t)>>();
  *process = [&sim, cores_ptr, conns_ptr, store_ptr, mem_ptr, batch, mlp,
              overhead](std::uint32_t core_id) {
    auto& core = (*cores_ptr)[core_id];
    if (core.q.empty()) return;
    const auto n = std::min<std::size_t>(batch, core.q.size());
    sim::TimeNs t = std::max(sim.now(), core.busy);
    for (std::size_t j = 0; j < n; ++j) {
      auto job = std::move(core.q.front());
      core.q.pop_front();
      wire::Reader r(job.payload);
      const auto op = static_cast<wire::KvOp>(r.u8());
      const auto klen = r.u16();
      auto key = r.bytes(klen);
      apps::KvStore::Trace trace;
      std::vector<std::uint8_t> resp;
      if (op == wire::KvOp::kGet) {
        auto v = store_ptr->get(key, &trace);
        resp = v ? wire::encode_kv_response(wire::Status::kOk, *v)
                 : wire::encode_kv_response(wire::Status::kNotFound);
      } else {
        const auto vlen = r.u16();
        auto value = r.bytes(vlen);
        const auto st = op == wire::KvOp::kPut
                            ? store_ptr->put(key, value, &trace)
                            : store_ptr->update(key, value, &trace);
        resp = wire::encode_kv_response(st);
      }
      std::uint64_t mem_ns = 0;
      for (const auto& a : trace)
        mem_ns += mem_ptr->access(mem::AccessRequest{
            a.addr, a.size,
            a.write ? mem::AccessOp::kWrite : mem::AccessOp::kRead,
            mem::Origin::kCpu, false});
      t += overhead + mem_ns / mlp;
      const auto conn = job.conn;
      const auto count = job.ring_count;
      sim.schedule(t - sim.now(), [conns_ptr, conn, count,
                                   resp = std::move(resp)] {
        (*conns_ptr)[conn].server_ep->try_post_response(count, resp);
      });
    }
    core.busy = t;
  };

  // Request-ring drain: polled after arrivals; keyhash picks the owner core.
  auto drain = [&sim, conns_ptr, cores_ptr, process, batch,
                flush_ns](std::uint32_t conn) {
    auto& ep = *(*conns_ptr)[conn].server_ep;
    while (true) {
      const auto count = ep.consumed();
      auto msg = ep.try_consume_request();
      if (!msg) break;
      wire::Reader r(*msg);
      r.u8();
      const auto klen = r.u16();
      const auto key = r.bytes(klen);
      const auto core_id = static_cast<std::uint32_t>(
          wire::fnv1a64(key) % cores_ptr->size());
      auto& core = (*cores_ptr)[core_id];
      core.q.push_back(CpuJob{sim.now(), conn, count, std::move(*msg)});
      if (core.q.size() >= batch) {
        (*process)(core_id);
      } else if (!core.flush_armed) {
        core.flush_armed = true;
        sim.schedule(flush_ns, [cores_ptr, process, core_id] {
          (*cores_ptr)[core_id].flush_armed = false;
          (*process)(core_id);
        });
      }
    }
  };

  auto drain_pending = std::make_shared<std::vector<bool>>(clients, false);
  smem->add_write_observer([&sim, drain, drain_pending, ring_bytes, clients](
                               std::uint64_t a, std::uint64_t) {
    if (a < layout::kReqRings || a >= layout::kReqRings + clients * ring_bytes)
      return;
    const auto conn =
        static_cast<std::uint32_t>((a - layout::kReqRings) / ring_bytes);
    if ((*drain_pending)[conn]) return;
    (*drain_pending)[conn] = true;
    sim.schedule(100, [drain, drain_pending, conn] {
      (*drain_pending)[conn] = false;
      drain(conn);
    });
  });

  auto* fl = &fleet;
  cmem->add_write_observer(
      [fl, ring_bytes, clients](std::uint64_t a, std::uint64_t) {
        if (a >= layout::kClientResp &&
            a < layout::kClientResp + clients * ring_bytes)
          fl->note_response_write(
              static_cast<std::uint32_t>((a - layout::kClientResp) / ring_bytes));
      });
  if (hooks && hooks->on_response) fleet.set_on_response(hooks->on_response);

  fleet.start();
  sim.run();
  if (!fleet.done())
    throw std::runtime_error("kvs cpu_rpc: workload did not drain");

  auto r = base_report(c);
  r.issued = fleet.issued();
  r.fill_from(lat, fleet.first_post(), fleet.last_done());
  r.failed = r.issued - r.completed;
  collect_counters(r, sim, smem.get(), cmem.get(), snic.get(), cnic.get(),
                   nullptr);
  return r;
}

// ---------------------------------------------------------------------------
// Smart NIC baseline: wimpy cores plus an on-board LRU cache; misses pay a
// PCIe round trip into host memory.

namespace {

class LruCache {
 public:
  explicit LruCache(std::uint64_t capacity_bytes) : cap_(capacity_bytes) {}

  bool touch(std::uint64_t id, std::uint32_t bytes) {
    auto it = map_.find(id);
    if (it != map_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return true;
    }
    while (used_ + bytes > cap_ && !lru_.empty()) {
      auto& back = lru_.back();
      used_ -= back.second;
      map_.erase(back.first);
      lru_.pop_back();
    }
    lru_.emplace_front(id, bytes);
    map_[id] = lru_.begin();
    used_ += bytes;
    return false;
  }

 private:
  std::uint64_t cap_;
  std::uint64_t used_ = 0;
  std::list<std::pair<std::uint64_t, std::uint32_t>> lru_;
  std::unordered_map<std::uint64_t,
                     std::list<std::pair<std::uint64_t, std::uint32_t>>::iterator>
      map_;
};

}  // namespace

MetricsReport run_kvs_smartnic(const ExperimentConfig& c,
                               const RunHooks* hooks) {
  sim::Simulator sim(c.seed);
  const auto slot = slot_for(13 + c.workload.value_size);
  ring::PairConfig rcfg{1024, slot, true};
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(rcfg.capacity) * rcfg.slot_size;
  const auto clients = c.workload.clients;

  auto cmem = std::make_unique<mem::MemoryModel>(sim, c.memory, "client");
  cmem->register_region(layout::kClientResp, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto cnic = std::make_unique<rnic::Nic>(sim, *cmem, c.rnic, "client-nic");

  auto smem = std::make_unique<mem::MemoryModel>(sim, c.memory, "server");
  smem->register_region(layout::kReqRings, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto snic = std::make_unique<rnic::Nic>(sim, *smem, c.rnic, "server-nic");
  const auto w = kv_wiring(c);
  smem->register_region(layout::kApp, w.table_bytes, mem::MediaKind::kDram,
                        false);
  smem->register_region(layout::kApp2, w.slab_bytes, mem::MediaKind::kDram,
                        false);
  smem->register_region(layout::kApp3, w.chain_bytes, mem::MediaKind::kDram,
                        false);
  apps::KvStore store(*smem, w.store_cfg);
  preload_store(store, c);

  const auto data_bytes =
      w.table_bytes + c.workload.key_space * c.kvs.pair_slot_bytes;
  auto cache = std::make_unique<LruCache>(static_cast<std::uint64_t>(
      data_bytes * c.baseline.smartnic_cache_fraction));

  LatencyRecorder lat;
  ClientFleet fleet(sim, c.workload, lat);
  std::vector<std::unique_ptr<rnic::QueuePair>> qps;
  std::vector<PlainConnParts> conns;
  auto streams = kv_request_streams(c);
  for (std::uint32_t i = 0; i < clients; ++i) {
    qps.push_back(std::make_unique<rnic::QueuePair>(i, *cnic, *snic));
    auto parts = connect_plain(sim, c, *smem, *qps[i], *cmem,
                               layout::kReqRings + i * ring_bytes,
                               layout::kClientResp + i * ring_bytes, rcfg);
    auto& conn = fleet.add_conn(std::move(parts.client_ep), qps[i].get());
    conn.requests = std::move(streams[i]);
    conns.push_back(std::move(parts));
  }

  const auto batch = effective_batch(c);
  const auto mlp = std::max<std::uint32_t>(
      1, std::min(batch, c.baseline.cpu_mlp));
  auto cores =
      std::make_unique<std::vector<CpuCore>>(c.baseline.smartnic_cores);
  auto* mem_ptr = smem.get();
  auto* store_ptr = &store;
  auto* cores_ptr = cores.get();
  auto* conns_ptr = &conns;
  auto* cache_ptr = cache.get();
  const auto& bl = c.baseline;
  const auto flush_ns = c.accel.doorbell_flush_ns;

  auto process = std::make_shared<std::function<void(std::uint32_t)>>();
  *process = [&sim, cores_ptr, conns_ptr, store_ptr, mem_ptr, cache_ptr, batch,
              mlp, bl](std::uint32_t core_id) {
    auto& core = (*cores_ptr)[core_id];
    if (core.q.empty()) return;
    const auto n = std::min<std::size_t>(batch, core.q.size());
    sim::TimeNs t = std::max(sim.now(), core.busy);
    for (std::size_t j = 0; j < n; ++j) {
      auto job = std::move(core.q.front());
      core.q.pop_front();
      wire::Reader r(job.payload);
      const auto op = static_cast<wire::KvOp>(r.u8());
      const auto klen = r.u16();
      auto key = r.bytes(klen);
      apps::KvStore::Trace trace;
      std::vector<std::uint8_t> resp;
      if (op == wire::KvOp::kGet) {
        auto v = store_ptr->get(key, &trace);
        resp = v ? wire::encode_kv_response(wire::Status::kOk, *v)
                 : wire::encode_kv_response(wire::Status::kNotFound);
      } else {
        const auto vlen = r.u16();
        auto value = r.bytes(vlen);
        const auto st = op == wire::KvOp::kPut
                            ? store_ptr->put(key, value, &trace)
                            : store_ptr->update(key, value, &trace);
        resp = wire::encode_kv_response(st);
      }
      // On-board cache in front of host memory; misses cross PCIe.
      std::uint64_t miss_ns = 0, local_ns = 0;
      for (const auto& a : trace) {
        const bool hit = cache_ptr->touch(a.addr, a.size);
        if (hit && !a.write) {
          local_ns += bl.smartnic_local_ns;
          continue;
        }
        const auto host = mem_ptr->access(mem::AccessRequest{
            a.addr, a.size,
            a.write ? mem::AccessOp::kWrite : mem::AccessOp::kRead,
            mem::Origin::kDma, false});
        mem_ptr->pcie_transfer(sim.now(), a.size);
        miss_ns += bl.smartnic_pcie_rt_ns + host;
        if (a.write) local_ns += bl.smartnic_local_ns;  // cache update
      }
      t += bl.smartnic_service_ns + local_ns + miss_ns / mlp;
      const auto conn = job.conn;
      const auto count = job.ring_count;
      sim.schedule(t - sim.now(), [conns_ptr, conn, count,
                                   resp = std::move(resp)] {
        (*conns_ptr)[conn].server_ep->try_post_response(count, resp);
      });
    }
    core.busy = t;
  };

  auto drain = [&sim, conns_ptr, cores_ptr, process, batch,
                flush_ns](std::uint32_t conn) {
    auto& ep = *(*conns_ptr)[conn].server_ep;
    while (true) {
      const auto count = ep.consumed();
      auto msg = ep.try_consume_request();
      if (!msg) break;
      wire::Reader r(*msg);
      r.u8();
      const auto klen = r.u16();
      const auto key = r.bytes(klen);
      const auto core_id = static_cast<std::uint32_t>(
          wire::fnv1a64(key) % cores_ptr->size());
      auto& core = (*cores_ptr)[core_id];
      core.q.push_back(CpuJob{sim.now(), conn, count, std::move(*msg)});
      if (core.q.size() >= batch) {
        (*process)(core_id);
      } else if (!core.flush_armed) {
        core.flush_armed = true;
        sim.schedule(flush_ns, [cores_ptr, process, core_id] {
          (*cores_ptr)[core_id].flush_armed = false;
          (*process)(core_id);
        });
      }
    }
  };

  auto drain_pending = std::make_shared<std::vector<bool>>(clients, false);
  smem->add_write_observer([&sim, drain, drain_pending, ring_bytes, clients](
                               std::uint64_t a, std::uint64_t) {
    if (a < layout::kReqRings || a >= layout::kReqRings + clients * ring_bytes)
      return;
    const auto conn =
        static_cast<std::uint32_t>((a - layout::kReqRings) / ring_bytes);
    if ((*drain_pending)[conn]) return;
    (*drain_pending)[conn] = true;
    sim.schedule(100, [drain, drain_pending, conn] {
      (*drain_pending)[conn] = false;
      drain(conn);
    });
  });

  auto* fl = &fleet;
  cmem->add_write_observer(
      [fl, ring_bytes, clients](std::uint64_t a, std::uint64_t) {
        if (a >= layout::kClientResp &&
            a < layout::kClientResp + clients * ring_bytes)
          fl->note_response_write(
              static_cast<std::uint32_t>((a - layout::kClientResp) / ring_bytes));
      });
  if (hooks && hooks->on_response) fleet.set_on_response(hooks->on_response);

  fleet.start();
  sim.run();
  if (!fleet.done())
    throw std::runtime_error("kvs smartnic: workload did not drain");

  auto r = base_report(c);
  r.issued = fleet.issued();
  r.fill_from(lat, fleet.first_post(), fleet.last_done());
  r.failed = r.issued - r.completed;
  collect_counters(r, sim, smem.get(), cmem.get(), snic.get(), cnic.get(),
                   nullptr);
  return r;
}

// ---------------------------------------------------------------------------
// DLRM pipelines

namespace {

std::vector<std::vector<std::vector<std::uint8_t>>> dlrm_request_streams(
    const ExperimentConfig& c) {
  DlrmWorkload wl(c.workload, c.dlrm.tables, c.dlrm.rows_per_table, c.seed);
  std::vector<std::vector<std::vector<std::uint8_t>>> per_client(
      c.workload.clients);
  for (std::uint64_t i = 0; i < c.workload.request_count; ++i)
    per_client[i % c.workload.clients].push_back(
        wire::encode_dlrm_request(wl.next()));
  return per_client;
}

std::uint32_t dlrm_slot(const ExperimentConfig& c) {
  const auto req = 3 + c.dlrm.tables * (2 + 4 * c.workload.dlrm_max_query);
  const auto resp = 2 + c.dlrm.tables * c.dlrm.dim * 4;
  return slot_for(std::max<std::uint32_t>(req, resp));
}

}  // namespace

MetricsReport run_dlrm_rambda(const ExperimentConfig& c,
                              const RunHooks* hooks) {
  sim::Simulator sim(c.seed);
  const auto slot = dlrm_slot(c);
  ring::PairConfig rcfg{1024, slot, true};
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(rcfg.capacity) * rcfg.slot_size;
  const auto clients = c.workload.clients;

  auto cmem = std::make_unique<mem::MemoryModel>(sim, c.memory, "client");
  cmem->register_region(layout::kClientResp, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto cnic = std::make_unique<rnic::Nic>(sim, *cmem, c.rnic, "client-nic");

  auto srv = make_rambda_server(sim, c, "server", clients, 0, rcfg, slot,
                                false);
  apps::DlrmConfig dcfg;
  dcfg.tables = c.dlrm.tables;
  dcfg.rows_per_table = c.dlrm.rows_per_table;
  dcfg.dim = c.dlrm.dim;
  dcfg.table_base = layout::kApp;
  dcfg.fc_latency_ns = c.dlrm.fc_latency_ns;
  srv.mem->register_region(layout::kApp, dcfg.total_bytes(),
                           mem::MediaKind::kDram, false, c.dlrm.accel_local);
  apps::init_embedding_tables(*srv.mem, dcfg, c.seed);
  apps::DlrmApp app(dcfg, *srv.mem);

  LatencyRecorder lat;
  ClientFleet fleet(sim, c.workload, lat);
  std::vector<std::unique_ptr<rnic::QueuePair>> qps;
  auto streams = dlrm_request_streams(c);
  const auto batch = effective_batch(c);
  for (std::uint32_t i = 0; i < clients; ++i) {
    qps.push_back(std::make_unique<rnic::QueuePair>(i, *cnic, *srv.nic));
    auto ep = connect_client(sim, c, srv, *cmem, *cnic, *qps[i], i,
                             layout::kClientResp + i * ring_bytes, &app, batch);
    auto& conn = fleet.add_conn(std::move(ep), qps[i].get());
    conn.requests = std::move(streams[i]);
  }
  auto* fl = &fleet;
  cmem->add_write_observer(
      [fl, ring_bytes, clients](std::uint64_t a, std::uint64_t) {
        if (a >= layout::kClientResp &&
            a < layout::kClientResp + clients * ring_bytes)
          fl->note_response_write(
              static_cast<std::uint32_t>((a - layout::kClientResp) / ring_bytes));
      });
  if (hooks && hooks->on_response) fleet.set_on_response(hooks->on_response);

  srv.engine->start();
  srv.cpu_host->start();
  fleet.start();
  sim.run();
  if (!fleet.done())
    throw std::runtime_error("dlrm rambda: workload did not drain");

  auto r = base_report(c);
  r.issued = fleet.issued();
  r.fill_from(lat, fleet.first_post(), fleet.last_done());
  r.failed = r.issued - r.completed;
  collect_counters(r, sim, srv.mem.get(), cmem.get(), srv.nic.get(),
                   cnic.get(), srv.engine.get());
  r.counters["dlrm.queries"] = app.queries_done();
  r.counters["dlrm.peak_outstanding_rows"] = app.peak_outstanding_rows();
  r.counters["cpu_service.calls"] = srv.cpu_host->calls_served();
  r.counters["cpu_service.busy_ns"] = srv.cpu_host->busy_ns();
  return r;
}

MetricsReport run_dlrm_cpu_rpc(const ExperimentConfig& c,
                               const RunHooks* hooks) {
  sim::Simulator sim(c.seed);
  const auto slot = dlrm_slot(c);
  ring::PairConfig rcfg{1024, slot, true};
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(rcfg.capacity) * rcfg.slot_size;
  const auto clients = c.workload.clients;

  auto cmem = std::make_unique<mem::MemoryModel>(sim, c.memory, "client");
  cmem->register_region(layout::kClientResp, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto cnic = std::make_unique<rnic::Nic>(sim, *cmem, c.rnic, "client-nic");
  auto smem = std::make_unique<mem::MemoryModel>(sim, c.memory, "server");
  smem->register_region(layout::kReqRings, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto snic = std::make_unique<rnic::Nic>(sim, *smem, c.rnic, "server-nic");

  LatencyRecorder lat;
  ClientFleet fleet(sim, c.workload, lat);
  std::vector<std::unique_ptr<rnic::QueuePair>> qps;
  std::vector<PlainConnParts> conns;
  auto streams = dlrm_request_streams(c);
  for (std::uint32_t i = 0; i < clients; ++i) {
    qps.push_back(std::make_unique<rnic::QueuePair>(i, *cnic, *snic));
    auto parts = connect_plain(sim, c, *smem, *qps[i], *cmem,
                               layout::kReqRings + i * ring_bytes,
                               layout::kClientResp + i * ring_bytes, rcfg);
    auto& conn = fleet.add_conn(std::move(parts.client_ep), qps[i].get());
    conn.requests = std::move(streams[i]);
    conns.push_back(std::move(parts));
  }

  auto cores = std::make_unique<std::vector<CpuCore>>(c.baseline.cpu_cores);
  auto* cores_ptr = cores.get();
  auto* conns_ptr = &conns;
  auto* mem_ptr = smem.get();
  const auto row_bytes = static_cast<std::uint64_t>(c.dlrm.dim) * 4;
  const auto row_ns = c.baseline.cpu_dlrm_row_ns;
  const auto pre_ns = c.cpu_services.preprocess_ns;
  const auto overhead = c.baseline.cpu_req_overhead_ns;

  // Each query runs on one core: parse + preprocess + per-row gather rate,
  // bounded by the shared host memory bandwidth bucket.
  auto handle = [&sim, cores_ptr, conns_ptr, mem_ptr, row_bytes, row_ns,
                 pre_ns, overhead](std::uint32_t conn) {
    auto& ep = *(*conns_ptr)[conn].server_ep;
    while (true) {
      const auto count = ep.consumed();
      auto msg = ep.try_consume_request();
      if (!msg) break;
      wire::Reader r(*msg);
      auto q = wire::decode_dlrm_request(r);
      std::uint64_t rows = 0;
      for (const auto& t : q.table_indices) rows += t.size();
      std::uint32_t best = 0;
      for (std::uint32_t k = 1; k < cores_ptr->size(); ++k)
        if ((*cores_ptr)[k].busy < (*cores_ptr)[best].busy) best = k;
      auto& core = (*cores_ptr)[best];
      const auto t0 = std::max(sim.now(), core.busy);
      const auto compute_done = t0 + overhead + pre_ns + rows * row_ns;
      const auto bw_done = mem_ptr->host_mem_transfer(t0, rows * row_bytes);
      const auto done = std::max(compute_done, bw_done);
      core.busy = done;
      std::vector<std::uint8_t> resp;
      wire::put_u8(resp, 0);
      const auto cc = count;
      sim.schedule(done - sim.now(), [conns_ptr, conn, cc,
                                      resp = std::move(resp)] {
        (*conns_ptr)[conn].server_ep->try_post_response(cc, resp);
      });
    }
  };

  auto drain_pending = std::make_shared<std::vector<bool>>(clients, false);
  smem->add_write_observer([&sim, handle, drain_pending, ring_bytes, clients](
                               std::uint64_t a, std::uint64_t) {
    if (a < layout::kReqRings || a >= layout::kReqRings + clients * ring_bytes)
      return;
    const auto conn =
        static_cast<std::uint32_t>((a - layout::kReqRings) / ring_bytes);
    if ((*drain_pending)[conn]) return;
    (*drain_pending)[conn] = true;
    sim.schedule(100, [handle, drain_pending, conn] {
      (*drain_pending)[conn] = false;
      handle(conn);
    });
  });

  auto* fl = &fleet;
  cmem->add_write_observer(
      [fl, ring_bytes, clients](std::uint64_t a, std::uint64_t) {
        if (a >= layout::kClientResp &&
            a < layout::kClientResp + clients * ring_bytes)
          fl->note_response_write(
              static_cast<std::uint32_t>((a - layout::kClientResp) / ring_bytes));
      });
  if (hooks && hooks->on_response) fleet.set_on_response(hooks->on_response);

  fleet.start();
  sim.run();
  if (!fleet.done())
    throw std::runtime_error("dlrm cpu_rpc: workload did not drain");

  auto r = base_report(c);
  r.issued = fleet.issued();
  r.fill_from(lat, fleet.first_post(), fleet.last_done());
  r.failed = r.issued - r.completed;
  collect_counters(r, sim, smem.get(), cmem.get(), snic.get(), cnic.get(),
                   nullptr);
  return r;
}

// ---------------------------------------------------------------------------
// TX pipelines: 2-node emulated chain (client -> port-0 replica -> forwarder
// -> port-1 replica -> back), rings and redo logs in NVM.

namespace {

std::uint32_t tx_slot(const ExperimentConfig& c) {
  const auto req = 4 + c.workload.tx_write_count * (12 + c.tx.value_size) +
                   c.workload.tx_read_count * 8 + 16;
  const auto resp = 2 + c.workload.tx_read_count * (4 + c.tx.value_size) + 16;
  return slot_for(std::max<std::uint32_t>(req, resp));
}

std::vector<std::vector<std::vector<std::uint8_t>>> tx_request_streams(
    const ExperimentConfig& c) {
  TxWorkload wl(c.workload, c.tx.data_len, c.tx.value_size, c.seed);
  std::vector<std::vector<std::vector<std::uint8_t>>> per_client(
      c.workload.clients);
  for (std::uint64_t i = 0; i < c.workload.request_count; ++i)
    per_client[i % c.workload.clients].push_back(
        wire::encode_txn_request(wl.next()));
  return per_client;
}

}  // namespace

MetricsReport run_tx_rambda(const ExperimentConfig& c, const RunHooks* hooks) {
  sim::Simulator sim(c.seed);
  const auto slot = tx_slot(c);
  ring::PairConfig rcfg{1024, slot, true};
  const std::uint64_t ring_bytes =
      static_cast<std::uint64_t>(rcfg.capacity) * rcfg.slot_size;
  const auto clients = c.workload.clients;

  auto cmem = std::make_unique<mem::MemoryModel>(sim, c.memory, "client");
  cmem->register_region(layout::kClientResp, clients * ring_bytes,
                        mem::MediaKind::kDram, true);
  auto cnic = std::make_unique<rnic::Nic>(sim, *cmem, c.rnic, "client-nic");

  // Head replica serves the clients plus one chain-ack resume ring; the tail
  // replica serves one chain request ring. Request rings live in NVM.
  auto r1 = make_rambda_server(sim, c, "replica0", clients, 1, rcfg, 256,
                               true);
  auto r2 = make_rambda_server(sim, c, "replica1", 1, 0, rcfg, 256, true);
  r1.mem->register_region(layout::kChainResp, ring_bytes,
                          mem::MediaKind::kDram, true);

  apps::TxConfig tc1{layout::kApp, c.tx.data_len, layout::kApp2, c.tx.log_len,
                     c.tx.value_size, false};
  apps::TxConfig tc2 = tc1;
  tc2.tail = true;
  const auto d1 = r1.mem->register_region(layout::kApp, c.tx.data_len,
                                          mem::MediaKind::kNvm, false);
  const auto l1 = r1.mem->register_region(layout::kApp2, c.tx.log_len,
                                          mem::MediaKind::kNvm, false);
  const auto d2 = r2.mem->register_region(layout::kApp, c.tx.data_len,
                                          mem::MediaKind::kNvm, false);
  const auto l2 = r2.mem->register_region(layout::kApp2, c.tx.log_len,
                                          mem::MediaKind::kNvm, false);
  apps::TxApp app1(tc1, *r1.mem);
  apps::TxApp app2(tc2, *r2.mem);
  if (hooks && hooks->on_tx_replica) {
    hooks->on_tx_replica(*r1.mem, 0, d1, l1);
    hooks->on_tx_replica(*r2.mem, 1, d2, l2);
  }

  // Chain connection: replica0 is the client end; the forwarder hop adds the
  // configured extra latency each way.
  rnic::QueuePair chain_qp(1000, *r1.nic, *r2.nic, c.tx.forwarder_extra_ns);
  ring::PairConfig chain_cfg{1024, slot, false};
  const auto chain_req_base = server_ring_base(r2, 0);
  const auto r2_ptr_addr = r2.pb->entry_addr(0);
  auto chain_ep = std::make_unique<ring::ClientEndpoint>(
      chain_cfg, r1.mem->raw(layout::kChainResp, ring_bytes),
      [&chain_qp, chain_req_base, r2_ptr_addr, chain_cfg](
          std::uint64_t count, std::span<const std::uint8_t> image) {
        rnic::Wqe slotw;
        slotw.remote_addr =
            chain_req_base +
            (count & (chain_cfg.capacity - 1)) * chain_cfg.slot_size;
        slotw.payload.assign(image.begin(), image.end());
        chain_qp.post(rnic::QpEnd::kA, std::move(slotw));
        rnic::Wqe ptr;
        ptr.remote_addr = r2_ptr_addr;
        store_le32_vec(ptr.payload, static_cast<std::uint32_t>(count + 1));
        ptr.signaled = true;
        chain_qp.post(rnic::QpEnd::kA, std::move(ptr));
        chain_qp.ring_doorbell(rnic::QpEnd::kA, 2, mem::Origin::kAccel);
      });
  app1.set_successor(chain_ep.get());
  r1.engine->attach_resume_buffer(clients, chain_ep.get(), layout::kChainResp,
                                  accel::Engine::ResumeKind::kChainAck);
  r1.engine->add_cq(&chain_qp, rnic::QpEnd::kA);

  auto chain_poster = std::make_unique<accel::BatchedWqePoster>(
      sim, chain_qp, rnic::QpEnd::kB, layout::kChainResp, chain_cfg.slot_size,
      chain_cfg.capacity, 1, c.rnic.signaled_interval,
      c.accel.doorbell_flush_ns);
  chain_poster->set_pointer_entry(r1.pb->entry_addr(clients));
  auto chain_server_ep = std::make_unique<ring::ServerEndpoint>(
      chain_cfg, r2.mem->raw(chain_req_base, ring_bytes),
      chain_poster->writer());
  r2.engine->attach_app_buffer(0, chain_server_ep.get(), chain_req_base,
                               &app2);
  r2.engine->add_cq(&chain_qp, rnic::QpEnd::kB);

  LatencyRecorder lat;
  auto r = base_report(c);

  if (c.workload.tx_write_count == 0) {
    // Pure-read transactions bypass the chain: one-sided reads to the head.
    rnic::QueuePair qp(0, *cnic, *r1.nic);
    TxWorkload wl(c.workload, c.tx.data_len, c.tx.value_size, c.seed);
    std::vector<wire::TxnRequest> txns;
    for (std::uint64_t i = 0; i < c.workload.request_count; ++i)
      txns.push_back(wl.next());
    auto issued = std::make_shared<std::uint64_t>(0);
    auto last_done = std::make_shared<sim::TimeNs>(0);
    auto next = std::make_shared<std::function<void(std::uint64_t)>>();
    auto* simp = &sim;
    const auto read_size = c.tx.value_size;
    *next = [simp, &qp, &txns, &lat, issued, last_done, next,
             read_size](std::uint64_t i) {
      if (i >= txns.size()) return;
      ++*issued;
      const auto t0 = simp->now();
      const auto off = txns[i].read_offsets.empty()
                           ? 0
                           : txns[i].read_offsets.front();
      qp.rdma_read(rnic::QpEnd::kA, layout::kApp + off, read_size,
                   [simp, &lat, t0, last_done, next, i](
                       std::vector<std::uint8_t>, sim::TimeNs at) {
                     lat.record(at - t0);
                     *last_done = at;
                     (*next)(i + 1);
                   });
    };
    r1.engine->start();
    r2.engine->start();
    (*next)(0);
    sim.run();
    r.issued = *issued;
    r.fill_from(lat, 0, *last_done);
    r.failed = r.issued - r.completed;
    collect_counters(r, sim, r1.mem.get(), cmem.get(), r1.nic.get(),
                     cnic.get(), r1.engine.get());
    return r;
  }

  ClientFleet fleet(sim, c.workload, lat);
  std::vector<std::unique_ptr<rnic::QueuePair>> qps;
  auto streams = tx_request_streams(c);
  const auto batch = effective_batch(c);
  for (std::uint32_t i = 0; i < clients; ++i) {
    qps.push_back(std::make_unique<rnic::QueuePair>(i, *cnic, *r1.nic));
    auto ep = connect_client(sim, c, r1, *cmem, *cnic, *qps[i], i,
                             layout::kClientResp + i * ring_bytes, &app1,
                             batch);
    auto& conn = fleet.add_conn(std::move(ep), qps[i].get());
    conn.requests = std::move(streams[i]);
  }
  auto* fl = &fleet;
  cmem->add_write_observer(
      [fl, ring_bytes, clients](std::uint64_t a, std::uint64_t) {
        if (a >= layout::kClientResp &&
            a < layout::kClientResp + clients * ring_bytes)
          fl->note_response_write(
              static_cast<std::uint32_t>((a - layout::kClientResp) / ring_bytes));
      });
  if (hooks && hooks->on_response) fleet.set_on_response(hooks->on_response);

  r1.engine->start();
  r2.engine->start();
  r1.cpu_host->start();
  r2.cpu_host->start();
  fleet.start();
  sim.run();
  if (!fleet.done())
    throw std::runtime_error("tx rambda: workload did not drain");

  r.issued = fleet.issued();
  r.fill_from(lat, fleet.first_post(), fleet.last_done());
  r.failed = r.issued - r.completed;
  collect_counters(r, sim, r1.mem.get(), cmem.get(), r1.nic.get(), cnic.get(),
                   r1.engine.get());
  sim::CounterSet extra;
  r2.mem->publish_counters(extra, "replica1.");
  for (const auto& [k, v] : extra.values()) r.counters[k] = v;
  r.counters["tx.committed_head"] = app1.committed();
  r.counters["tx.committed_tail"] = app2.committed();
  return r;
}

MetricsReport run_tx_hyperloop(const ExperimentConfig& c,
                               const RunHooks* hooks) {
  sim::Simulator sim(c.seed);
  const auto msg_slot = slot_for(16 + c.tx.value_size);
  const std::uint64_t inbox_slots = 1024;
  const std::uint64_t inbox_bytes = inbox_slots * msg_slot;

  auto cmem = std::make_unique<mem::MemoryModel>(sim, c.memory, "client");
  cmem->register_region(layout::kClientScratch, 4096, mem::MediaKind::kDram,
                        true);
  auto cnic = std::make_unique<rnic::Nic>(sim, *cmem, c.rnic, "client-nic");

  struct Replica {
    std::unique_ptr<mem::MemoryModel> mem;
    std::unique_ptr<rnic::Nic> nic;
    mem::RegionId data_region = 0, inbox_region = 0;
  };
  Replica r1, r2;
  for (auto* rep : {&r1, &r2}) {
    const char* name = rep == &r1 ? "replica0" : "replica1";
    rep->mem = std::make_unique<mem::MemoryModel>(sim, c.memory, name);
    rep->data_region = rep->mem->register_region(
        layout::kApp, c.tx.data_len, mem::MediaKind::kNvm, false);
    rep->inbox_region = rep->mem->register_region(
        layout::kApp2, inbox_bytes, mem::MediaKind::kNvm, false);
    rep->mem->register_region(layout::kClientScratch, 4096,
                              mem::MediaKind::kDram, true);
    rep->nic = std::make_unique<rnic::Nic>(sim, *rep->mem,
                                           c.rnic, std::string(name) + "-nic");
  }
  if (hooks && hooks->on_tx_replica) {
    hooks->on_tx_replica(*r1.mem, 0, r1.data_region, r1.inbox_region);
    hooks->on_tx_replica(*r2.mem, 1, r2.data_region, r2.inbox_region);
  }

  auto qp_c1 = std::make_unique<rnic::QueuePair>(0, *cnic, *r1.nic);
  auto qp_12 = std::make_unique<rnic::QueuePair>(1, *r1.nic, *r2.nic,
                                                 c.tx.forwarder_extra_ns);

  // RNIC-triggered group-write reflectors. A tuple message lands in the NVM
  // inbox (the durable log write), applies to the data region, and forwards
  // down the chain; acks propagate back through the same ports.
  auto apply_tuple = [](mem::MemoryModel& m, std::uint64_t inbox_addr) {
    std::vector<std::uint8_t> head(16);
    m.read_bytes(inbox_addr, head);
    wire::Reader r(head);
    const auto seq = r.u32();
    const auto len = r.u32();
    const auto off = r.u64();
    std::vector<std::uint8_t> data(len);
    m.read_bytes(inbox_addr + 16, data);
    m.write_bytes(layout::kApp + off, data);
    m.access(mem::AccessRequest{layout::kApp + off, len, mem::AccessOp::kWrite,
                                mem::Origin::kDma, false});
    return seq;
  };

  auto* m1 = r1.mem.get();
  auto* m2 = r2.mem.get();
  auto* q12 = qp_12.get();
  auto* qc1 = qp_c1.get();
  // Replica 1: apply and forward to replica 2.
  m1->add_write_observer([m1, q12, apply_tuple, msg_slot, inbox_bytes](
                             std::uint64_t a, std::uint64_t l) {
    if (a < layout::kApp2 || a >= layout::kApp2 + inbox_bytes) return;
    if (l < 16) return;  // ack or partial; inbox messages are whole slots
    apply_tuple(*m1, a);
    rnic::Wqe fwd;
    fwd.remote_addr = a;  // same slot index on the peer inbox
    fwd.payload.resize(l);
    m1->read_bytes(a, fwd.payload);
    q12->post(rnic::QpEnd::kA, std::move(fwd));
    q12->ring_doorbell(rnic::QpEnd::kA, 1, mem::Origin::kCpu);
  });
  // Replica 2 (tail): apply and ack back to replica 1's scratch.
  m2->add_write_observer([m2, q12, apply_tuple, inbox_bytes](
                             std::uint64_t a, std::uint64_t l) {
    if (a < layout::kApp2 || a >= layout::kApp2 + inbox_bytes) return;
    if (l < 16) return;
    const auto seq = apply_tuple(*m2, a);
    rnic::Wqe ack;
    ack.remote_addr = layout::kClientScratch;
    store_le32_vec(ack.payload, seq);
    q12->post(rnic::QpEnd::kB, std::move(ack));
    q12->ring_doorbell(rnic::QpEnd::kB, 1, mem::Origin::kCpu);
  });
  // Replica 1 relays the tail ack to the client (head commit).
  m1->add_write_observer([m1, qc1](std::uint64_t a, std::uint64_t l) {
    if (a != layout::kClientScratch || l != 4) return;
    std::vector<std::uint8_t> seq(4);
    m1->read_bytes(a, seq);
    rnic::Wqe ack;
    ack.remote_addr = layout::kClientScratch;
    ack.payload = seq;
    qc1->post(rnic::QpEnd::kB, std::move(ack));
    qc1->ring_doorbell(rnic::QpEnd::kB, 1, mem::Origin::kCpu);
  });

  // Client: per transaction, sequential one-sided reads to the head, then one
  // group write per tuple, each waiting for its chain ack.
  TxWorkload wl(c.workload, c.tx.data_len, c.tx.value_size, c.seed);
  std::vector<wire::TxnRequest> txns;
  for (std::uint64_t i = 0; i < c.workload.request_count; ++i)
    txns.push_back(wl.next());

  LatencyRecorder lat;
  struct Driver {
    std::uint64_t txn = 0;
    std::uint32_t read_i = 0;
    std::uint32_t write_i = 0;
    sim::TimeNs t0 = 0;
    std::uint32_t seq = 0;
    std::uint64_t issued = 0;
    sim::TimeNs last_done = 0;
  };
  auto drv = std::make_shared<Driver>();
  auto advance = std::make_shared<std::function<void()>>();
  auto* simp = &sim;
  const auto read_size = c.tx.value_size;

  auto start_txn = std::make_shared<std::function<void()>>();
  *advance = [simp, drv, &txns, &lat, start_txn]() {
    auto& d = *drv;
    lat.record(simp->now() - d.t0);
    d.last_done = simp->now();
    ++d.txn;
    (*start_txn)();
  };
  auto send_tuple = std::make_shared<std::function<void()>>();
  *send_tuple = [simp, drv, &txns, qc1, msg_slot, advance, send_tuple]() {
    auto& d = *drv;
    const auto& t = txns[d.txn];
    if (d.write_i >= t.writes.size()) {
      (*advance)();
      return;
    }
    const auto& w = t.writes[d.write_i++];
    std::vector<std::uint8_t> msg;
    wire::put_u32(msg, ++d.seq);
    wire::put_u32(msg, w.len);
    wire::put_u64(msg, w.offset);
    wire::put_bytes(msg, w.data);
    msg.resize(msg_slot);
    rnic::Wqe wqe;
    wqe.remote_addr = layout::kApp2 +
                      (d.seq % 1024) * static_cast<std::uint64_t>(msg_slot);
    wqe.payload = std::move(msg);
    qc1->post(rnic::QpEnd::kA, std::move(wqe));
    qc1->ring_doorbell(rnic::QpEnd::kA, 1, mem::Origin::kCpu);
    // the matching ack resumes send_tuple via the client scratch observer
  };
  auto do_read = std::make_shared<std::function<void()>>();
  *do_read = [simp, drv, &txns, qc1, read_size, do_read, send_tuple]() {
    auto& d = *drv;
    const auto& t = txns[d.txn];
    if (d.read_i >= t.read_offsets.size()) {
      (*send_tuple)();
      return;
    }
    const auto off = t.read_offsets[d.read_i++];
    qc1->rdma_read(rnic::QpEnd::kA, layout::kApp + off, read_size,
                   [do_read](std::vector<std::uint8_t>, sim::TimeNs) {
                     (*do_read)();
                   });
  };
  *start_txn = [drv, &txns, simp, do_read]() {
    auto& d = *drv;
    if (d.txn >= txns.size()) return;
    ++d.issued;
    d.read_i = 0;
    d.write_i = 0;
    d.t0 = simp->now();
    (*do_read)();
  };
  cmem->add_write_observer([send_tuple](std::uint64_t a, std::uint64_t l) {
    if (a == layout::kClientScratch && l == 4) (*send_tuple)();
  });

  (*start_txn)();
  sim.run();
  if (drv->txn != txns.size())
    throw std::runtime_error("tx hyperloop: workload did not drain");

  auto r = base_report(c);
  r.issued = drv->issued;
  r.fill_from(lat, 0, drv->last_done);
  r.failed = r.issued - r.completed;
  collect_counters(r, sim, r1.mem.get(), cmem.get(), r1.nic.get(), cnic.get(),
                   nullptr);
  sim::CounterSet extra;
  r2.mem->publish_counters(extra, "replica1.");
  for (const auto& [k, v] : extra.values()) r.counters[k] = v;
  (void)hooks;
  return r;
}

// ---------------------------------------------------------------------------
// Local CPU<->accelerator ping-pong (notification latency comparison)

PingPongReport run_pingpong(const ExperimentConfig& c, bool use_cpoll,
                            std::uint32_t interval_cycles) {
  sim::Simulator sim(c.seed);
  auto m = std::make_unique<mem::MemoryModel>(sim, c.memory, "server");
  constexpr std::uint64_t kBuf = 0x1000;      // 1 KB shared request buffer
  constexpr std::uint64_t kNoise = 0x100000;  // background access target
  m->register_region(kBuf, 1024, mem::MediaKind::kDram, false);
  m->register_region(kNoise, 1 << 20, mem::MediaKind::kDram, false);

  auto cfg = c.cpoll;
  cfg.poll_interval_cycles = interval_cycles;
  const auto iterations = c.pingpong.iterations;

  struct State {
    std::uint32_t iter = 0;
    sim::TimeNs write_time = 0;
    bool running = true;
    std::function<void()> on_done;
  };
  auto st = std::make_shared<State>();
  LatencyRecorder lat;
  auto* simp = &sim;
  auto* mp = m.get();

  // CPU side: write the buffer head, wait for the accelerator to write the
  // tail, then go again. The accel's tail write is visible one cc hop later.
  auto cpu_write = std::make_shared<std::function<void()>>();
  *cpu_write = [simp, mp, st] {
    if (st->iter >= 1) {
      // brief think time between iterations (CPU loop restart)
      (void)0;
    }
    st->write_time = simp->now();
    std::uint8_t v[4];
    const std::uint32_t x = st->iter + 1;
    v[0] = static_cast<std::uint8_t>(x);
    v[1] = static_cast<std::uint8_t>(x >> 8);
    v[2] = static_cast<std::uint8_t>(x >> 16);
    v[3] = static_cast<std::uint8_t>(x >> 24);
    mp->write_bytes(0x1000, v);
    mp->access(mem::AccessRequest{0x1000, 4, mem::AccessOp::kWrite,
                                  mem::Origin::kCpu, false});
  };

  // Accelerator reply: write the buffer tail; CPU spins locally and restarts
  // the loop one cc hop plus a small restart delay later.
  auto accel_reply = [simp, mp, st, cpu_write, iterations,
                      &lat](sim::TimeNs detect_time) {
    lat.record(detect_time - st->write_time);
    mp->write_bytes(0x1000 + 1020, std::span<const std::uint8_t>(
                                       reinterpret_cast<const std::uint8_t*>(
                                           &st->iter),
                                       4));
    mp->access(mem::AccessRequest{0x1000 + 1020, 4, mem::AccessOp::kWrite,
                                  mem::Origin::kAccel, false});
    ++st->iter;
    if (st->iter >= iterations) {
      st->running = false;
      if (st->on_done) st->on_done();
      return;
    }
    const auto restart =
        mp->config().cc_link_oneway_ns + 20;  // visibility + CPU turnaround
    simp->schedule(restart, [cpu_write] { (*cpu_write)(); });
  };

  std::unique_ptr<cpoll::CpollChecker> checker;
  std::unique_ptr<cpoll::SpinPoller> poller;
  if (use_cpoll) {
    checker = std::make_unique<cpoll::CpollChecker>(sim, *m, cfg);
    // Snoop the head line the CPU writes; the accel's own tail write must
    // not re-signal.
    checker->register_direct(0, kBuf, 64);
    auto* chk = checker.get();
    checker->set_sink([chk, accel_reply](const cpoll::CpollSignal& s) {
      chk->take(s.buffer_id);
      accel_reply(s.fire_time);
    });
    auto* chkp = checker.get();
    m->add_write_observer([chkp](std::uint64_t a, std::uint64_t l) {
      chkp->on_write(a, l);
    });
  } else {
    poller = std::make_unique<cpoll::SpinPoller>(
        sim, *m, cfg, kBuf,
        [accel_reply, st](std::uint32_t, sim::TimeNs at) {
          if (st->running) accel_reply(at);
        });
    st->on_done = [p = poller.get()] { p->stop(); };
    poller->start();
  }

  // Background noise: the accelerator issues a 64 B request every few cycles
  // while serving, contending for the cc link.
  if (c.pingpong.background_noise) {
    auto noise = std::make_shared<std::function<void(std::uint64_t)>>();
    auto rng = std::make_shared<sim::RngStream>(sim.stream("pingpong.noise"));
    const auto period = c.pingpong.noise_period_cycles;
    const auto mhz = cfg.accel_clock_mhz;
    *noise = [simp, mp, st, noise, rng, period, mhz](std::uint64_t cycle) {
      if (!st->running) return;
      const auto next_cycle = cycle + period;
      const auto at = next_cycle * 1000ull / mhz;
      simp->schedule(at - simp->now(), [simp, mp, st, noise, rng, next_cycle] {
        if (!st->running) return;
        const auto addr = 0x100000 + (rng->next_below((1 << 20) / 64)) * 64;
        mp->access(mem::AccessRequest{addr, 64, mem::AccessOp::kRead,
                                      mem::Origin::kAccel, false});
        (*noise)(next_cycle);
      });
    };
    (*noise)(0);
  }

  (*cpu_write)();
  sim.run();
  if (st->iter != iterations)
    throw std::runtime_error("pingpong: did not complete all iterations");

  PingPongReport r;
  r.mode = use_cpoll ? "cpoll" : "poll";
  r.interval_cycles = use_cpoll ? 0 : interval_cycles;
  r.iterations = iterations;
  r.mean_ns = lat.mean();
  r.p50_ns = lat.percentile(50.0);
  r.p99_ns = lat.percentile(99.0);
  r.duration_ns = sim.now();
  r.poll_count = poller ? poller->polls() : 0;
  r.poll_cc_bytes_per_s =
      r.duration_ns
          ? static_cast<double>(r.poll_count) * 64.0 * 1e9 / r.duration_ns
          : 0.0;
  r.samples = lat.samples();
  return r;
}

}  // namespace rambda::bench
