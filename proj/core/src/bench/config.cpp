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

#include "rambda/bench/config.hpp"

#include <fstream>
#include <set>

namespace rambda::bench {

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kRambda: return "rambda";
    case Pipeline::kCpuRpc: return "cpu_rpc";
    case Pipeline::kSmartNic: return "smartnic";
    case Pipeline::kHyperloop: return "hyperloop";
  }
  return "?";
}

std::string to_string(AppKind a) {
  switch (a) {
    case AppKind::kKvs: return "kvs";
    case AppKind::kTx: return "tx";
    case AppKind::kDlrm: return "dlrm";
    case AppKind::kPingPong: return "pingpong";
  }
  return "?";
}

namespace {

// Section reader that rejects unknown keys.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name)
      : j_(j), name_(std::move(name)) {
    if (!j_.is_object())
      throw std::invalid_argument("config: section '" + name_ +
                                  "' must be an object");
  }
  ~Section() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) out = it->get<T>();
  }
  void get_str(const char* key, std::string& out) { get<std::string>(key, out); }
  void mark(const char* key) { seen_.insert(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key()))
        throw std::invalid_argument("config: unknown key '" + name_ + "." +
                                    it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

Pipeline parse_pipeline(const std::string& s) {
  if (s == "rambda") return Pipeline::kRambda;
  if (s == "cpu_rpc") return Pipeline::kCpuRpc;
  if (s == "smartnic") return Pipeline::kSmartNic;
  if (s == "hyperloop") return Pipeline::kHyperloop;
  throw std::invalid_argument("config: unknown pipeline '" + s + "'");
}

AppKind parse_app(const std::string& s) {
  if (s == "kvs") return AppKind::kKvs;
  if (s == "tx") return AppKind::kTx;
  if (s == "dlrm") return AppKind::kDlrm;
  if (s == "pingpong") return AppKind::kPingPong;
  throw std::invalid_argument("config: unknown app '" + s + "'");
}

wire::AggregateOp parse_aggregate(const std::string& s) {
  if (s == "sum") return wire::AggregateOp::kSum;
  if (s == "max") return wire::AggregateOp::kMax;
  if (s == "min") return wire::AggregateOp::kMin;
  if (s == "inner_product") return wire::AggregateOp::kInnerProduct;
  throw std::invalid_argument("config: unknown aggregate_op '" + s + "'");
}

template <typename Fn>
void seen_section(Section& root, const nlohmann::json& doc, const char* key,
                  Fn&& fn) {
  root.mark(key);
  if (auto it = doc.find(key); it != doc.end()) fn(*it);
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
  ExperimentConfig c;
  c.echo = doc;
  Section root(doc, "");
  root.get("seed", c.seed);
  root.get_str("scenario", c.scenario);

  std::string pipeline = "rambda";
  root.get_str("pipeline", pipeline);
  c.pipeline = parse_pipeline(pipeline);

  seen_section(root, doc, "memory", [&](const nlohmann::json& s) {
    Section m(s, "memory");
    auto& mm = c.memory;
    m.get("dram_access_ns", mm.dram_access_ns);
    m.get("nvm_read_ns", mm.nvm_read_ns);
    m.get("nvm_write_ns", mm.nvm_write_ns);
    m.get("llc_access_ns", mm.llc_access_ns);
    m.get("cc_link_oneway_ns", mm.cc_link_oneway_ns);
    m.get("pcie_oneway_ns", mm.pcie_oneway_ns);
    m.get("cc_link_bw_bytes_per_ns", mm.cc_link_bw_bytes_per_ns);
    m.get("pcie_bw_bytes_per_ns", mm.pcie_bw_bytes_per_ns);
    m.get("host_mem_bw_bytes_per_ns", mm.host_mem_bw_bytes_per_ns);
    m.get("nvm_bw_bytes_per_ns", mm.nvm_bw_bytes_per_ns);
    m.get("nvm_write_granularity_bytes", mm.nvm_write_granularity_bytes);
    m.get("cacheline_bytes", mm.cacheline_bytes);
    m.get("accel_local_access_ns", mm.accel_local_access_ns);
    m.get("accel_local_bw_bytes_per_ns", mm.accel_local_bw_bytes_per_ns);
    m.get("llc_capacity_bytes", mm.llc_capacity_bytes);
    m.get("llc_ways", mm.llc_ways);
    m.get("llc_io_way_fraction", mm.llc_io_way_fraction);
    m.finish();
  });

  seen_section(root, doc, "rnic", [&](const nlohmann::json& s) {
    Section r(s, "rnic");
    auto& rr = c.rnic;
    r.get("network_oneway_ns", rr.network_oneway_ns);
    r.get("network_bw_bytes_per_ns", rr.network_bw_bytes_per_ns);
    r.get("signaled_interval", rr.signaled_interval);
    r.get("doorbell_batch", rr.doorbell_batch);
    r.get("opportunistic_probability", rr.opportunistic_prob);
    r.get("mmio_fence_cpu_ns", rr.mmio_fence_cpu_ns);
    r.get("mmio_fence_accel_ns", rr.mmio_fence_accel_ns);
    r.finish();
  });

  seen_section(root, doc, "accel", [&](const nlohmann::json& s) {
    Section a(s, "accel");
    auto& aa = c.accel;
    a.get("max_outstanding", aa.max_outstanding);
    a.get("apu_action_ns", aa.apu_action_ns);
    a.get("cq_poll_interval_ns", aa.cq_poll_interval_ns);
    a.get("doorbell_flush_ns", aa.doorbell_flush_ns);
    a.get("gather_issue_bytes_per_ns", aa.gather_issue_bytes_per_ns);
    a.finish();
  });

  seen_section(root, doc, "cpu_services", [&](const nlohmann::json& s) {
    Section a(s, "cpu_services");
    auto& cs = c.cpu_services;
    a.get("alloc_ns", cs.alloc_ns);
    a.get("preprocess_ns", cs.preprocess_ns);
    a.get("custom_ns", cs.custom_ns);
    a.get("cpu_poll_interval_ns", cs.cpu_poll_interval_ns);
    a.finish();
  });

  seen_section(root, doc, "cpoll", [&](const nlohmann::json& s) {
    Section p(s, "cpoll");
    std::string placement = "pinned_cache";
    p.get_str("placement", placement);
    if (placement == "pinned_cache")
      c.cpoll.placement = cpoll::Placement::kPinnedCache;
    else if (placement == "accel_memory")
      c.cpoll.placement = cpoll::Placement::kAccelMemory;
    else
      throw std::invalid_argument("config: unknown cpoll placement '" +
                                  placement + "'");
    p.get("pointer_buffer", c.cpoll.pointer_buffer);
    p.get("poll_interval_cycles", c.cpoll.poll_interval_cycles);
    p.get("accel_clock_mhz", c.cpoll.accel_clock_mhz);
    p.get("accel_cache_bytes", c.cpoll.accel_cache_bytes);
    p.finish();
  });

  seen_section(root, doc, "workload", [&](const nlohmann::json& s) {
    Section w(s, "workload");
    auto& ww = c.workload;
    std::string app = "kvs", dist = "uniform", op = "sum";
    w.get_str("app", app);
    ww.app = parse_app(app);
    w.get("key_space", ww.key_space);
    w.get_str("distribution", dist);
    if (dist == "uniform")
      ww.distribution = Distribution::kUniform;
    else if (dist == "zipfian")
      ww.distribution = Distribution::kZipfian;
    else
      throw std::invalid_argument("config: unknown distribution '" + dist +
                                  "'");
    w.get("zipf_theta", ww.zipf_theta);
    w.get("get_fraction", ww.get_fraction);
    w.get("put_fraction", ww.put_fraction);
    w.get("update_fraction", ww.update_fraction);
    w.get("request_count", ww.request_count);
    w.get("value_size", ww.value_size);
    w.get("clients", ww.clients);
    w.get("window", ww.window);
    w.get("interarrival_ns", ww.interarrival_ns);
    w.get("batch_size", ww.batch_size);
    w.get("preload", ww.preload);
    w.get("tx_read_count", ww.tx_read_count);
    w.get("tx_write_count", ww.tx_write_count);
    w.get("dlrm_min_query", ww.dlrm_min_query);
    w.get("dlrm_max_query", ww.dlrm_max_query);
    w.get_str("aggregate_op", op);
    if (op == "all") {
      ww.dlrm_cycle_ops = true;
    } else {
      ww.dlrm_op = parse_aggregate(op);
    }
    w.finish();
  });

  seen_section(root, doc, "baseline", [&](const nlohmann::json& s) {
    Section b(s, "baseline");
    auto& bb = c.baseline;
    b.get("cpu_cores", bb.cpu_cores);
    b.get("cpu_req_overhead_ns", bb.cpu_req_overhead_ns);
    b.get("cpu_mlp", bb.cpu_mlp);
    b.get("cpu_dlrm_row_ns", bb.cpu_dlrm_row_ns);
    b.get("smartnic_cores", bb.smartnic_cores);
    b.get("smartnic_service_ns", bb.smartnic_service_ns);
    b.get("smartnic_cache_fraction", bb.smartnic_cache_fraction);
    b.get("smartnic_local_ns", bb.smartnic_local_ns);
    b.get("smartnic_pcie_rt_ns", bb.smartnic_pcie_rt_ns);
    b.finish();
  });

  seen_section(root, doc, "kvs", [&](const nlohmann::json& s) {
    Section k(s, "kvs");
    k.get("bucket_count", c.kvs.bucket_count);
    k.get("pair_slot_bytes", c.kvs.pair_slot_bytes);
    k.finish();
  });

  seen_section(root, doc, "tx", [&](const nlohmann::json& s) {
    Section t(s, "tx");
    t.get("replicas", c.tx.replicas);
    t.get("forwarder_extra_ns", c.tx.forwarder_extra_ns);
    t.get("value_size", c.tx.value_size);
    t.get("data_len", c.tx.data_len);
    t.get("log_len", c.tx.log_len);
    t.finish();
  });

  seen_section(root, doc, "dlrm", [&](const nlohmann::json& s) {
    Section d(s, "dlrm");
    d.get("tables", c.dlrm.tables);
    d.get("rows_per_table", c.dlrm.rows_per_table);
    d.get("dim", c.dlrm.dim);
    d.get("fc_latency_ns", c.dlrm.fc_latency_ns);
    std::string placement = c.dlrm.accel_local ? "accel_local" : "host_dram";
    d.get_str("placement", placement);
    if (placement == "accel_local")
      c.dlrm.accel_local = true;
    else if (placement == "host_dram")
      c.dlrm.accel_local = false;
    else
      throw std::invalid_argument("config: unknown dlrm placement '" +
                                  placement + "'");
    d.finish();
  });

  seen_section(root, doc, "pingpong", [&](const nlohmann::json& s) {
    Section p(s, "pingpong");
    p.get("iterations", c.pingpong.iterations);
    p.get("poll_interval_cycles", c.pingpong.poll_interval_cycles);
    p.get("background_noise", c.pingpong.background_noise);
    p.get("noise_period_cycles", c.pingpong.noise_period_cycles);
    p.finish();
  });

  root.finish();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  memory.validate();
  workload.validate();
  if (workload.app == AppKind::kTx &&
      pipeline != Pipeline::kRambda && pipeline != Pipeline::kHyperloop)
    throw std::invalid_argument("config: tx supports rambda and hyperloop");
  if (workload.app == AppKind::kDlrm && pipeline == Pipeline::kSmartNic)
    throw std::invalid_argument("config: dlrm supports rambda and cpu_rpc");
  if (workload.app == AppKind::kKvs && pipeline == Pipeline::kHyperloop)
    throw std::invalid_argument("config: hyperloop is a tx pipeline");
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  return parse_config(doc);
}

}  // namespace rambda::bench
