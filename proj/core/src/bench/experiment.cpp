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

#include "rambda/bench/experiment.hpp"

#include <future>
#include <thread>

#include "rambda/bench/pipelines.hpp"

namespace rambda::bench {

MetricsReport run_experiment(const ExperimentConfig& c) {
  switch (c.workload.app) {
    case AppKind::kKvs:
      switch (c.pipeline) {
        case Pipeline::kRambda: return run_kvs_rambda(c);
        case Pipeline::kCpuRpc: return run_kvs_cpu_rpc(c);
        case Pipeline::kSmartNic: return run_kvs_smartnic(c);
        default: break;
      }
      break;
    case AppKind::kTx:
      switch (c.pipeline) {
        case Pipeline::kRambda: return run_tx_rambda(c);
        case Pipeline::kHyperloop: return run_tx_hyperloop(c);
        default: break;
      }
      break;
    case AppKind::kDlrm:
      switch (c.pipeline) {
        case Pipeline::kRambda: return run_dlrm_rambda(c);
        case Pipeline::kCpuRpc: return run_dlrm_cpu_rpc(c);
        default: break;
      }
      break;
    case AppKind::kPingPong:
      throw std::invalid_argument(
          "run_experiment: use run_pingpong for the pingpong app");
  }
  throw std::invalid_argument("run_experiment: unsupported app/pipeline pair");
}

nlohmann::json pingpong_to_json(const PingPongReport& r) {
  nlohmann::json j;
  j["mode"] = r.mode;
  j["interval_cycles"] = r.interval_cycles;
  j["iterations"] = r.iterations;
  j["lat_mean_ns"] = format_double(r.mean_ns);
  j["lat_p50_ns"] = r.p50_ns;
  j["lat_p99_ns"] = r.p99_ns;
  j["duration_ns"] = r.duration_ns;
  j["poll_count"] = r.poll_count;
  j["poll_cc_bytes_per_s"] = format_double(r.poll_cc_bytes_per_s);
  nlohmann::json hist = nlohmann::json::array();
  LatencyRecorder lat;
  for (auto s : r.samples) lat.record(s);
  for (const auto& [ns, n] : lat.histogram())
    hist.push_back(nlohmann::json::array({ns, n}));
  j["histogram"] = std::move(hist);
  return j;
}

namespace {

void set_by_path(nlohmann::json& doc, const std::string& path,
                 const nlohmann::json& value) {
  nlohmann::json* cur = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const auto key = path.substr(pos, dot - pos);
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    pos = dot + 1;
  }
}

}  // namespace

std::vector<MetricsReport> run_sweep(const nlohmann::json& doc,
                                     unsigned parallelism) {
  if (!doc.contains("sweep") || !doc.at("sweep").is_object())
    throw std::invalid_argument("sweep: config needs a 'sweep' object");
  nlohmann::json base = doc;
  const nlohmann::json sweep = doc.at("sweep");
  base.erase("sweep");

  // Cartesian expansion in deterministic (sorted-key) order.
  std::vector<nlohmann::json> points{base};
  for (auto it = sweep.begin(); it != sweep.end(); ++it) {
    if (!it.value().is_array())
      throw std::invalid_argument("sweep: '" + it.key() +
                                  "' must map to a value list");
    std::vector<nlohmann::json> next;
    for (const auto& p : points)
      for (const auto& v : it.value()) {
        nlohmann::json q = p;
        set_by_path(q, it.key(), v);
        std::string tag = it.key() + "=" +
                          (v.is_string() ? v.get<std::string>() : v.dump());
        q["scenario"] = q.value("scenario", std::string("sweep")) + " " + tag;
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }

  std::vector<MetricsReport> out(points.size());
  if (parallelism <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i)
      out[i] = run_experiment(parse_config(points[i]));
    return out;
  }
  // Independent engines per run; workers share nothing.
  std::atomic<std::size_t> next_idx{0};
  auto worker = [&] {
    while (true) {
      const auto i = next_idx.fetch_add(1);
      if (i >= points.size()) return;
      out[i] = run_experiment(parse_config(points[i]));
    }
  };
  std::vector<std::thread> threads;
  const auto n = std::min<std::size_t>(parallelism, points.size());
  threads.reserve(n);
  for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return out;
}

void export_sweep_csv(const std::vector<MetricsReport>& runs,
                      const std::string& path) {
  if (runs.empty()) throw std::invalid_argument("sweep export: no runs");
  // Union of counter names keeps the column set stable across rows.
  std::map<std::string, bool> names;
  for (const auto& r : runs)
    for (const auto& [k, v] : r.counters) names[k] = true;
  std::string head = "scenario,pipeline,seed,throughput_ops_s,lat_mean_ns,"
                     "lat_p50_ns,lat_p99_ns";
  for (const auto& [k, _] : names) head += "," + k;
  std::string body = head + "\n";
  for (const auto& r : runs) {
    std::string row = r.scenario + "," + r.pipeline + "," +
                      std::to_string(r.seed) + "," +
                      format_double(r.throughput_ops_s) + "," +
                      format_double(r.lat_mean_ns) + "," +
                      std::to_string(r.lat_p50_ns) + "," +
                      std::to_string(r.lat_p99_ns);
    for (const auto& [k, _] : names) {
      auto it = r.counters.find(k);
      row += "," + std::to_string(it == r.counters.end() ? 0 : it->second);
    }
    body += row + "\n";
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("sweep export: cannot open " + path);
  out << body;
}

}  // namespace rambda::bench
