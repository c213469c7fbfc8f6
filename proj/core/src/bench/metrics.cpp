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

#include "rambda/bench/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace rambda::bench {

double LatencyRecorder::mean() const {
  if (samples_.empty()) return 0.0;
  long double sum = 0;
  for (auto s : samples_) sum += s;
  return static_cast<double>(sum / samples_.size());
}

std::uint64_t LatencyRecorder::percentile(double q) const {
  if (samples_.empty()) return 0;
  if (q <= 0.0 || q > 100.0)
    throw std::invalid_argument("percentile: q must be in (0, 100]");
  auto sorted = samples_;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(
      std::max<long long>(0, static_cast<long long>(
                                 std::ceil(q / 100.0 * sorted.size())) -
                                 1));
  return sorted[std::min(rank, sorted.size() - 1)];
}

std::map<std::uint64_t, std::uint64_t> LatencyRecorder::histogram() const {
  std::map<std::uint64_t, std::uint64_t> h;
  for (auto s : samples_) ++h[s];
  return h;
}

void MetricsReport::fill_from(const LatencyRecorder& lat,
                              sim::TimeNs first_post, sim::TimeNs last_done) {
  completed = lat.count();
  duration_ns = last_done > first_post ? last_done - first_post : 0;
  throughput_ops_s =
      duration_ns ? static_cast<double>(completed) * 1e9 / duration_ns : 0.0;
  lat_mean_ns = lat.mean();
  lat_p50_ns = lat.percentile(50.0);
  lat_p99_ns = lat.percentile(99.0);
  histogram = lat.histogram();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["pipeline"] = r.pipeline;
  j["seed"] = r.seed;
  j["issued"] = r.issued;
  j["completed"] = r.completed;
  j["failed"] = r.failed;
  j["duration_ns"] = r.duration_ns;
  j["throughput_ops_s"] = format_double(r.throughput_ops_s);
  j["lat_mean_ns"] = format_double(r.lat_mean_ns);
  j["lat_p50_ns"] = r.lat_p50_ns;
  j["lat_p99_ns"] = r.lat_p99_ns;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [ns, n] : r.histogram)
    hist.push_back(nlohmann::json::array({ns, n}));
  j["histogram"] = std::move(hist);
  j["counters"] = r.counters;
  j["config"] = r.config_echo;
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.scenario = j.at("scenario").get<std::string>();
  r.pipeline = j.at("pipeline").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.issued = j.at("issued").get<std::uint64_t>();
  r.completed = j.at("completed").get<std::uint64_t>();
  r.failed = j.at("failed").get<std::uint64_t>();
  r.duration_ns = j.at("duration_ns").get<std::uint64_t>();
  r.throughput_ops_s = std::stod(j.at("throughput_ops_s").get<std::string>());
  r.lat_mean_ns = std::stod(j.at("lat_mean_ns").get<std::string>());
  r.lat_p50_ns = j.at("lat_p50_ns").get<std::uint64_t>();
  r.lat_p99_ns = j.at("lat_p99_ns").get<std::uint64_t>();
  for (const auto& row : j.at("histogram"))
    r.histogram[row.at(0).get<std::uint64_t>()] =
        row.at(1).get<std::uint64_t>();
  for (auto it = j.at("counters").begin(); it != j.at("counters").end(); ++it)
    r.counters[it.key()] = it.value().get<std::uint64_t>();
  r.config_echo = j.value("config", nlohmann::json::object());
  return r;
}

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("export: cannot open " + path);
  out << body;
  if (!out) throw std::runtime_error("export: write failed for " + path);
}

}  // namespace

void export_report(const MetricsReport& r, const std::string& path,
                   ExportFormat format) {
  if (format == ExportFormat::kJson) {
    write_file(path, report_to_json(r).dump(2) + "\n");
    return;
  }
  std::string head = "scenario,pipeline,seed,throughput_ops_s,lat_mean_ns,"
                     "lat_p50_ns,lat_p99_ns";
  std::string row = r.scenario + "," + r.pipeline + "," +
                    std::to_string(r.seed) + "," +
                    format_double(r.throughput_ops_s) + "," +
                    format_double(r.lat_mean_ns) + "," +
                    std::to_string(r.lat_p50_ns) + "," +
                    std::to_string(r.lat_p99_ns);
  for (const auto& [name, v] : r.counters) {
    head += "," + name;
    row += "," + std::to_string(v);
  }
  write_file(path, head + "\n" + row + "\n");

  std::string hist = "latency_ns,count\n";
  for (const auto& [ns, n] : r.histogram)
    hist += std::to_string(ns) + "," + std::to_string(n) + "\n";
  write_file(path + ".hist.csv", hist);
}

}  // namespace rambda::bench
