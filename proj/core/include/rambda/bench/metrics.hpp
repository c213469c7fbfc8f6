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
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rambda/sim.hpp"

namespace rambda::bench {

/// Records per-request latencies; quantiles are exact order statistics over
/// the recorded samples, never estimated.
class LatencyRecorder {
 public:
  void record(std::uint64_t ns) { samples_.push_back(ns); }
  std::size_t count() const { return samples_.size(); }
  double mean() const;
  std::uint64_t percentile(double q) const;  // q in (0, 100]
  std::map<std::uint64_t, std::uint64_t> histogram() const;
  const std::vector<std::uint64_t>& samples() const { return samples_; }

 private:
  std::vector<std::uint64_t> samples_;
};

struct MetricsReport {
  std::string scenario;
  std::string pipeline;
  std::uint64_t seed = 0;
  std::uint64_t issued = 0;
  std::uint64_t completed = 0;
  std::uint64_t failed = 0;
  std::uint64_t duration_ns = 0;
  double throughput_ops_s = 0.0;
  double lat_mean_ns = 0.0;
  std::uint64_t lat_p50_ns = 0;
  std::uint64_t lat_p99_ns = 0;
  std::map<std::uint64_t, std::uint64_t> histogram;  // latency ns -> count
  std::map<std::string, std::uint64_t> counters;
  nlohmann::json config_echo;

  void fill_from(const LatencyRecorder& lat, sim::TimeNs first_post,
                 sim::TimeNs last_done);
};

enum class ExportFormat : std::uint8_t { kCsv, kJson };

/// Writes the report with a stable column/key order. CSV additionally writes
/// `<path>.hist.csv` with one (latency_ns, count) row per histogram bucket.
void export_report(const MetricsReport& report, const std::string& path,
                   ExportFormat format);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// Deterministic fixed-point formatting shared by every exporter.
std::string format_double(double v);

}  // namespace rambda::bench
