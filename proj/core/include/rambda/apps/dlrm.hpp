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

#include "rambda/accel.hpp"
#include "rambda/apps/wire.hpp"

namespace rambda::apps {

struct DlrmConfig {
  std::uint32_t tables = 4;
  std::uint32_t rows_per_table = 0;
  std::uint32_t dim = 64;  // floats per row
  std::uint64_t table_base = 0;
  std::uint64_t fc_latency_ns = 5000;  // fixed fully-connected stage
  std::uint32_t max_outstanding_rows = 64;

  std::uint32_t row_bytes() const { return dim * 4; }
  std::uint64_t row_addr(std::uint32_t table, std::uint32_t index) const {
    return table_base +
           (static_cast<std::uint64_t>(table) * rows_per_table + index) *
               row_bytes();
  }
  std::uint64_t total_bytes() const {
    return static_cast<std::uint64_t>(tables) * rows_per_table * row_bytes();
  }
};

/// Deterministically fills the embedding region with values in [-1, 1).
void init_embedding_tables(mem::MemoryModel& mem, const DlrmConfig& cfg,
                           std::uint64_t seed);

/// CPU-accelerator collaborative inference: the raw request is preprocessed
/// by the CPU service, then the APU gathers embedding rows with up to 64
/// outstanding fetches and folds them element-wise in fixed query order
/// before a fixed-latency fully-connected stage.
class DlrmApp : public accel::Application {
 public:
  DlrmApp(DlrmConfig cfg, mem::MemoryModel& mem);

  std::string_view name() const override { return "rambda-dlrm"; }
  void on_request(accel::RequestContext& ctx,
                  std::span<const std::uint8_t> payload) override;
  void on_mem_complete(accel::RequestContext& ctx, std::uint64_t tag) override;
  void on_cpu_reply(accel::RequestContext& ctx,
                    std::span<const std::uint8_t> body) override;

  std::uint32_t peak_outstanding_rows() const { return peak_outstanding_; }
  std::uint64_t queries_done() const { return queries_; }
  const DlrmConfig& config() const { return cfg_; }

 private:
  struct Pend;
  void issue_more(accel::RequestContext& ctx, Pend& p);
  void fold_ready_rows(accel::RequestContext& ctx, Pend& p);

  DlrmConfig cfg_;
  mem::MemoryModel& mem_;
  std::uint32_t peak_outstanding_ = 0;
  std::uint64_t queries_ = 0;
};

}  // namespace rambda::apps
