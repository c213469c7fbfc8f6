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

#include "rambda/bench/workload.hpp"

#include <cmath>

namespace rambda::bench {

void WorkloadSpec::validate() const {
  if (request_count == 0) throw std::invalid_argument("workload: request_count must be > 0");
  if (key_space == 0) throw std::invalid_argument("workload: key_space must be > 0");
  if (clients == 0) throw std::invalid_argument("workload: clients must be > 0");
  const double sum = get_fraction + put_fraction + update_fraction;
  if (app == AppKind::kKvs && std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("workload: op fractions must sum to 1");
  if (distribution == Distribution::kZipfian && zipf_theta <= 0.0)
    throw std::invalid_argument("workload: zipf theta must be > 0");
  if (app == AppKind::kDlrm && (dlrm_min_query == 0 || dlrm_max_query < dlrm_min_query))
    throw std::invalid_argument("workload: bad dlrm query length range");
}

// Rejection inversion after Hormann & Derflinger, the standard sampler for
// Zipf without building the full CDF.
ZipfianGenerator::ZipfianGenerator(std::uint64_t n, double theta)
    : n_(n), theta_(theta) {
  if (n == 0 || theta <= 0.0 || theta == 1.0)
    throw std::invalid_argument("zipf: need n > 0 and theta in (0,1)u(1,inf)");
  h_x1_ = h(1.5) - 1.0;
  h_n_ = h(static_cast<double>(n_) + 0.5);
  s_ = 2.0 - h_inv(h(2.5) - std::pow(2.0, -theta_));
  harmonic_ = 0.0;
  for (std::uint64_t k = 1; k <= n_; ++k)
    harmonic_ += std::pow(static_cast<double>(k), -theta_);
}

double ZipfianGenerator::h(double x) const {
  return std::pow(x, 1.0 - theta_) / (1.0 - theta_);
}

double ZipfianGenerator::h_inv(double x) const {
  return std::pow((1.0 - theta_) * x, 1.0 / (1.0 - theta_));
}

std::uint64_t ZipfianGenerator::next(sim::RngStream& rng) {
  while (true) {
    const double u = h_n_ + rng.next_unit() * (h_x1_ - h_n_);
    const double x = h_inv(u);
    std::uint64_t k = static_cast<std::uint64_t>(x + 0.5);
    if (k < 1) k = 1;
    if (k > n_) k = n_;
    if (static_cast<double>(k) - x <= s_ ||
        u >= h(static_cast<double>(k) + 0.5) -
                 std::pow(static_cast<double>(k), -theta_))
      return k;
  }
}

double ZipfianGenerator::rank_probability(std::uint64_t rank) const {
  return std::pow(static_cast<double>(rank), -theta_) / harmonic_;
}

KvWorkload::KvWorkload(const WorkloadSpec& spec, std::uint64_t seed)
    : spec_(spec),
      op_rng_(seed, "workload.op"),
      key_rng_(seed, "workload.key"),
      val_rng_(seed, "workload.val"),
      zipf_(spec.key_space, spec.zipf_theta == 1.0 ? 0.99 : spec.zipf_theta) {
  spec_.validate();
}

KvOpRecord KvWorkload::next() {
  const double r = op_rng_.next_unit();
  wire::KvOp op;
  if (r < spec_.get_fraction)
    op = wire::KvOp::kGet;
  else if (r < spec_.get_fraction + spec_.put_fraction)
    op = wire::KvOp::kPut;
  else
    op = wire::KvOp::kUpdate;
  std::uint64_t key;
  if (spec_.distribution == Distribution::kUniform)
    key = key_rng_.next_below(spec_.key_space);
  else
    key = zipf_.next(key_rng_) - 1;
  return {op, key};
}

std::vector<std::uint8_t> KvWorkload::key_bytes(std::uint64_t key) {
  std::vector<std::uint8_t> k(8);
  for (int i = 0; i < 8; ++i) k[i] = static_cast<std::uint8_t>(key >> (8 * i));
  return k;
}

std::vector<std::uint8_t> KvWorkload::value_bytes(std::uint64_t key) {
  std::vector<std::uint8_t> v(spec_.value_size);
  std::uint64_t x = val_rng_.next() ^ key;
  for (std::size_t i = 0; i < v.size(); ++i) {
    x = x * 6364136223846793005ULL + 1442695040888963407ULL;
    v[i] = static_cast<std::uint8_t>(x >> 56);
  }
  return v;
}

TxWorkload::TxWorkload(const WorkloadSpec& spec, std::uint64_t data_len,
                       std::uint32_t value_size, std::uint64_t seed)
    : spec_(spec), slots_(data_len / value_size), value_size_(value_size),
      rng_(seed, "workload.tx") {
  if (slots_ == 0) throw std::invalid_argument("tx workload: empty data region");
}

wire::TxnRequest TxWorkload::next() {
  wire::TxnRequest t;
  for (std::uint32_t i = 0; i < spec_.tx_write_count; ++i) {
    wire::TxTuple w;
    w.offset = rng_.next_below(slots_) * value_size_;
    w.data.resize(value_size_);
    for (auto& b : w.data) b = static_cast<std::uint8_t>(rng_.next());
    w.len = value_size_;
    t.writes.push_back(std::move(w));
  }
  for (std::uint32_t i = 0; i < spec_.tx_read_count; ++i)
    t.read_offsets.push_back(rng_.next_below(slots_) * value_size_);
  return t;
}

DlrmWorkload::DlrmWorkload(const WorkloadSpec& spec, std::uint32_t tables,
                           std::uint32_t rows, std::uint64_t seed)
    : spec_(spec), tables_(tables), rows_(rows), rng_(seed, "workload.dlrm") {}

wire::DlrmQuery DlrmWorkload::next() {
  wire::DlrmQuery q;
  q.table_indices.resize(tables_);
  for (auto& idx : q.table_indices) {
    const auto len = spec_.dlrm_min_query +
                     rng_.next_below(spec_.dlrm_max_query -
                                     spec_.dlrm_min_query + 1);
    idx.reserve(len);
    for (std::uint64_t i = 0; i < len; ++i)
      idx.push_back(static_cast<std::uint32_t>(rng_.next_below(rows_)));
  }
  if (spec_.dlrm_cycle_ops) {
    static constexpr wire::AggregateOp kOps[] = {
        wire::AggregateOp::kSum, wire::AggregateOp::kMax,
        wire::AggregateOp::kMin, wire::AggregateOp::kInnerProduct};
    q.op = kOps[drawn_ % 4];
  } else {
    q.op = spec_.dlrm_op;
  }
  ++drawn_;
  return q;
}

}  // namespace rambda::bench
