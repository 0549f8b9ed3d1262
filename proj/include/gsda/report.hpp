#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsda/metrics.hpp"

namespace gsda {

struct EvalRow {
  int id = 0;
  std::string name;
  int true_label = -1;
  int target_label = -1;  // -1 for untargeted attacks
  bool success = false;
  int predicted_label = -1;
  DistortionReport distortion;
  double beta_used = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
};

/// Success rate over all rows; distortion means over successful rows only
/// (zero when nothing succeeded).
struct EvalAggregates {
  int instances = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_d_norm = 0.0;
  double mean_d_c = 0.0;
  double mean_d_h = 0.0;
  double mean_e_delta = 0.0;

  bool operator==(const EvalAggregates&) const = default;
};

struct EvalReport {
  nlohmann::json config;  // fully resolved settings, echoed for reproducibility
  std::vector<EvalRow> rows;
  EvalAggregates aggregates;
};

EvalAggregates aggregate(const std::vector<EvalRow>& rows);

/// Timing fields (wall_ms) are written only when include_timing is set, so the
/// timing-free dump is a stable payload for determinism checks.
nlohmann::json to_json(const EvalReport& report, bool include_timing = true);
EvalReport report_from_json(const nlohmann::json& j);

/// Stable hash-able text of a report with timing removed.
std::string deterministic_payload(const EvalReport& report);

void write_rows_csv(std::ostream& out, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_rows_csv(std::istream& in);

/// Shortest round-trip decimal for a double.
std::string format_double(double v);

/// FNV-1a 64-bit, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace gsda
