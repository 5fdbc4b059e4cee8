#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxshape/backend.hpp"
#include "ctxshape/scoring.hpp"

namespace ctxshape {

inline constexpr int kReportSchemaVersion = 1;

// What every method was evaluated on for one question.
struct InstanceRecord {
  std::string qid;
  std::vector<std::string> candidate_ids;
  std::vector<std::string> gold_ids;  // sorted
  std::vector<std::string> empty_candidate_ids;

  bool operator==(const InstanceRecord&) const = default;
};

struct MethodResult {
  std::string qid;
  Method method = Method::random;
  std::vector<std::string> selected_ids;  // sorted
  std::vector<std::string> gold_ids;      // sorted
  double f1 = 0.0;

  bool operator==(const MethodResult&) const = default;
};

struct MethodSummary {
  Method method = Method::random;
  bool ok = true;
  std::string error;
  std::size_t instances = 0;
  // Unweighted mean over instances; absent when the method failed.
  std::optional<double> mean_f1;
  bool uses_backend = false;

  bool operator==(const MethodSummary&) const = default;
};

struct EvalReport {
  int schema_version = kReportSchemaVersion;
  nlohmann::json config;
  std::string corpus_name;
  std::string backend_name;
  std::string aggregation = "macro";
  std::vector<InstanceRecord> instances;
  std::vector<MethodResult> results;
  std::vector<MethodSummary> methods;
  CacheStats cache_stats;

  const MethodSummary* summary(Method m) const;
  bool operator==(const EvalReport&) const = default;
};

enum class ReportFormat { json, csv_summary };
ReportFormat parse_report_format(std::string_view s);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

std::string render_report(const EvalReport& report, ReportFormat format);

// Writes through a temporary file and renames it into place.
void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path);

// Throws ProtocolError unless every successful method covers exactly the
// recorded (qid, gold) pairs.
void check_parity(const EvalReport& report);

}  // namespace ctxshape
