#include "ctxshape/report.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>

#include "ctxshape/error.hpp"

namespace ctxshape {

using nlohmann::json;

const MethodSummary* EvalReport::summary(Method m) const {
  for (const auto& s : methods)
    if (s.method == m) return &s;
  return nullptr;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv" || s == "csv-summary") return ReportFormat::csv_summary;
  throw InvalidArgument("unknown report format '" + std::string(s) + "' (expected json or csv-summary)");
}

json to_json(const EvalReport& r) {
  json instances = json::array();
  for (const auto& i : r.instances)
    instances.push_back({{"qid", i.qid},
                         {"candidate_ids", i.candidate_ids},
                         {"gold_ids", i.gold_ids},
                         {"empty_candidate_ids", i.empty_candidate_ids}});
  json results = json::array();
  for (const auto& m : r.results)
    results.push_back({{"qid", m.qid},
                       {"method", to_string(m.method)},
                       {"selected_ids", m.selected_ids},
                       {"gold_ids", m.gold_ids},
                       {"f1", m.f1}});
  json methods = json::array();
  for (const auto& s : r.methods) {
    json js = {{"method", to_string(s.method)},
               {"status", s.ok ? "ok" : "failed"},
               {"instances", s.instances},
               {"mean_f1", s.mean_f1 ? json(*s.mean_f1) : json(nullptr)},
               {"uses_backend", s.uses_backend}};
    if (!s.ok) js["error"] = s.error;
    methods.push_back(std::move(js));
  }
  return json{{"report_schema_version", r.schema_version},
              {"corpus", r.corpus_name},
              {"backend", r.backend_name},
              {"aggregation", r.aggregation},
              {"selection_rule", "gold-size-k"},
              {"config", r.config},
              {"methods", std::move(methods)},
              {"instances", std::move(instances)},
              {"results", std::move(results)},
              {"cache_stats",
               {{"prefix_tokens_reused", r.cache_stats.prefix_tokens_reused},
                {"tokens_encoded", r.cache_stats.tokens_encoded},
                {"cold_calls", r.cache_stats.cold_calls}}}};
}

EvalReport report_from_json(const json& j) {
  try {
    EvalReport r;
    r.schema_version = j.at("report_schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion)
      throw ParseError("unsupported report_schema_version " + std::to_string(r.schema_version));
    r.corpus_name = j.at("corpus").get<std::string>();
    r.backend_name = j.at("backend").get<std::string>();
    r.aggregation = j.at("aggregation").get<std::string>();
    r.config = j.at("config");
    for (const auto& js : j.at("methods")) {
      MethodSummary s;
      s.method = parse_method(js.at("method").get<std::string>());
      s.ok = js.at("status").get<std::string>() == "ok";
      s.instances = js.at("instances").get<std::size_t>();
      if (!js.at("mean_f1").is_null()) s.mean_f1 = js.at("mean_f1").get<double>();
      s.uses_backend = js.at("uses_backend").get<bool>();
      if (js.contains("error")) s.error = js.at("error").get<std::string>();
      r.methods.push_back(std::move(s));
    }
    for (const auto& ji : j.at("instances"))
      r.instances.push_back({ji.at("qid").get<std::string>(),
                             ji.at("candidate_ids").get<std::vector<std::string>>(),
                             ji.at("gold_ids").get<std::vector<std::string>>(),
                             ji.at("empty_candidate_ids").get<std::vector<std::string>>()});
    for (const auto& jr : j.at("results"))
      r.results.push_back({jr.at("qid").get<std::string>(), parse_method(jr.at("method").get<std::string>()),
                           jr.at("selected_ids").get<std::vector<std::string>>(),
                           jr.at("gold_ids").get<std::vector<std::string>>(), jr.at("f1").get<double>()});
    const json& cs = j.at("cache_stats");
    r.cache_stats = {cs.at("prefix_tokens_reused").get<std::uint64_t>(),
                     cs.at("tokens_encoded").get<std::uint64_t>(), cs.at("cold_calls").get<std::uint64_t>()};
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return to_json(report).dump(2) + "\n";
  std::string out = "method,status,instances,mean_f1\n";
  for (const auto& s : report.methods) {
    out += std::string(to_string(s.method)) + "," + (s.ok ? "ok" : "failed") + "," +
           std::to_string(s.instances) + "," + (s.mean_f1 ? shortest(*s.mean_f1) : "") + "\n";
  }
  return out;
}

void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string body = render_report(report, format);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write report file '" + tmp.string() + "'");
    out << body;
    out.flush();
    if (!out) throw Error("failed writing report file '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move report into place at '" + path.string() + "': " + ec.message());
}

void check_parity(const EvalReport& report) {
  std::map<std::string, std::vector<std::string>> gold;
  for (const auto& i : report.instances) {
    if (!gold.emplace(i.qid, i.gold_ids).second)
      throw ProtocolError("report lists instance '" + i.qid + "' twice");
  }
  std::map<Method, std::set<std::string>> seen;
  for (const auto& r : report.results) {
    auto it = gold.find(r.qid);
    if (it == gold.end()) throw ProtocolError("result for unknown instance '" + r.qid + "'");
    if (it->second != r.gold_ids)
      throw ProtocolError("method " + std::string(to_string(r.method)) + " saw different gold ids for '" +
                          r.qid + "'");
    if (!seen[r.method].insert(r.qid).second)
      throw ProtocolError("method " + std::string(to_string(r.method)) + " scored '" + r.qid + "' twice");
  }
  for (const auto& s : report.methods) {
    if (!s.ok) {
      if (seen.contains(s.method))
        throw ProtocolError("failed method " + std::string(to_string(s.method)) + " has partial results");
      continue;
    }
    if (seen[s.method].size() != gold.size() || s.instances != gold.size())
      throw ProtocolError("method " + std::string(to_string(s.method)) + " covers " +
                          std::to_string(seen[s.method].size()) + " of " + std::to_string(gold.size()) +
                          " instances");
  }
}

}  // namespace ctxshape
