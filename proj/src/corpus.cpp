#include "ctxshape/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "ctxshape/error.hpp"
#include "ctxshape/text.hpp"

namespace ctxshape {

using nlohmann::json;

std::string_view to_string(Granularity g) {
  return g == Granularity::session ? "session" : "turn";
}

Granularity parse_granularity(std::string_view s) {
  if (s == "session") return Granularity::session;
  if (s == "turn") return Granularity::turn;
  throw SchemaError("unknown granularity '" + std::string(s) + "' (expected session or turn)");
}

std::string_view to_string(CorpusFormat f) {
  switch (f) {
    case CorpusFormat::normalized: return "normalized";
    case CorpusFormat::longmemeval: return "longmemeval";
    case CorpusFormat::locomo: return "locomo";
  }
  return "normalized";
}

CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "normalized") return CorpusFormat::normalized;
  if (s == "longmemeval") return CorpusFormat::longmemeval;
  if (s == "locomo") return CorpusFormat::locomo;
  throw InvalidArgument("unknown corpus format '" + std::string(s) +
                        "' (expected normalized, longmemeval or locomo)");
}

const Candidate* QuestionInstance::find(std::string_view id) const {
  for (const auto& c : candidates)
    if (c.id == id) return &c;
  return nullptr;
}

std::vector<std::string> QuestionInstance::candidate_ids() const {
  std::vector<std::string> ids;
  ids.reserve(candidates.size());
  for (const auto& c : candidates) ids.push_back(c.id);
  return ids;
}

const QuestionInstance* Corpus::find(std::string_view qid) const {
  for (const auto& inst : instances)
    if (inst.qid == qid) return &inst;
  return nullptr;
}

namespace {

std::string where(const QuestionInstance& inst, std::size_t index) {
  return "instance '" + inst.qid + "' (index " + std::to_string(index) + ")";
}

std::string where(std::size_t index) { return "instance at index " + std::to_string(index); }

}  // namespace

void validate(const Corpus& corpus) {
  if (corpus.schema_version != kCorpusSchemaVersion)
    throw SchemaError("unsupported schema_version " + std::to_string(corpus.schema_version));

  std::unordered_set<std::string> qids;
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
    const auto& inst = corpus.instances[i];
    if (inst.qid.empty()) throw SchemaError(where(i) + ": field 'qid' is empty");
    if (!qids.insert(inst.qid).second)
      throw SchemaError(where(inst, i) + ": field 'qid' is not unique");
    if (inst.granularity != corpus.granularity)
      throw SchemaError(where(inst, i) + ": granularity differs from corpus granularity '" +
                        std::string(to_string(corpus.granularity)) + "'");

    std::unordered_set<std::string> ids;
    for (const auto& c : inst.candidates) {
      if (c.id.empty()) throw SchemaError(where(inst, i) + ": field 'candidates[].id' is empty");
      if (!ids.insert(c.id).second)
        throw SchemaError(where(inst, i) + ": field 'candidates[].id' has duplicate '" + c.id + "'");
      if (c.embedding) {
        if (c.embedding->empty())
          throw SchemaError(where(inst, i) + ": field 'candidates[].embedding' of '" + c.id +
                            "' is empty");
        if (dim && *dim != c.embedding->size())
          throw SchemaError(where(inst, i) + ": field 'candidates[].embedding' of '" + c.id +
                            "' has dimension " + std::to_string(c.embedding->size()) +
                            ", expected " + std::to_string(*dim));
        dim = c.embedding->size();
      }
    }
    if (inst.query_embedding && dim && inst.query_embedding->size() != *dim)
      throw SchemaError(where(inst, i) + ": field 'query_embedding' has dimension " +
                        std::to_string(inst.query_embedding->size()) + ", expected " +
                        std::to_string(*dim));

    if (inst.gold_ids.empty()) throw SchemaError(where(inst, i) + ": field 'gold_ids' is empty");
    for (const auto& g : inst.gold_ids)
      if (!ids.contains(g))
        throw SchemaError(where(inst, i) + ": field 'gold_ids' entry '" + g +
                          "' does not name a candidate");
  }
}

namespace {

// ---- normalized format ------------------------------------------------------

const json& require(const json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ctx + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_string()) throw SchemaError(ctx + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> parse_vector(const json& v, const std::string& ctx, const char* key) {
  if (!v.is_array()) throw SchemaError(ctx + ": field '" + key + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw SchemaError(ctx + ": field '" + key + "' must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Candidate parse_candidate(const json& c, const std::string& ctx) {
  if (!c.is_object()) throw SchemaError(ctx + ": field 'candidates' entries must be objects");
  Candidate cand;
  cand.id = require_string(c, "id", ctx);
  const std::string cctx = ctx + ", candidate '" + cand.id + "'";
  cand.text = require_string(c, "text", cctx);
  if (auto it = c.find("timestamp"); it != c.end() && !it->is_null()) {
    if (!it->is_number_integer())
      throw SchemaError(cctx + ": field 'timestamp' must be an integer");
    cand.timestamp = it->get<std::int64_t>();
  }
  if (auto it = c.find("embedding"); it != c.end() && !it->is_null())
    cand.embedding = parse_vector(*it, cctx, "embedding");
  if (auto it = c.find("label"); it != c.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError(cctx + ": field 'label' must be a string");
    cand.label = it->get<std::string>();
  }
  return cand;
}

Corpus parse_normalized(const json& doc) {
  if (!doc.is_object()) throw SchemaError("normalized corpus must be a JSON object");
  Corpus corpus;
  const json& version = require(doc, "schema_version", "corpus");
  if (!version.is_number_integer()) throw SchemaError("corpus: field 'schema_version' must be an integer");
  corpus.schema_version = version.get<int>();
  corpus.name = require_string(doc, "name", "corpus");
  corpus.granularity = parse_granularity(require_string(doc, "granularity", "corpus"));

  const json& instances = require(doc, "instances", "corpus");
  if (!instances.is_array()) throw SchemaError("corpus: field 'instances' must be an array");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const json& item = instances[i];
    if (!item.is_object()) throw SchemaError(where(i) + ": must be an object");
    QuestionInstance inst;
    inst.granularity = corpus.granularity;
    inst.qid = require_string(item, "qid", where(i));
    const std::string ctx = where(inst, i);
    inst.query = require_string(item, "query", ctx);
    if (auto it = item.find("answer"); it != item.end() && !it->is_null()) {
      if (!it->is_string()) throw SchemaError(ctx + ": field 'answer' must be a string");
      inst.answer = it->get<std::string>();
    }
    const json& gold = require(item, "gold_ids", ctx);
    if (!gold.is_array()) throw SchemaError(ctx + ": field 'gold_ids' must be an array");
    for (const auto& g : gold) {
      if (!g.is_string()) throw SchemaError(ctx + ": field 'gold_ids' must contain strings");
      inst.gold_ids.insert(g.get<std::string>());
    }
    const json& cands = require(item, "candidates", ctx);
    if (!cands.is_array()) throw SchemaError(ctx + ": field 'candidates' must be an array");
    for (const auto& c : cands) inst.candidates.push_back(parse_candidate(c, ctx));
    if (auto it = item.find("query_embedding"); it != item.end() && !it->is_null())
      inst.query_embedding = parse_vector(*it, ctx, "query_embedding");
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

// ---- adapters -------------------------------------------------------------

// Accepts a bare record or an array of records.
std::vector<const json*> records_of(const json& doc, const char* format) {
  std::vector<const json*> out;
  if (doc.is_array()) {
    for (const auto& r : doc) out.push_back(&r);
  } else if (doc.is_object()) {
    out.push_back(&doc);
  } else {
    throw SchemaError(std::string(format) + " input must be an object or an array of objects");
  }
  return out;
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

std::string speaker_line(const std::string& speaker, const std::string& utterance) {
  return speaker + ": " + utterance;
}

Corpus parse_longmemeval(const json& doc) {
  Corpus corpus;
  corpus.name = "longmemeval";
  corpus.granularity = Granularity::session;
  auto records = records_of(doc, "longmemeval");
  for (std::size_t r = 0; r < records.size(); ++r) {
    const json& rec = *records[r];
    const std::string ctx = "longmemeval record " + std::to_string(r);
    if (!rec.is_object()) throw SchemaError(ctx + ": must be an object");
    QuestionInstance inst;
    inst.granularity = Granularity::session;
    inst.qid = scalar_text(require(rec, "question_id", ctx));
    inst.query = require_string(rec, "question", ctx);
    if (auto it = rec.find("answer"); it != rec.end() && !it->is_null())
      inst.answer = scalar_text(*it);

    const json& ids = require(rec, "haystack_session_ids", ctx);
    const json& sessions = require(rec, "haystack_sessions", ctx);
    if (!ids.is_array() || !sessions.is_array() || ids.size() != sessions.size())
      throw SchemaError(ctx + ": fields 'haystack_session_ids' and 'haystack_sessions' must be "
                        "arrays of equal length");
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      Candidate cand;
      cand.id = scalar_text(ids[s]);
      cand.timestamp = static_cast<std::int64_t>(s);
      std::vector<std::string> lines;
      if (!sessions[s].is_array())
        throw SchemaError(ctx + ": session '" + cand.id + "' must be an array of turns");
      for (const auto& turn : sessions[s]) {
        lines.push_back(speaker_line(require_string(turn, "role", ctx + ", session '" + cand.id + "'"),
                                     require_string(turn, "content", ctx)));
      }
      cand.text = text::join(lines, "\n");
      inst.candidates.push_back(std::move(cand));
    }

    const json& gold = require(rec, "answer_session_ids", ctx);
    if (!gold.is_array()) throw SchemaError(ctx + ": field 'answer_session_ids' must be an array");
    for (const auto& g : gold) {
      std::string id = scalar_text(g);
      if (inst.find(id)) inst.gold_ids.insert(std::move(id));
    }
    if (inst.gold_ids.empty()) {
      ++corpus.skipped_records;
      continue;
    }
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

std::optional<int> session_number(std::string_view key) {
  constexpr std::string_view prefix = "session_";
  if (!key.starts_with(prefix)) return std::nullopt;
  key.remove_prefix(prefix.size());
  int n = 0;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), n);
  if (ec != std::errc{} || ptr != key.data() + key.size()) return std::nullopt;
  return n;
}

// Evidence entries look like "D1:3" but occasionally pack several ids
// ("D1:3; D2:4") into one string.
std::vector<std::string> split_evidence(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ';' || c == ',' || c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Corpus parse_locomo(const json& doc) {
  Corpus corpus;
  corpus.name = "locomo";
  corpus.granularity = Granularity::turn;
  auto records = records_of(doc, "locomo");
  for (std::size_t r = 0; r < records.size(); ++r) {
    const json& rec = *records[r];
    const std::string ctx = "locomo sample " + std::to_string(r);
    if (!rec.is_object()) throw SchemaError(ctx + ": must be an object");
    std::string sample_id = rec.contains("sample_id") ? scalar_text(rec["sample_id"])
                                                      : "sample" + std::to_string(r);
    const json& conv = require(rec, "conversation", ctx);
    if (!conv.is_object()) throw SchemaError(ctx + ": field 'conversation' must be an object");

    std::map<int, const json*> sessions;
    for (auto it = conv.begin(); it != conv.end(); ++it) {
      if (auto n = session_number(it.key()); n && it->is_array()) sessions[*n] = &*it;
    }

    std::vector<Candidate> turns;
    std::int64_t clock = 0;
    for (const auto& [n, turns_json] : sessions) {
      for (const auto& turn : *turns_json) {
        const std::string tctx = ctx + ", session_" + std::to_string(n);
        Candidate cand;
        cand.id = scalar_text(require(turn, "dia_id", tctx));
        cand.text = speaker_line(require_string(turn, "speaker", tctx), require_string(turn, "text", tctx));
        cand.timestamp = clock++;
        turns.push_back(std::move(cand));
      }
    }

    const json& qa = require(rec, "qa", ctx);
    if (!qa.is_array()) throw SchemaError(ctx + ": field 'qa' must be an array");
    for (std::size_t q = 0; q < qa.size(); ++q) {
      const json& item = qa[q];
      const std::string qctx = ctx + ", qa " + std::to_string(q);
      QuestionInstance inst;
      inst.granularity = Granularity::turn;
      inst.qid = sample_id + "#" + std::to_string(q);
      inst.query = require_string(item, "question", qctx);
      if (auto it = item.find("answer"); it != item.end() && !it->is_null())
        inst.answer = scalar_text(*it);
      inst.candidates = turns;
      if (auto it = item.find("evidence"); it != item.end() && it->is_array()) {
        for (const auto& e : *it)
          for (auto& id : split_evidence(scalar_text(e)))
            if (inst.find(id)) inst.gold_ids.insert(std::move(id));
      }
      if (inst.gold_ids.empty()) {
        ++corpus.skipped_records;
        continue;
      }
      corpus.instances.push_back(std::move(inst));
    }
  }
  return corpus;
}

}  // namespace

Corpus corpus_from_json(const json& doc, CorpusFormat format) {
  Corpus corpus;
  switch (format) {
    case CorpusFormat::normalized: corpus = parse_normalized(doc); break;
    case CorpusFormat::longmemeval: corpus = parse_longmemeval(doc); break;
    case CorpusFormat::locomo: corpus = parse_locomo(doc); break;
  }
  validate(corpus);
  return corpus;
}

Corpus parse_corpus(std::string_view json_text, CorpusFormat format) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("corpus is not valid JSON: ") + e.what());
  }
  return corpus_from_json(doc, format);
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open corpus file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), format);
}

json to_json(const Corpus& corpus) {
  json instances = json::array();
  for (const auto& inst : corpus.instances) {
    json cands = json::array();
    for (const auto& c : inst.candidates) {
      json jc = {{"id", c.id}, {"text", c.text}};
      if (c.timestamp) jc["timestamp"] = *c.timestamp;
      if (c.embedding) jc["embedding"] = *c.embedding;
      if (c.label) jc["label"] = *c.label;
      cands.push_back(std::move(jc));
    }
    json ji = {{"qid", inst.qid},
               {"query", inst.query},
               {"gold_ids", std::vector<std::string>(inst.gold_ids.begin(), inst.gold_ids.end())},
               {"candidates", std::move(cands)}};
    if (inst.answer) ji["answer"] = *inst.answer;
    if (inst.query_embedding) ji["query_embedding"] = *inst.query_embedding;
    instances.push_back(std::move(ji));
  }
  return json{{"schema_version", corpus.schema_version},
              {"name", corpus.name},
              {"granularity", to_string(corpus.granularity)},
              {"instances", std::move(instances)}};
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus file '" + path.string() + "'");
  out << to_json(corpus).dump(2) << '\n';
  if (!out) throw Error("failed writing corpus file '" + path.string() + "'");
}

Corpus select_instances(const Corpus& corpus, const std::vector<std::string>& qids) {
  Corpus out = corpus;
  out.instances.clear();
  for (const auto& qid : qids) {
    const QuestionInstance* inst = corpus.find(qid);
    if (!inst) throw InvalidArgument("qid '" + qid + "' is not in corpus '" + corpus.name + "'");
    out.instances.push_back(*inst);
  }
  return out;
}

}  // namespace ctxshape
