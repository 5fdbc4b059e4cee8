#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ctxshape {

enum class Granularity { session, turn };

enum class CorpusFormat { normalized, longmemeval, locomo };

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view s);
std::string_view to_string(CorpusFormat f);
CorpusFormat parse_corpus_format(std::string_view s);

inline constexpr int kCorpusSchemaVersion = 1;

// One context update u.
struct Candidate {
  std::string id;
  std::string text;
  // |u| under the active backend's tokenizer. Never read from files; filled
  // by with_token_lengths() or computed on demand by the scorers.
  std::size_t token_len = 0;
  std::optional<std::int64_t> timestamp;
  std::optional<std::vector<double>> embedding;
  // Generator class label (insight, duplicate, ...). Scorers never read it.
  std::optional<std::string> label;

  bool operator==(const Candidate&) const = default;
};

struct QuestionInstance {
  std::string qid;
  std::string query;
  std::optional<std::string> answer;
  std::vector<Candidate> candidates;
  std::set<std::string> gold_ids;
  Granularity granularity = Granularity::turn;
  std::optional<std::vector<double>> query_embedding;

  const Candidate* find(std::string_view id) const;
  std::vector<std::string> candidate_ids() const;

  bool operator==(const QuestionInstance&) const = default;
};

struct Corpus {
  std::string name;
  Granularity granularity = Granularity::turn;
  std::vector<QuestionInstance> instances;
  int schema_version = kCorpusSchemaVersion;
  // Adapter records dropped because none of their evidence ids resolved.
  std::size_t skipped_records = 0;

  const QuestionInstance* find(std::string_view qid) const;

  bool operator==(const Corpus&) const = default;
};

// Throws SchemaError naming the first offending instance and field.
void validate(const Corpus& corpus);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus(std::string_view json_text, CorpusFormat format);
Corpus corpus_from_json(const nlohmann::json& doc, CorpusFormat format);

nlohmann::json to_json(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Keeps only the listed qids, in the listed order. Unknown qids are an error.
Corpus select_instances(const Corpus& corpus, const std::vector<std::string>& qids);

}  // namespace ctxshape
