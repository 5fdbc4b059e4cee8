#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxshape/backend.hpp"
#include "ctxshape/corpus.hpp"
#include "ctxshape/divergence.hpp"
#include "ctxshape/embedder.hpp"
#include "ctxshape/http_backend.hpp"
#include "ctxshape/scoring.hpp"

namespace ctxshape {

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  std::string base_url = "http://127.0.0.1:8000";
  std::string completions_path = "/v1/completions";
  std::string tokenize_path = "/tokenize";
  std::string model;
  std::size_t k_limit = kDefaultTopK;
  std::size_t max_context_tokens = 8192;
  std::size_t max_in_flight = 4;
  double request_timeout = 60.0;
  std::string api_key_env = "CTXSHAPE_API_KEY";
  LogBase logprob_base = LogBase::e;
  bool preflight_tokenize = true;
  bool prefix_cache = true;
  // Mock only: extra words added to the bundled irrelevant-token list.
  std::vector<std::string> mock_irrelevant_extra;
  double mock_cache_weight = 0.5;
};

struct EmbedderConfig {
  std::string kind = "none";  // none | hashing | http
  std::size_t dim = 256;
  std::string path = "/v1/embeddings";
  std::string model;
};

inline constexpr std::string_view kSelectionRule = "gold-size-k";

struct RunConfig {
  std::vector<Method> methods;
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::normalized;
  // Explicit subset of qids to evaluate; empty means all.
  std::vector<std::string> qids;
  BackendConfig backend;
  EmbedderConfig embedder;
  EcsConfig ecs;
  DivergenceConfig divergence;
  std::uint64_t seed = 0;
  std::string output_path;
  // Optional per-method CSV summary written next to the JSON report.
  std::string csv_path;
  std::size_t workers = 1;
  std::string selection_rule = std::string(kSelectionRule);

  void validate() const;
};

nlohmann::json to_json(const BackendConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);
BackendConfig backend_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

// Mock or HTTP backend, wrapped in a PrefixCache when cfg.prefix_cache.
std::shared_ptr<Backend> make_backend(const BackendConfig& cfg);

// nullptr for kind "none".
std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg, const BackendConfig& backend);

}  // namespace ctxshape
