#include "ctxshape/config.hpp"

#include "ctxshape/error.hpp"
#include "ctxshape/mock_backend.hpp"
#include "ctxshape/prefix_cache.hpp"

namespace ctxshape {

using nlohmann::json;

void RunConfig::validate() const {
  if (methods.empty()) throw InvalidArgument("run config lists no methods");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      if (methods[i] == methods[j])
        throw InvalidArgument("method '" + std::string(to_string(methods[i])) + "' listed twice");
  if (selection_rule != kSelectionRule)
    throw InvalidArgument("unsupported selection rule '" + selection_rule + "' (only gold-size-k)");
  if (workers == 0) throw InvalidArgument("workers must be at least 1");
  if (backend.kind != "mock" && backend.kind != "http")
    throw InvalidArgument("unknown backend kind '" + backend.kind + "' (expected mock or http)");
  if (embedder.kind != "none" && embedder.kind != "hashing" && embedder.kind != "http")
    throw InvalidArgument("unknown embedder kind '" + embedder.kind + "'");
  ecs.validate();
  divergence.validate();
}

json to_json(const BackendConfig& c) {
  return json{{"kind", c.kind},
              {"base_url", c.base_url},
              {"completions_path", c.completions_path},
              {"tokenize_path", c.tokenize_path},
              {"model", c.model},
              {"k_limit", c.k_limit},
              {"max_context_tokens", c.max_context_tokens},
              {"max_in_flight", c.max_in_flight},
              {"request_timeout", c.request_timeout},
              {"api_key_env", c.api_key_env},
              {"logprob_base", to_string(c.logprob_base)},
              {"preflight_tokenize", c.preflight_tokenize},
              {"prefix_cache", c.prefix_cache},
              {"mock_irrelevant_extra", c.mock_irrelevant_extra},
              {"mock_cache_weight", c.mock_cache_weight}};
}

json to_json(const RunConfig& c) {
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.emplace_back(to_string(m));
  return json{{"methods", methods},
              {"corpus_path", c.corpus_path},
              {"corpus_format", to_string(c.corpus_format)},
              {"qids", c.qids},
              {"backend", to_json(c.backend)},
              {"embedder", {{"kind", c.embedder.kind}, {"dim", c.embedder.dim}, {"path", c.embedder.path},
                            {"model", c.embedder.model}}},
              {"ecs", {{"lambda_len", c.ecs.lambda_len}, {"tau", c.ecs.tau}, {"horizon_T", c.ecs.horizon_T}}},
              {"divergence",
               {{"k_limit", c.divergence.k_limit},
                {"epsilon_smoothing", c.divergence.epsilon_smoothing},
                {"horizon_T", c.divergence.horizon_T}}},
              {"seed", c.seed},
              {"output_path", c.output_path},
              {"csv_path", c.csv_path},
              {"workers", c.workers},
              {"selection_rule", c.selection_rule}};
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("config field '") + key + "': " + e.what());
    }
  }
}

}  // namespace

BackendConfig backend_config_from_json(const json& j) {
  BackendConfig c;
  read(j, "kind", c.kind);
  read(j, "base_url", c.base_url);
  read(j, "completions_path", c.completions_path);
  read(j, "tokenize_path", c.tokenize_path);
  read(j, "model", c.model);
  read(j, "k_limit", c.k_limit);
  read(j, "max_context_tokens", c.max_context_tokens);
  read(j, "max_in_flight", c.max_in_flight);
  read(j, "request_timeout", c.request_timeout);
  read(j, "api_key_env", c.api_key_env);
  std::string base = std::string(to_string(c.logprob_base));
  read(j, "logprob_base", base);
  c.logprob_base = parse_log_base(base);
  read(j, "preflight_tokenize", c.preflight_tokenize);
  read(j, "prefix_cache", c.prefix_cache);
  read(j, "mock_irrelevant_extra", c.mock_irrelevant_extra);
  read(j, "mock_cache_weight", c.mock_cache_weight);
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  std::vector<std::string> methods;
  read(j, "methods", methods);
  for (const auto& m : methods) c.methods.push_back(parse_method(m));
  read(j, "corpus_path", c.corpus_path);
  std::string format = "normalized";
  read(j, "corpus_format", format);
  c.corpus_format = parse_corpus_format(format);
  read(j, "qids", c.qids);
  if (auto it = j.find("backend"); it != j.end()) c.backend = backend_config_from_json(*it);
  if (auto it = j.find("embedder"); it != j.end()) {
    read(*it, "kind", c.embedder.kind);
    read(*it, "dim", c.embedder.dim);
    read(*it, "path", c.embedder.path);
    read(*it, "model", c.embedder.model);
  }
  if (auto it = j.find("ecs"); it != j.end()) {
    read(*it, "lambda_len", c.ecs.lambda_len);
    read(*it, "tau", c.ecs.tau);
    read(*it, "horizon_T", c.ecs.horizon_T);
  }
  if (auto it = j.find("divergence"); it != j.end()) {
    read(*it, "k_limit", c.divergence.k_limit);
    read(*it, "epsilon_smoothing", c.divergence.epsilon_smoothing);
    read(*it, "horizon_T", c.divergence.horizon_T);
  }
  read(j, "seed", c.seed);
  read(j, "output_path", c.output_path);
  read(j, "csv_path", c.csv_path);
  read(j, "workers", c.workers);
  read(j, "selection_rule", c.selection_rule);
  return c;
}

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg) {
  std::shared_ptr<Backend> backend;
  if (cfg.kind == "mock") {
    MockConfig mc = MockConfig::defaults();
    mc.k_limit = cfg.k_limit;
    mc.max_context_tokens = cfg.max_context_tokens;
    mc.cache_weight = cfg.mock_cache_weight;
    mc.irrelevant_tokens.insert(mc.irrelevant_tokens.end(), cfg.mock_irrelevant_extra.begin(),
                                cfg.mock_irrelevant_extra.end());
    backend = std::make_shared<MockBackend>(std::move(mc));
  } else if (cfg.kind == "http") {
    HttpConfig hc;
    hc.base_url = cfg.base_url;
    hc.completions_path = cfg.completions_path;
    hc.tokenize_path = cfg.tokenize_path;
    hc.model = cfg.model;
    hc.k_limit = cfg.k_limit;
    hc.max_context_tokens = cfg.max_context_tokens;
    hc.max_in_flight = cfg.max_in_flight;
    hc.request_timeout = cfg.request_timeout;
    hc.api_key_env = cfg.api_key_env;
    hc.logprob_base = cfg.logprob_base;
    hc.preflight_tokenize = cfg.preflight_tokenize;
    backend = std::make_shared<HttpBackend>(std::move(hc));
  } else {
    throw InvalidArgument("unknown backend kind '" + cfg.kind + "' (expected mock or http)");
  }
  if (cfg.prefix_cache) backend = with_prefix_cache(std::move(backend));
  return backend;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg, const BackendConfig& backend) {
  if (cfg.kind == "none") return nullptr;
  if (cfg.kind == "hashing") return std::make_unique<HashingEmbedder>(cfg.dim);
  if (cfg.kind == "http") {
    HttpEmbedderConfig hc;
    hc.base_url = backend.base_url;
    hc.path = cfg.path;
    hc.model = cfg.model.empty() ? backend.model : cfg.model;
    hc.api_key_env = backend.api_key_env;
    hc.request_timeout = backend.request_timeout;
    return std::make_unique<HttpEmbedder>(std::move(hc));
  }
  throw InvalidArgument("unknown embedder kind '" + cfg.kind + "'");
}

}  // namespace ctxshape
