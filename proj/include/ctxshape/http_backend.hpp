#pragma once

#include <mutex>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ctxshape/backend.hpp"

namespace ctxshape {

enum class LogBase { e, two, ten };

std::string_view to_string(LogBase b);
LogBase parse_log_base(std::string_view s);

struct HttpConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string completions_path = "/v1/completions";
  std::string tokenize_path = "/tokenize";
  std::string model;
  std::size_t k_limit = kDefaultTopK;
  std::size_t max_context_tokens = 8192;
  std::size_t max_in_flight = 4;
  double request_timeout = 60.0;  // seconds
  // Name of the environment variable holding the bearer token.
  std::string api_key_env = "CTXSHAPE_API_KEY";
  // Base of the logprobs the server reports; converted to nats on receipt.
  LogBase logprob_base = LogBase::e;
  // Count prompt tokens with the tokenize endpoint before each request so
  // overflow is reported locally with the rendered length.
  bool preflight_tokenize = true;
  // max_tokens sent with echo requests (some servers reject 0).
  std::size_t echo_max_tokens = 1;
};

// Client for an OpenAI-style completions endpoint with top-K logprobs.
//
// Next-token distributions come from `top_logprobs[0]` of a one-token
// completion; answer logprobs from `echo: true` with the answer appended to
// the prompt. Token strings returned by the server are interned into ids
// starting at kInternBase so they never collide with tokenizer ids.
class HttpBackend final : public Backend {
 public:
  static constexpr TokenId kInternBase = 1 << 30;

  explicit HttpBackend(HttpConfig config);

  std::string name() const override { return "http"; }
  std::size_t k_limit() const override { return config_.k_limit; }
  std::size_t max_context_tokens() const override { return config_.max_context_tokens; }

  const HttpConfig& config() const { return config_; }
  // Server text of an interned token id.
  std::string token_text(TokenId id) const;

 protected:
  std::vector<TokenId> do_tokenize(std::string_view text) override;
  TokenDistribution do_next_token_distribution(const PromptState& state) override;
  double do_answer_logprob(std::span<const std::string> context, std::string_view query,
                           std::string_view answer) override;
  double do_judge_factuality(std::string_view query, std::string_view passage) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  nlohmann::json complete(const std::string& prompt, bool echo, std::size_t logprobs,
                          std::size_t max_tokens);
  void account(const nlohmann::json& response, std::size_t preflight_tokens);
  std::size_t preflight(const std::string& prompt);
  TokenId intern(const std::string& token);
  double to_nats(double v) const;

  HttpConfig config_;
  std::string api_key_;
  std::counting_semaphore<1024> in_flight_;
  mutable std::mutex intern_mu_;
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> texts_;
};

}  // namespace ctxshape
