#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "ctxshape/backend.hpp"

namespace ctxshape {

// Table-driven backend for rigging exact probabilities in tests: every answer
// logprob, per-step distribution and judge result is looked up by context.
// Missing entries raise BackendError rather than inventing a value.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::size_t k_limit = kDefaultTopK, std::size_t max_context_tokens = 8192);

  std::string name() const override { return "scripted"; }
  std::size_t k_limit() const override { return k_limit_; }
  std::size_t max_context_tokens() const override { return max_context_tokens_; }

  void set_answer_logprob(std::vector<std::string> context, std::string answer, double logprob);
  void set_answer_probability(std::vector<std::string> context, std::string answer, double p);

  // Step t (= generated prefix length) reads per_step[min(t, size - 1)].
  void set_distributions(std::vector<std::string> context, std::vector<TokenDistribution> per_step);

  void set_judge_score(std::string passage, double score);
  void set_judge_logprobs(std::string passage, double yes_logprob, double no_logprob);

  // Any call whose context, query or passage contains `needle` throws BackendError.
  void fail_on(std::string needle);

 protected:
  std::vector<TokenId> do_tokenize(std::string_view text) override;
  TokenDistribution do_next_token_distribution(const PromptState& state) override;
  double do_answer_logprob(std::span<const std::string> context, std::string_view query,
                           std::string_view answer) override;
  double do_judge_factuality(std::string_view query, std::string_view passage) override;

 private:
  static std::string key(std::span<const std::string> context);
  void maybe_fail(std::span<const std::string> context, std::string_view query) const;

  std::size_t k_limit_;
  std::size_t max_context_tokens_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, double> answers_;
  std::map<std::string, std::vector<TokenDistribution>> distributions_;
  std::map<std::string, double> judge_;
  std::vector<std::string> failures_;
};

}  // namespace ctxshape
