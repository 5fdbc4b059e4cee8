#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ctxshape/backend.hpp"

namespace ctxshape {

struct MockConfig {
  // Training lines for the bigram tables; defaults to the bundled toy corpus.
  std::string training_text;
  // Words the model never conditions on; defaults to the bundled list.
  std::vector<std::string> irrelevant_tokens;
  // Weight of the context copy component once the context holds at least one
  // relevant token.
  double cache_weight = 0.5;
  std::size_t k_limit = kDefaultTopK;
  std::size_t max_context_tokens = 8192;
  // Out-of-vocabulary words share the unknown-word mass evenly over this many
  // notional types.
  double oov_inventory = 1000.0;
  // Exact passage text -> judge score, consulted before the model.
  std::map<std::string, double> judge_fixtures;

  static MockConfig defaults();
};

// Deterministic stand-in for an LLM.
//
// P(y | history) = (1 - w) * bigram(y | prev) + w * copy(y)
//
// bigram is an add-one-smoothed word bigram over the training lines (one extra
// class for unknown words). copy(y) is the share of y among the *relevant*
// context tokens, i.e. those not in the irrelevant set, and w = cache_weight
// when that multiset is nonempty, 0 otherwise. prev is the answer cue or the
// last generated token.
//
// A passage made only of irrelevant words leaves the copy multiset, and so
// every distribution, bit-for-bit unchanged.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockConfig config = MockConfig::defaults());

  std::string name() const override { return "mock"; }
  std::size_t k_limit() const override { return config_.k_limit; }
  std::size_t max_context_tokens() const override { return config_.max_context_tokens; }

  const MockConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::optional<TokenId> vocab_id(std::string_view word) const;
  // Vocabulary word, or "<oov:ID>" for hashed out-of-vocabulary ids.
  std::string token_text(TokenId id) const;
  TokenId token_id(std::string_view word) const;
  bool is_irrelevant(std::string_view word) const;
  std::uint32_t bigram_count(std::string_view prev, std::string_view next) const;
  std::uint32_t row_total(std::string_view prev) const;

  // Exact (untruncated) probability of `token` in the given state.
  double probability(const PromptState& state, TokenId token) const;

 protected:
  std::vector<TokenId> do_tokenize(std::string_view text) override;
  TokenDistribution do_next_token_distribution(const PromptState& state) override;
  double do_answer_logprob(std::span<const std::string> context, std::string_view query,
                           std::string_view answer) override;
  double do_judge_factuality(std::string_view query, std::string_view passage) override;

 private:
  struct Conditioning {
    std::unordered_map<TokenId, std::uint32_t> copy_counts;
    std::uint32_t copy_total = 0;
  };

  std::vector<TokenId> tokens_of(std::string_view text) const;
  Conditioning condition_on(std::span<const std::string> context) const;
  double bigram(TokenId prev, TokenId next) const;
  double prob(const Conditioning& cond, TokenId prev, TokenId next) const;
  TokenDistribution distribution(const Conditioning& cond, TokenId prev, std::size_t step) const;
  std::size_t rendered_length(std::span<const std::string> context, std::string_view query) const;

  MockConfig config_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> index_;
  std::unordered_set<std::string> irrelevant_;
  std::vector<std::unordered_map<TokenId, std::uint32_t>> rows_;
  std::vector<std::uint32_t> row_totals_;
  TokenId answer_cue_ = 0;
};

}  // namespace ctxshape
