#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxshape/corpus.hpp"
#include "ctxshape/token_distribution.hpp"

namespace ctxshape {

// What the model is conditioned on: context C, query q, and the tokens
// already generated before the current step.
struct PromptState {
  std::vector<std::string> context;
  std::string query;
  std::vector<TokenId> generated_prefix;
};

struct CacheStats {
  std::uint64_t prefix_tokens_reused = 0;
  std::uint64_t tokens_encoded = 0;
  std::uint64_t cold_calls = 0;

  bool operator==(const CacheStats&) const = default;
};

// Fixed prompt layout: context block, then the query, then the answer cue.
//
//   Context:
//   <passage 1>
//   ...
//   Question: <query>
//   Answer:
std::string render_prompt(std::span<const std::string> context, std::string_view query);

inline constexpr std::string_view kFactualityInstruction =
    "Based on your knowledge, does this passage contain accurate information for answering this "
    "question?";

std::string render_judge_prompt(std::string_view query, std::string_view passage);

// Two-option mass ratio P(yes) / (P(yes) + P(no)) from the two logprobs.
double affirmative_probability(double yes_logprob, double no_logprob);

// Uniform access to a language model's next-token distributions.
//
// Public entry points are non-virtual: they count calls and enforce the
// shared preconditions, then dispatch to the do_* hooks. Implementations
// must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t k_limit() const = 0;
  virtual std::size_t max_context_tokens() const = 0;

  std::vector<TokenId> tokenize(std::string_view text);
  std::size_t token_length(std::string_view text) { return tokenize(text).size(); }

  // tokenize(render_prompt(context, query)) followed by the generated prefix.
  std::vector<TokenId> render_tokens(const PromptState& state);

  TokenDistribution next_token_distribution(const PromptState& state);

  // Sum of teacher-forced logprobs of the answer's tokens after the prompt.
  double answer_logprob(std::span<const std::string> context, std::string_view query,
                        std::string_view answer);

  // Probability mass on "yes" for the factuality prompt, in [0, 1].
  double judge_factuality(std::string_view query, std::string_view passage);

  virtual CacheStats cache_stats() const;

  // Number of model evaluations (distribution, answer and judge calls).
  std::uint64_t call_count() const { return calls_.load(); }
  std::uint64_t tokenize_count() const { return tokenize_calls_.load(); }

 protected:
  virtual std::vector<TokenId> do_tokenize(std::string_view text) = 0;
  virtual TokenDistribution do_next_token_distribution(const PromptState& state) = 0;
  virtual double do_answer_logprob(std::span<const std::string> context, std::string_view query,
                                   std::string_view answer) = 0;
  virtual double do_judge_factuality(std::string_view query, std::string_view passage) = 0;

  // Encoding work done by one evaluation.
  void record_encoding(std::uint64_t encoded, std::uint64_t reused);

  void check_context_fits(std::size_t rendered_tokens) const;

 private:
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> tokenize_calls_{0};
  std::atomic<std::uint64_t> prefix_tokens_reused_{0};
  std::atomic<std::uint64_t> tokens_encoded_{0};
  std::atomic<std::uint64_t> cold_calls_{0};
};

// Copy of the corpus with every Candidate::token_len computed by `backend`.
Corpus with_token_lengths(const Corpus& corpus, Backend& backend);

}  // namespace ctxshape
