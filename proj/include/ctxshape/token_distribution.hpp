#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ctxshape {

using TokenId = std::int32_t;

inline constexpr std::size_t kDefaultTopK = 50;

struct TokenLogprob {
  TokenId token = 0;
  double logprob = 0.0;  // natural log

  bool operator==(const TokenLogprob&) const = default;
};

// Sparse top-K view of a next-token distribution at generation step
// step_index. Entries are kept sorted by descending logprob, ties by
// ascending token id, and truncated to k_limit.
class TokenDistribution {
 public:
  TokenDistribution() = default;
  // Throws InvalidArgument on duplicate tokens, NaN or positive logprobs.
  // Values in (0, 1e-9] are clamped to 0 to absorb rounding.
  explicit TokenDistribution(std::vector<TokenLogprob> entries, std::size_t k_limit = kDefaultTopK,
                             std::size_t step_index = 0);

  std::span<const TokenLogprob> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t k_limit() const { return k_limit_; }
  std::size_t step_index() const { return step_index_; }
  void set_step_index(std::size_t t) { step_index_ = t; }

  std::optional<double> logprob(TokenId token) const;
  // Highest-probability token; the distribution must be nonempty.
  TokenId argmax() const;
  // exp-sum of the retained entries; at most 1 for a well-formed top-K.
  double retained_mass() const;

  // Copy truncated to the k most probable entries.
  TokenDistribution top(std::size_t k) const;

  bool operator==(const TokenDistribution&) const = default;

 private:
  std::vector<TokenLogprob> entries_;
  std::size_t k_limit_ = kDefaultTopK;
  std::size_t step_index_ = 0;
};

// Builds a distribution from probabilities (not logprobs); zero entries drop.
TokenDistribution distribution_from_probs(std::span<const std::pair<TokenId, double>> probs,
                                          std::size_t k_limit = kDefaultTopK,
                                          std::size_t step_index = 0);

}  // namespace ctxshape
