#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "ctxshape/backend.hpp"

namespace ctxshape {

// Decorator that tracks which rendered-prompt prefixes have already been
// encoded and answers exact repeats from memory.
//
// Every prompt is inserted into a token trie; the part of it already present
// is counted as reused and only the new suffix as encoded. The totals depend
// only on the set of prompts seen, not on their order. Requests whose full
// token sequence was seen before are served from the memo without touching
// the inner backend. When the trie grows past `max_nodes` it is dropped and
// rebuilt from scratch.
class PrefixCache final : public Backend {
 public:
  explicit PrefixCache(std::shared_ptr<Backend> inner, std::size_t max_nodes = std::size_t{1} << 22);

  std::string name() const override { return inner_->name() + "+prefix-cache"; }
  std::size_t k_limit() const override { return inner_->k_limit(); }
  std::size_t max_context_tokens() const override { return inner_->max_context_tokens(); }

  Backend& inner() { return *inner_; }
  std::size_t trie_nodes() const;
  void clear();

 protected:
  std::vector<TokenId> do_tokenize(std::string_view text) override;
  TokenDistribution do_next_token_distribution(const PromptState& state) override;
  double do_answer_logprob(std::span<const std::string> context, std::string_view query,
                           std::string_view answer) override;
  double do_judge_factuality(std::string_view query, std::string_view passage) override;

 private:
  // Returns the number of leading tokens that were already in the trie.
  std::size_t insert(const std::vector<TokenId>& tokens);

  std::shared_ptr<Backend> inner_;
  std::size_t max_nodes_;
  mutable std::mutex mu_;
  std::vector<std::unordered_map<TokenId, std::uint32_t>> trie_;
  std::map<std::vector<TokenId>, TokenDistribution> next_memo_;
  std::map<std::vector<TokenId>, double> answer_memo_;
  std::map<std::string, double> judge_memo_;
};

std::shared_ptr<Backend> with_prefix_cache(std::shared_ptr<Backend> inner);

inline CacheStats read_cache_stats(const Backend& backend) { return backend.cache_stats(); }

}  // namespace ctxshape
