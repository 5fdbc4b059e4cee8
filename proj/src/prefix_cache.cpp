#include "ctxshape/prefix_cache.hpp"

#include "ctxshape/error.hpp"

namespace ctxshape {

namespace {

constexpr TokenId kAnswerSeparator = -1;

}  // namespace

PrefixCache::PrefixCache(std::shared_ptr<Backend> inner, std::size_t max_nodes)
    : inner_(std::move(inner)), max_nodes_(max_nodes) {
  if (!inner_) throw InvalidArgument("PrefixCache needs an inner backend");
  trie_.emplace_back();
}

std::size_t PrefixCache::trie_nodes() const {
  std::lock_guard lock(mu_);
  return trie_.size();
}

void PrefixCache::clear() {
  std::lock_guard lock(mu_);
  trie_.clear();
  trie_.emplace_back();
  next_memo_.clear();
  answer_memo_.clear();
  judge_memo_.clear();
}

std::size_t PrefixCache::insert(const std::vector<TokenId>& tokens) {
  if (trie_.size() + tokens.size() > max_nodes_) {
    trie_.clear();
    trie_.emplace_back();
    next_memo_.clear();
    answer_memo_.clear();
    judge_memo_.clear();
  }
  std::uint32_t node = 0;
  std::size_t shared = 0;
  bool diverged = false;
  for (TokenId t : tokens) {
    auto& children = trie_[node];
    auto it = children.find(t);
    if (!diverged && it != children.end()) {
      node = it->second;
      ++shared;
      continue;
    }
    diverged = true;
    auto next = static_cast<std::uint32_t>(trie_.size());
    trie_[node].emplace(t, next);
    trie_.emplace_back();
    node = next;
  }
  return shared;
}

std::vector<TokenId> PrefixCache::do_tokenize(std::string_view text) { return inner_->tokenize(text); }

TokenDistribution PrefixCache::do_next_token_distribution(const PromptState& state) {
  std::vector<TokenId> tokens = inner_->render_tokens(state);
  check_context_fits(tokens.size());
  {
    std::lock_guard lock(mu_);
    std::size_t shared = insert(tokens);
    record_encoding(tokens.size() - shared, shared);
    if (auto it = next_memo_.find(tokens); it != next_memo_.end()) return it->second;
  }
  TokenDistribution dist = inner_->next_token_distribution(state);
  std::lock_guard lock(mu_);
  next_memo_.emplace(std::move(tokens), dist);
  return dist;
}

double PrefixCache::do_answer_logprob(std::span<const std::string> context, std::string_view query,
                                      std::string_view answer) {
  std::vector<TokenId> tokens = inner_->tokenize(render_prompt(context, query));
  std::vector<TokenId> answer_tokens = inner_->tokenize(answer);
  tokens.insert(tokens.end(), answer_tokens.begin(), answer_tokens.end());
  check_context_fits(tokens.size());

  std::vector<TokenId> key = tokens;
  key.insert(key.end() - static_cast<std::ptrdiff_t>(answer_tokens.size()), kAnswerSeparator);
  {
    std::lock_guard lock(mu_);
    std::size_t shared = insert(tokens);
    record_encoding(tokens.size() - shared, shared);
    if (auto it = answer_memo_.find(key); it != answer_memo_.end()) return it->second;
  }
  double lp = inner_->answer_logprob(context, query, answer);
  std::lock_guard lock(mu_);
  answer_memo_.emplace(std::move(key), lp);
  return lp;
}

double PrefixCache::do_judge_factuality(std::string_view query, std::string_view passage) {
  std::string prompt = render_judge_prompt(query, passage);
  std::vector<TokenId> tokens = inner_->tokenize(prompt);
  {
    std::lock_guard lock(mu_);
    std::size_t shared = insert(tokens);
    record_encoding(tokens.size() - shared, shared);
    // Keyed by text: judge fixtures may distinguish passages that tokenize alike.
    if (auto it = judge_memo_.find(prompt); it != judge_memo_.end()) return it->second;
  }
  double score = inner_->judge_factuality(query, passage);
  std::lock_guard lock(mu_);
  judge_memo_.emplace(std::move(prompt), score);
  return score;
}

std::shared_ptr<Backend> with_prefix_cache(std::shared_ptr<Backend> inner) {
  return std::make_shared<PrefixCache>(std::move(inner));
}

}  // namespace ctxshape
