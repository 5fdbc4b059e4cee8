#include "ctxshape/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctxshape/embedded_data.hpp"
#include "ctxshape/error.hpp"
#include "ctxshape/text.hpp"

namespace ctxshape {

namespace {

constexpr std::uint64_t kOovSpace = 1ULL << 30;

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

MockConfig MockConfig::defaults() {
  MockConfig cfg;
  cfg.training_text = std::string(embedded::toy_corpus());
  for (const auto& line : lines_of(embedded::irrelevant_tokens())) {
    if (line.empty() || line.front() == '#') continue;
    for (auto& w : text::words(line)) cfg.irrelevant_tokens.push_back(std::move(w));
  }
  return cfg;
}

MockBackend::MockBackend(MockConfig config) : config_(std::move(config)) {
  if (!(config_.cache_weight >= 0.0 && config_.cache_weight < 1.0))
    throw InvalidArgument("mock cache_weight must lie in [0, 1)");
  if (config_.k_limit == 0) throw InvalidArgument("mock k_limit must be at least 1");
  if (!(config_.oov_inventory >= 1.0)) throw InvalidArgument("mock oov_inventory must be >= 1");

  for (const auto& w : config_.irrelevant_tokens)
    for (auto& piece : text::words(w)) irrelevant_.insert(std::move(piece));

  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> words;
  for (const auto& line : lines_of(config_.training_text)) {
    auto ws = text::words(line);
    if (ws.empty()) continue;
    words.insert(words.end(), ws.begin(), ws.end());
    lines.push_back(std::move(ws));
  }
  // Template words are always in the vocabulary.
  for (const char* w : {"context", "question", "answer", "yes", "no"}) words.emplace_back(w);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  vocab_ = std::move(words);
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<TokenId>(i));

  rows_.resize(vocab_.size());
  row_totals_.assign(vocab_.size(), 0);
  for (const auto& ws : lines) {
    for (std::size_t i = 1; i < ws.size(); ++i) {
      TokenId prev = index_.at(ws[i - 1]);
      TokenId next = index_.at(ws[i]);
      ++rows_[prev][next];
      ++row_totals_[prev];
    }
  }
  answer_cue_ = index_.at("answer");
}

std::optional<TokenId> MockBackend::vocab_id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId MockBackend::token_id(std::string_view word) const {
  if (auto id = vocab_id(word)) return *id;
  // Ids above the vocabulary (and its unknown-word class) are hashed words.
  auto h = text::fnv1a(word) % kOovSpace;
  return static_cast<TokenId>(vocab_.size() + 1 + h);
}

std::string MockBackend::token_text(TokenId id) const {
  if (id >= 0 && static_cast<std::size_t>(id) < vocab_.size()) return vocab_[id];
  return "<oov:" + std::to_string(id) + ">";
}

bool MockBackend::is_irrelevant(std::string_view word) const {
  return irrelevant_.contains(std::string(word));
}

std::uint32_t MockBackend::bigram_count(std::string_view prev, std::string_view next) const {
  auto p = vocab_id(prev);
  auto n = vocab_id(next);
  if (!p || !n) return 0;
  auto it = rows_[*p].find(*n);
  return it == rows_[*p].end() ? 0 : it->second;
}

std::uint32_t MockBackend::row_total(std::string_view prev) const {
  auto p = vocab_id(prev);
  return p ? row_totals_[*p] : 0;
}

std::vector<TokenId> MockBackend::tokens_of(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& w : text::words(text)) out.push_back(token_id(w));
  return out;
}

std::vector<TokenId> MockBackend::do_tokenize(std::string_view text) { return tokens_of(text); }

MockBackend::Conditioning MockBackend::condition_on(std::span<const std::string> context) const {
  Conditioning cond;
  for (const auto& passage : context) {
    for (const auto& w : text::words(passage)) {
      if (is_irrelevant(w)) continue;
      ++cond.copy_counts[token_id(w)];
      ++cond.copy_total;
    }
  }
  return cond;
}

double MockBackend::bigram(TokenId prev, TokenId next) const {
  const std::size_t v = vocab_.size();
  const bool prev_known = prev >= 0 && static_cast<std::size_t>(prev) < v;
  const double denom = static_cast<double>((prev_known ? row_totals_[prev] : 0) + v + 1);
  if (next >= 0 && static_cast<std::size_t>(next) < v) {
    std::uint32_t c = 0;
    if (prev_known) {
      auto it = rows_[prev].find(next);
      if (it != rows_[prev].end()) c = it->second;
    }
    return (c + 1.0) / denom;
  }
  // Training lines hold no unknown words, so the unknown class has count 0.
  return 1.0 / denom / config_.oov_inventory;
}

double MockBackend::prob(const Conditioning& cond, TokenId prev, TokenId next) const {
  const double b = bigram(prev, next);
  if (cond.copy_total == 0) return b;
  const double w = config_.cache_weight;
  double copy = 0.0;
  if (auto it = cond.copy_counts.find(next); it != cond.copy_counts.end())
    copy = static_cast<double>(it->second) / cond.copy_total;
  return (1.0 - w) * b + w * copy;
}

TokenDistribution MockBackend::distribution(const Conditioning& cond, TokenId prev,
                                            std::size_t step) const {
  std::vector<std::pair<TokenId, double>> probs;
  probs.reserve(vocab_.size() + cond.copy_counts.size());
  for (std::size_t y = 0; y < vocab_.size(); ++y) {
    auto id = static_cast<TokenId>(y);
    probs.emplace_back(id, prob(cond, prev, id));
  }
  for (const auto& [id, count] : cond.copy_counts)
    if (static_cast<std::size_t>(id) >= vocab_.size()) probs.emplace_back(id, prob(cond, prev, id));
  return distribution_from_probs(probs, config_.k_limit, step);
}

std::size_t MockBackend::rendered_length(std::span<const std::string> context,
                                         std::string_view query) const {
  return text::words(render_prompt(context, query)).size();
}

double MockBackend::probability(const PromptState& state, TokenId token) const {
  Conditioning cond = condition_on(state.context);
  TokenId prev = state.generated_prefix.empty() ? answer_cue_ : state.generated_prefix.back();
  return prob(cond, prev, token);
}

TokenDistribution MockBackend::do_next_token_distribution(const PromptState& state) {
  const std::size_t n = rendered_length(state.context, state.query) + state.generated_prefix.size();
  check_context_fits(n);
  record_encoding(n, 0);
  Conditioning cond = condition_on(state.context);
  TokenId prev = state.generated_prefix.empty() ? answer_cue_ : state.generated_prefix.back();
  return distribution(cond, prev, state.generated_prefix.size());
}

double MockBackend::do_answer_logprob(std::span<const std::string> context, std::string_view query,
                                      std::string_view answer) {
  std::vector<TokenId> answer_tokens = tokens_of(answer);
  if (answer_tokens.empty()) throw InvalidArgument("answer has no tokens under the mock tokenizer");
  const std::size_t n = rendered_length(context, query) + answer_tokens.size();
  check_context_fits(n);
  record_encoding(n, 0);
  Conditioning cond = condition_on(context);
  TokenId prev = answer_cue_;
  double total = 0.0;
  for (TokenId t : answer_tokens) {
    total += std::log(prob(cond, prev, t));
    prev = t;
  }
  return total;
}

double MockBackend::do_judge_factuality(std::string_view query, std::string_view passage) {
  if (auto it = config_.judge_fixtures.find(std::string(passage)); it != config_.judge_fixtures.end())
    return it->second;
  const std::size_t n = text::words(render_judge_prompt(query, passage)).size();
  check_context_fits(n);
  record_encoding(n, 0);
  // No fixture: read the yes/no options off the model, with the passage as
  // the conditioning context.
  const std::string passage_text(passage);
  Conditioning cond = condition_on(std::span<const std::string>(&passage_text, 1));
  TokenDistribution dist = distribution(cond, answer_cue_, 0);
  auto yes = dist.logprob(index_.at("yes"));
  auto no = dist.logprob(index_.at("no"));
  if (!yes || !no)
    throw JudgeError("mock judge: yes/no option tokens are not in the top-" +
                     std::to_string(config_.k_limit) + " distribution");
  return affirmative_probability(*yes, *no);
}

}  // namespace ctxshape
