#include "ctxshape/backend.hpp"

#include <algorithm>
#include <cmath>

#include "ctxshape/error.hpp"

namespace ctxshape {

std::string render_prompt(std::span<const std::string> context, std::string_view query) {
  std::string out = "Context:\n";
  for (const auto& passage : context) {
    out.append(passage);
    out.push_back('\n');
  }
  out.append("Question: ");
  out.append(query);
  out.append("\nAnswer:");
  return out;
}

std::string render_judge_prompt(std::string_view query, std::string_view passage) {
  std::string out(kFactualityInstruction);
  out.append("\nQuestion: ");
  out.append(query);
  out.append("\nPassage: ");
  out.append(passage);
  out.append("\nReply yes or no.\nAnswer:");
  return out;
}

double affirmative_probability(double yes_logprob, double no_logprob) {
  // Logistic of the log-odds; stable for widely separated inputs.
  double d = yes_logprob - no_logprob;
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  double e = std::exp(d);
  return e / (1.0 + e);
}

std::vector<TokenId> Backend::tokenize(std::string_view text) {
  ++tokenize_calls_;
  return do_tokenize(text);
}

std::vector<TokenId> Backend::render_tokens(const PromptState& state) {
  std::vector<TokenId> tokens = tokenize(render_prompt(state.context, state.query));
  tokens.insert(tokens.end(), state.generated_prefix.begin(), state.generated_prefix.end());
  return tokens;
}

TokenDistribution Backend::next_token_distribution(const PromptState& state) {
  ++calls_;
  TokenDistribution dist = do_next_token_distribution(state);
  if (dist.empty()) throw BackendError(name() + " backend returned no tokens");
  dist.set_step_index(state.generated_prefix.size());
  return dist;
}

double Backend::answer_logprob(std::span<const std::string> context, std::string_view query,
                               std::string_view answer) {
  if (answer.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw InvalidArgument("answer_logprob needs a nonempty answer");
  ++calls_;
  double lp = do_answer_logprob(context, query, answer);
  if (std::isnan(lp) || lp > 1e-9)
    throw BackendError(name() + " backend returned invalid answer logprob " + std::to_string(lp));
  return std::min(lp, 0.0);
}

double Backend::judge_factuality(std::string_view query, std::string_view passage) {
  if (query.empty() || passage.empty())
    throw InvalidArgument("judge_factuality needs a nonempty query and passage");
  ++calls_;
  double score = do_judge_factuality(query, passage);
  if (!(score >= 0.0 && score <= 1.0))
    throw BackendError(name() + " backend returned judge score outside [0, 1]");
  return score;
}

CacheStats Backend::cache_stats() const {
  return CacheStats{prefix_tokens_reused_.load(), tokens_encoded_.load(), cold_calls_.load()};
}

void Backend::record_encoding(std::uint64_t encoded, std::uint64_t reused) {
  tokens_encoded_ += encoded;
  prefix_tokens_reused_ += reused;
  if (reused == 0) ++cold_calls_;
}

void Backend::check_context_fits(std::size_t rendered_tokens) const {
  if (rendered_tokens > max_context_tokens())
    throw ContextOverflowError(rendered_tokens, max_context_tokens());
}

Corpus with_token_lengths(const Corpus& corpus, Backend& backend) {
  Corpus out = corpus;
  for (auto& inst : out.instances)
    for (auto& c : inst.candidates) c.token_len = c.text.empty() ? 0 : backend.token_length(c.text);
  return out;
}

}  // namespace ctxshape
