#include "ctxshape/scripted_backend.hpp"

#include <algorithm>
#include <cmath>

#include "ctxshape/error.hpp"
#include "ctxshape/text.hpp"

namespace ctxshape {

ScriptedBackend::ScriptedBackend(std::size_t k_limit, std::size_t max_context_tokens)
    : k_limit_(k_limit), max_context_tokens_(max_context_tokens) {}

std::string ScriptedBackend::key(std::span<const std::string> context) {
  return text::join(context, "\x1f");
}

void ScriptedBackend::set_answer_logprob(std::vector<std::string> context, std::string answer,
                                         double logprob) {
  std::lock_guard lock(mu_);
  answers_[{key(context), std::move(answer)}] = logprob;
}

void ScriptedBackend::set_answer_probability(std::vector<std::string> context, std::string answer,
                                             double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("answer probability must lie in (0, 1]");
  set_answer_logprob(std::move(context), std::move(answer), std::log(p));
}

void ScriptedBackend::set_distributions(std::vector<std::string> context,
                                        std::vector<TokenDistribution> per_step) {
  if (per_step.empty()) throw InvalidArgument("set_distributions needs at least one step");
  std::lock_guard lock(mu_);
  distributions_[key(context)] = std::move(per_step);
}

void ScriptedBackend::set_judge_score(std::string passage, double score) {
  std::lock_guard lock(mu_);
  judge_[std::move(passage)] = score;
}

void ScriptedBackend::set_judge_logprobs(std::string passage, double yes_logprob, double no_logprob) {
  set_judge_score(std::move(passage), affirmative_probability(yes_logprob, no_logprob));
}

void ScriptedBackend::fail_on(std::string needle) {
  std::lock_guard lock(mu_);
  failures_.push_back(std::move(needle));
}

void ScriptedBackend::maybe_fail(std::span<const std::string> context, std::string_view query) const {
  std::lock_guard lock(mu_);
  for (const auto& needle : failures_) {
    bool hit = query.find(needle) != std::string_view::npos;
    for (const auto& c : context) hit = hit || c.find(needle) != std::string::npos;
    if (hit) throw BackendError("scripted failure on '" + needle + "'");
  }
}

std::vector<TokenId> ScriptedBackend::do_tokenize(std::string_view text) {
  std::vector<TokenId> out;
  for (const auto& w : text::words(text))
    out.push_back(static_cast<TokenId>(text::fnv1a(w) & 0x3fffffff));
  return out;
}

TokenDistribution ScriptedBackend::do_next_token_distribution(const PromptState& state) {
  maybe_fail(state.context, state.query);
  const std::size_t n = do_tokenize(render_prompt(state.context, state.query)).size() +
                        state.generated_prefix.size();
  check_context_fits(n);
  record_encoding(n, 0);
  std::lock_guard lock(mu_);
  auto it = distributions_.find(key(state.context));
  if (it == distributions_.end())
    throw BackendError("scripted backend has no distribution for this context");
  const auto& steps = it->second;
  return steps[std::min(state.generated_prefix.size(), steps.size() - 1)].top(k_limit_);
}

double ScriptedBackend::do_answer_logprob(std::span<const std::string> context,
                                          std::string_view query, std::string_view answer) {
  maybe_fail(context, query);
  const std::size_t n =
      do_tokenize(render_prompt(context, query)).size() + do_tokenize(answer).size();
  check_context_fits(n);
  record_encoding(n, 0);
  std::lock_guard lock(mu_);
  auto it = answers_.find({key(context), std::string(answer)});
  if (it == answers_.end())
    throw BackendError("scripted backend has no answer logprob for '" + std::string(answer) + "'");
  return it->second;
}

double ScriptedBackend::do_judge_factuality(std::string_view query, std::string_view passage) {
  const std::string p(passage);
  maybe_fail(std::span<const std::string>(&p, 1), query);
  std::lock_guard lock(mu_);
  auto it = judge_.find(p);
  if (it == judge_.end()) throw JudgeError("scripted backend has no judge entry for passage");
  return it->second;
}

}  // namespace ctxshape
