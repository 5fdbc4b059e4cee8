#include "ctxshape/http_backend.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#include <httplib.h>

#include "ctxshape/error.hpp"

namespace ctxshape {

using nlohmann::json;

std::string_view to_string(LogBase b) {
  switch (b) {
    case LogBase::e: return "e";
    case LogBase::two: return "2";
    case LogBase::ten: return "10";
  }
  return "e";
}

LogBase parse_log_base(std::string_view s) {
  if (s == "e" || s == "ln") return LogBase::e;
  if (s == "2") return LogBase::two;
  if (s == "10") return LogBase::ten;
  throw InvalidArgument("unknown logprob base '" + std::string(s) + "' (expected e, 2 or 10)");
}

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

std::ptrdiff_t checked_slots(std::size_t n) {
  if (n == 0 || n > 1024) throw InvalidArgument("max_in_flight must lie in [1, 1024]");
  return static_cast<std::ptrdiff_t>(n);
}

// "Yes", " yes", "\u2581Yes" (SentencePiece) and "\u0120yes" (byte BPE) all
// name the same option.
std::string normalize_option(std::string_view token) {
  for (;;) {
    if (!token.empty() && (token.front() == ' ' || token.front() == '\t' || token.front() == '\n')) {
      token.remove_prefix(1);
    } else if (token.starts_with("\xe2\x96\x81")) {
      token.remove_prefix(3);
    } else if (token.starts_with("\xc4\xa0")) {
      token.remove_prefix(2);
    } else {
      break;
    }
  }
  while (!token.empty() && (token.back() == ' ' || token.back() == '\n')) token.remove_suffix(1);
  std::string out(token);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

const json& first_choice_logprobs(const json& response) {
  if (!response.contains("choices") || !response["choices"].is_array() || response["choices"].empty())
    throw BackendError("http backend response has no choices");
  const json& choice = response["choices"][0];
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object())
    throw BackendError("http backend response has no logprobs (does the server support them?)");
  return choice["logprobs"];
}

}  // namespace

HttpBackend::HttpBackend(HttpConfig config)
    : config_(std::move(config)), in_flight_(checked_slots(config_.max_in_flight)) {
  if (config_.k_limit == 0) throw InvalidArgument("http k_limit must be at least 1");
  if (!(config_.request_timeout > 0)) throw InvalidArgument("request_timeout must be positive");
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string HttpBackend::token_text(TokenId id) const {
  std::lock_guard lock(intern_mu_);
  auto idx = static_cast<std::size_t>(id - kInternBase);
  if (id < kInternBase || idx >= texts_.size())
    throw InvalidArgument("token id " + std::to_string(id) + " was not produced by this backend");
  return texts_[idx];
}

TokenId HttpBackend::intern(const std::string& token) {
  std::lock_guard lock(intern_mu_);
  auto [it, inserted] = ids_.try_emplace(token, kInternBase + static_cast<TokenId>(texts_.size()));
  if (inserted) texts_.push_back(token);
  return it->second;
}

double HttpBackend::to_nats(double v) const {
  switch (config_.logprob_base) {
    case LogBase::e: return v;
    case LogBase::two: return v * std::numbers::ln2;
    case LogBase::ten: return v * std::numbers::ln10;
  }
  return v;
}

json HttpBackend::post(const std::string& path, const json& body) {
  SlotGuard slot(in_flight_);
  httplib::Client cli(config_.base_url);
  auto secs = static_cast<time_t>(config_.request_timeout);
  auto usecs = static_cast<time_t>((config_.request_timeout - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw BackendError("backend unreachable at " + config_.base_url + path + ": " +
                       httplib::to_string(res.error()));
  if (res->status != 200) {
    std::string detail = res->body.substr(0, 300);
    throw BackendError("backend returned HTTP " + std::to_string(res->status) + " for " + path +
                       ": " + detail);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("backend returned malformed JSON: ") + e.what());
  }
}

json HttpBackend::complete(const std::string& prompt, bool echo, std::size_t logprobs,
                           std::size_t max_tokens) {
  json body = {{"prompt", prompt},
               {"max_tokens", max_tokens},
               {"temperature", 0.0},
               {"logprobs", logprobs},
               {"echo", echo}};
  if (!config_.model.empty()) body["model"] = config_.model;
  return post(config_.completions_path, body);
}

std::vector<TokenId> HttpBackend::do_tokenize(std::string_view text) {
  json body = {{"prompt", text}, {"content", text}, {"add_special_tokens", false}};
  if (!config_.model.empty()) body["model"] = config_.model;
  json res = post(config_.tokenize_path, body);
  if (!res.contains("tokens") || !res["tokens"].is_array())
    throw BackendError("tokenize response has no 'tokens' array");
  std::vector<TokenId> out;
  for (const auto& t : res["tokens"]) {
    if (!t.is_number_integer()) throw BackendError("tokenize response has a non-integer token");
    out.push_back(t.get<TokenId>());
  }
  return out;
}

std::size_t HttpBackend::preflight(const std::string& prompt) {
  if (!config_.preflight_tokenize) return 0;
  std::size_t n = tokenize(prompt).size();
  check_context_fits(n);
  return n;
}

void HttpBackend::account(const json& response, std::size_t preflight_tokens) {
  std::uint64_t prompt_tokens = preflight_tokens;
  std::uint64_t cached = 0;
  if (auto it = response.find("usage"); it != response.end() && it->is_object()) {
    if (it->contains("prompt_tokens") && (*it)["prompt_tokens"].is_number_integer())
      prompt_tokens = (*it)["prompt_tokens"].get<std::uint64_t>();
    if (auto d = it->find("prompt_tokens_details"); d != it->end() && d->is_object() &&
                                                   d->contains("cached_tokens") &&
                                                   (*d)["cached_tokens"].is_number_integer())
      cached = std::min<std::uint64_t>((*d)["cached_tokens"].get<std::uint64_t>(), prompt_tokens);
  }
  record_encoding(prompt_tokens - cached, cached);
}

TokenDistribution HttpBackend::do_next_token_distribution(const PromptState& state) {
  std::string prompt = render_prompt(state.context, state.query);
  for (TokenId t : state.generated_prefix) prompt += token_text(t);
  std::size_t n = preflight(prompt);

  json res = complete(prompt, false, config_.k_limit, 1);
  account(res, n);
  const json& lp = first_choice_logprobs(res);
  if (!lp.contains("top_logprobs") || !lp["top_logprobs"].is_array() || lp["top_logprobs"].empty() ||
      !lp["top_logprobs"][0].is_object() || lp["top_logprobs"][0].empty())
    throw BackendError("backend returned fewer than 1 token in top_logprobs");

  std::vector<TokenLogprob> entries;
  for (auto it = lp["top_logprobs"][0].begin(); it != lp["top_logprobs"][0].end(); ++it) {
    if (!it->is_number()) throw BackendError("top_logprobs entry is not a number");
    entries.push_back({intern(it.key()), to_nats(it->get<double>())});
  }
  return TokenDistribution(std::move(entries), config_.k_limit, state.generated_prefix.size());
}

double HttpBackend::do_answer_logprob(std::span<const std::string> context, std::string_view query,
                                      std::string_view answer) {
  const std::string prompt = render_prompt(context, query);
  const std::string full = prompt + " " + std::string(answer);
  std::size_t n = preflight(full);

  json res = complete(full, true, 1, config_.echo_max_tokens);
  account(res, n);
  const json& lp = first_choice_logprobs(res);
  if (!lp.contains("token_logprobs") || !lp.contains("text_offset") ||
      !lp["token_logprobs"].is_array() || !lp["text_offset"].is_array() ||
      lp["token_logprobs"].size() != lp["text_offset"].size())
    throw BackendError("echo response lacks aligned token_logprobs/text_offset arrays");

  // Answer tokens are those starting inside [prompt end, full end).
  double total = 0.0;
  std::size_t counted = 0;
  const auto& offsets = lp["text_offset"];
  const auto& logprobs = lp["token_logprobs"];
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    auto off = offsets[i].get<std::size_t>();
    if (off < prompt.size() || off >= full.size()) continue;
    if (!logprobs[i].is_number()) throw BackendError("echo response has null logprob for an answer token");
    total += to_nats(logprobs[i].get<double>());
    ++counted;
  }
  if (counted == 0) throw BackendError("echo response contained no answer tokens");
  return total;
}

double HttpBackend::do_judge_factuality(std::string_view query, std::string_view passage) {
  const std::string prompt = render_judge_prompt(query, passage);
  std::size_t n = preflight(prompt);
  json res = complete(prompt, false, config_.k_limit, 1);
  account(res, n);
  const json& lp = first_choice_logprobs(res);
  if (!lp.contains("top_logprobs") || !lp["top_logprobs"].is_array() || lp["top_logprobs"].empty() ||
      !lp["top_logprobs"][0].is_object())
    throw BackendError("backend returned fewer than 1 token in top_logprobs");

  double yes = 0.0;
  double no = 0.0;
  for (auto it = lp["top_logprobs"][0].begin(); it != lp["top_logprobs"][0].end(); ++it) {
    std::string opt = normalize_option(it.key());
    double p = std::exp(to_nats(it->get<double>()));
    if (opt == "yes") yes += p;
    else if (opt == "no") no += p;
  }
  if (yes == 0.0 || no == 0.0)
    throw JudgeError(std::string("judge option token '") + (yes == 0.0 ? "yes" : "no") +
                     "' is absent from the returned top-K");
  return affirmative_probability(std::log(yes), std::log(no));
}

}  // namespace ctxshape
