#include "ctxshape/token_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "ctxshape/error.hpp"

namespace ctxshape {

namespace {

bool before(const TokenLogprob& a, const TokenLogprob& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.token < b.token;
}

}  // namespace

TokenDistribution::TokenDistribution(std::vector<TokenLogprob> entries, std::size_t k_limit,
                                     std::size_t step_index)
    : entries_(std::move(entries)), k_limit_(k_limit), step_index_(step_index) {
  if (k_limit_ == 0) throw InvalidArgument("token distribution k_limit must be at least 1");
  std::unordered_set<TokenId> seen;
  for (auto& e : entries_) {
    if (std::isnan(e.logprob)) throw InvalidArgument("token distribution contains NaN logprob");
    if (e.logprob > 0.0) {
      if (e.logprob > 1e-9)
        throw InvalidArgument("token distribution logprob " + std::to_string(e.logprob) +
                              " is positive");
      e.logprob = 0.0;
    }
    if (!seen.insert(e.token).second)
      throw InvalidArgument("token distribution lists token " + std::to_string(e.token) + " twice");
  }
  std::sort(entries_.begin(), entries_.end(), before);
  if (entries_.size() > k_limit_) entries_.resize(k_limit_);
}

std::optional<double> TokenDistribution::logprob(TokenId token) const {
  for (const auto& e : entries_)
    if (e.token == token) return e.logprob;
  return std::nullopt;
}

TokenId TokenDistribution::argmax() const {
  if (entries_.empty()) throw InvalidArgument("argmax of an empty token distribution");
  return entries_.front().token;
}

double TokenDistribution::retained_mass() const {
  double total = 0.0;
  for (const auto& e : entries_) total += std::exp(e.logprob);
  return total;
}

TokenDistribution TokenDistribution::top(std::size_t k) const {
  if (k == 0) throw InvalidArgument("top(k) needs k >= 1");
  TokenDistribution out = *this;
  if (out.entries_.size() > k) out.entries_.resize(k);
  out.k_limit_ = std::min(k_limit_, k);
  return out;
}

TokenDistribution distribution_from_probs(std::span<const std::pair<TokenId, double>> probs,
                                          std::size_t k_limit, std::size_t step_index) {
  std::vector<TokenLogprob> entries;
  entries.reserve(probs.size());
  for (const auto& [token, p] : probs)
    if (p > 0.0) entries.push_back({token, std::log(p)});
  return TokenDistribution(std::move(entries), k_limit, step_index);
}

}  // namespace ctxshape
