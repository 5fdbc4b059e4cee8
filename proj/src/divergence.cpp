#include "ctxshape/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ctxshape/error.hpp"

namespace ctxshape {

void DivergenceConfig::validate() const {
  if (k_limit < 1) throw InvalidArgument("k_limit must be at least 1");
  if (!(epsilon_smoothing > 0.0) || !std::isfinite(epsilon_smoothing))
    throw InvalidArgument("epsilon_smoothing must be positive");
  if (horizon_T < 1) throw InvalidArgument("horizon_T must be at least 1");
}

namespace {

void fill(const TokenDistribution& d, const std::unordered_map<TokenId, std::size_t>& slot,
          std::vector<double>& out, double epsilon) {
  const std::size_t other = out.size() - 1;
  double tracked = 0.0;
  for (const auto& e : d.entries()) {
    double p = std::exp(e.logprob);
    out[slot.at(e.token)] = p;
    tracked += p;
  }
  // Top-K mass above 1 is a backend defect; the other bucket then gets 0.
  out[other] = std::max(0.0, 1.0 - tracked);
  double total = 0.0;
  for (double& v : out) {
    v = std::max(v, epsilon);
    total += v;
  }
  for (double& v : out) v /= total;
}

}  // namespace

AlignedPair smooth_and_renormalize(const TokenDistribution& p, const TokenDistribution& q,
                                   const DivergenceConfig& cfg) {
  cfg.validate();
  if (p.empty() || q.empty()) throw InvalidArgument("cannot align an empty token distribution");
  const TokenDistribution pk = p.top(cfg.k_limit);
  const TokenDistribution qk = q.top(cfg.k_limit);

  AlignedPair out;
  std::unordered_map<TokenId, std::size_t> slot;
  for (const auto* d : {&pk, &qk}) {
    for (const auto& e : d->entries()) {
      if (slot.emplace(e.token, out.support.size()).second) out.support.push_back(e.token);
    }
  }
  out.p.assign(out.support.size() + 1, 0.0);
  out.q.assign(out.support.size() + 1, 0.0);
  fill(pk, slot, out.p, cfg.epsilon_smoothing);
  fill(qk, slot, out.q, cfg.epsilon_smoothing);
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("kl_divergence needs vectors of equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) throw InvalidArgument("kl_divergence: q has zero mass where p does not");
    if (p[i] == q[i]) continue;
    total += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative sum when p and q nearly coincide.
  return std::max(total, 0.0);
}

double kl_divergence(const TokenDistribution& p, const TokenDistribution& q,
                     const DivergenceConfig& cfg) {
  AlignedPair a = smooth_and_renormalize(p, q, cfg);
  return kl_divergence(a.p, a.q);
}

std::vector<double> trajectory_divergence_steps(Backend& backend, std::span<const std::string> context,
                                                const Candidate& u, std::string_view query,
                                                const DivergenceConfig& cfg) {
  cfg.validate();
  PromptState base{std::vector<std::string>(context.begin(), context.end()), std::string(query), {}};
  PromptState augmented = base;
  augmented.context.push_back(u.text);

  std::vector<double> steps;
  steps.reserve(cfg.horizon_T);
  for (std::size_t t = 0; t < cfg.horizon_T; ++t) {
    try {
      TokenDistribution p = backend.next_token_distribution(augmented);
      TokenDistribution q = backend.next_token_distribution(base);
      steps.push_back(kl_divergence(p, q, cfg));
      TokenId next = p.argmax();
      augmented.generated_prefix.push_back(next);
      base.generated_prefix.push_back(next);
    } catch (BackendError& e) {
      e.set_step_index(t + 1);
      throw;
    }
  }
  return steps;
}

double trajectory_divergence(Backend& backend, std::span<const std::string> context,
                             const Candidate& u, std::string_view query, const DivergenceConfig& cfg) {
  double total = 0.0;
  for (double d : trajectory_divergence_steps(backend, context, u, query, cfg)) total += d;
  return total;
}

}  // namespace ctxshape
