#pragma once

#include <span>
#include <string>
#include <vector>

#include "ctxshape/backend.hpp"
#include "ctxshape/corpus.hpp"
#include "ctxshape/token_distribution.hpp"

namespace ctxshape {

struct DivergenceConfig {
  std::size_t k_limit = kDefaultTopK;
  double epsilon_smoothing = 1e-10;
  std::size_t horizon_T = 8;

  // Throws InvalidArgument when an invariant is broken.
  void validate() const;
  bool operator==(const DivergenceConfig&) const = default;
};

// Two dense probability vectors over a shared support. The last slot is the
// "other" bucket holding each distribution's residual (untracked) mass.
struct AlignedPair {
  std::vector<TokenId> support;  // excludes the other bucket
  std::vector<double> p;         // size support.size() + 1
  std::vector<double> q;
};

// Aligns the top-k supports of p and q on their union plus an "other"
// bucket. Entries missing from one side start at zero, every slot is floored
// at epsilon_smoothing, then each vector is renormalized to sum to 1.
AlignedPair smooth_and_renormalize(const TokenDistribution& p, const TokenDistribution& q,
                                   const DivergenceConfig& cfg);

// sum_i p_i ln(p_i / q_i) over already-aligned vectors.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// KL(p || q) in nats after smooth_and_renormalize.
double kl_divergence(const TokenDistribution& p, const TokenDistribution& q,
                     const DivergenceConfig& cfg);

// Per-step KL(P_{C+u}^(t) || P_C^(t)) for t = 1..horizon_T. Both branches
// are conditioned on the same generated prefix: the greedy continuation of
// the augmented branch.
std::vector<double> trajectory_divergence_steps(Backend& backend, std::span<const std::string> context,
                                                const Candidate& u, std::string_view query,
                                                const DivergenceConfig& cfg);

// Sum of trajectory_divergence_steps.
double trajectory_divergence(Backend& backend, std::span<const std::string> context,
                             const Candidate& u, std::string_view query, const DivergenceConfig& cfg);

}  // namespace ctxshape
