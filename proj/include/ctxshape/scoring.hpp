#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxshape/backend.hpp"
#include "ctxshape/corpus.hpp"
#include "ctxshape/divergence.hpp"

namespace ctxshape {

enum class Method { ecs_answer, ecs_trajectory, ecs_judge, tfidf, dense, recency, random };

inline constexpr Method kAllMethods[] = {Method::ecs_answer, Method::ecs_trajectory, Method::ecs_judge,
                                         Method::tfidf,      Method::dense,          Method::recency,
                                         Method::random};

std::string_view to_string(Method m);
Method parse_method(std::string_view s);
// True for the ECS scorers, which query the language model.
bool uses_backend(Method m);

struct EcsConfig {
  double lambda_len = 0.002;
  double tau = 0.05;
  std::size_t horizon_T = 8;

  void validate() const;
  bool operator==(const EcsConfig&) const = default;
};

enum class Decision { accept, reject };
std::string_view to_string(Decision d);

struct ScoredCandidate {
  std::string candidate_id;
  Method method = Method::random;
  double score = 0.0;
  // Set only by the threshold filter.
  std::optional<Decision> decision;

  bool operator==(const ScoredCandidate&) const = default;
};

struct ScoringConfig {
  EcsConfig ecs;
  DivergenceConfig divergence;
  std::uint64_t seed = 0;
};

// log P_{C+u}(a*) - log P_C(a*) - lambda * |u|, natural logs, |u| in backend
// tokens.
double ecs_utility(Backend& backend, std::span<const std::string> context, const Candidate& u,
                   std::string_view query, std::string_view answer, const EcsConfig& cfg);

// Unsigned trajectory divergence over cfg.horizon_T steps. Blind to the
// direction of the shift.
double ecs_trajectory_score(Backend& backend, std::span<const std::string> context, const Candidate& u,
                            std::string_view query, const EcsConfig& cfg,
                            const DivergenceConfig& divergence = {});

double ecs_judge_score(Backend& backend, std::string_view query, const Candidate& u);

// Document-frequency table over one instance's candidate texts.
class TfidfIndex {
 public:
  explicit TfidfIndex(std::span<const std::string> documents);
  static TfidfIndex for_instance(const QuestionInstance& instance);

  std::size_t document_count() const { return documents_; }
  std::size_t document_frequency(const std::string& term) const;
  // ln(N / (1 + df)) + 1
  double idf(const std::string& term) const;

 private:
  std::size_t documents_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

// Cosine of raw-count TF x smoothed-IDF vectors; 0 when either side is empty.
double tfidf_score(std::string_view question, std::string_view candidate_text, const TfidfIndex& stats);

// Cosine similarity; throws on dimension mismatch or a zero vector.
double dense_score(std::span<const double> question_embedding, std::span<const double> candidate_embedding);

// (number of candidates with timestamp <= this one) / n, so the latest is 1.
double recency_score(const Candidate& candidate, const QuestionInstance& instance);

// Uniform in [0, 1), a pure function of (seed, qid, candidate id).
double random_score(std::uint64_t seed, std::string_view qid, std::string_view candidate_id);

// One score per candidate, in candidate order. ECS methods score every
// candidate independently against an empty context. Any backend error aborts
// the whole instance.
std::vector<ScoredCandidate> score_all(Method method, const QuestionInstance& instance, Backend* backend,
                                       const ScoringConfig& cfg);

// Throws InvalidArgument naming what `method` needs but `instance` lacks.
void check_prerequisites(Method method, const QuestionInstance& instance, const Backend* backend);

}  // namespace ctxshape
