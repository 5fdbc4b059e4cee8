#include "ctxshape/scoring.hpp"

#include <cmath>
#include <map>
#include <unordered_set>

#include "ctxshape/error.hpp"
#include "ctxshape/text.hpp"

namespace ctxshape {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ecs_answer: return "ecs_answer";
    case Method::ecs_trajectory: return "ecs_trajectory";
    case Method::ecs_judge: return "ecs_judge";
    case Method::tfidf: return "tfidf";
    case Method::dense: return "dense";
    case Method::recency: return "recency";
    case Method::random: return "random";
  }
  return "random";
}

Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (to_string(m) == s) return m;
  throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

bool uses_backend(Method m) {
  return m == Method::ecs_answer || m == Method::ecs_trajectory || m == Method::ecs_judge;
}

std::string_view to_string(Decision d) { return d == Decision::accept ? "accept" : "reject"; }

void EcsConfig::validate() const {
  if (!(lambda_len >= 0.0) || !std::isfinite(lambda_len))
    throw InvalidArgument("lambda_len must be a finite value >= 0");
  if (!std::isfinite(tau)) throw InvalidArgument("tau must be finite");
  if (horizon_T < 1) throw InvalidArgument("horizon_T must be at least 1");
}

double ecs_utility(Backend& backend, std::span<const std::string> context, const Candidate& u,
                   std::string_view query, std::string_view answer, const EcsConfig& cfg) {
  cfg.validate();
  if (answer.empty()) throw InvalidArgument("ecs_utility needs a ground-truth answer");
  std::vector<std::string> augmented(context.begin(), context.end());
  augmented.push_back(u.text);
  const double with_u = backend.answer_logprob(augmented, query, answer);
  const double without_u = backend.answer_logprob(context, query, answer);
  const std::size_t length = u.text.empty() ? 0 : backend.token_length(u.text);
  return (with_u - without_u) - cfg.lambda_len * static_cast<double>(length);
}

double ecs_trajectory_score(Backend& backend, std::span<const std::string> context, const Candidate& u,
                            std::string_view query, const EcsConfig& cfg,
                            const DivergenceConfig& divergence) {
  cfg.validate();
  DivergenceConfig d = divergence;
  d.horizon_T = cfg.horizon_T;
  return trajectory_divergence(backend, context, u, query, d);
}

double ecs_judge_score(Backend& backend, std::string_view query, const Candidate& u) {
  // An empty passage carries no information to judge.
  if (u.text.empty()) return 0.0;
  return backend.judge_factuality(query, u.text);
}

TfidfIndex::TfidfIndex(std::span<const std::string> documents) : documents_(documents.size()) {
  for (const auto& doc : documents) {
    auto ws = text::words(doc);
    std::unordered_set<std::string> seen(ws.begin(), ws.end());
    for (const auto& w : seen) ++df_[w];
  }
}

TfidfIndex TfidfIndex::for_instance(const QuestionInstance& instance) {
  std::vector<std::string> docs;
  docs.reserve(instance.candidates.size());
  for (const auto& c : instance.candidates) docs.push_back(c.text);
  return TfidfIndex(docs);
}

std::size_t TfidfIndex::document_frequency(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double TfidfIndex::idf(const std::string& term) const {
  return std::log(static_cast<double>(documents_) / (1.0 + static_cast<double>(document_frequency(term)))) +
         1.0;
}

namespace {

std::map<std::string, double> tfidf_vector(std::string_view s, const TfidfIndex& stats) {
  std::map<std::string, double> counts;
  for (auto& w : text::words(s)) counts[std::move(w)] += 1.0;
  for (auto& [term, v] : counts) v *= stats.idf(term);
  return counts;
}

}  // namespace

double tfidf_score(std::string_view question, std::string_view candidate_text, const TfidfIndex& stats) {
  if (stats.document_count() == 0) return 0.0;
  auto a = tfidf_vector(question, stats);
  auto b = tfidf_vector(candidate_text, stats);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, v] : a) {
    na += v * v;
    if (auto it = b.find(t); it != b.end()) dot += v * it->second;
  }
  for (const auto& [t, v] : b) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double dense_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidArgument("dense_score dimension mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("dense_score of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double recency_score(const Candidate& candidate, const QuestionInstance& instance) {
  if (!candidate.timestamp)
    throw InvalidArgument("recency needs a timestamp on candidate '" + candidate.id + "'");
  std::size_t not_later = 0;
  for (const auto& c : instance.candidates) {
    if (!c.timestamp) throw InvalidArgument("recency needs a timestamp on candidate '" + c.id + "'");
    if (*c.timestamp <= *candidate.timestamp) ++not_later;
  }
  return static_cast<double>(not_later) / static_cast<double>(instance.candidates.size());
}

double random_score(std::uint64_t seed, std::string_view qid, std::string_view candidate_id) {
  std::uint64_t h = text::mix64(seed);
  h = text::fnv1a(qid, h);
  h = text::fnv1a("\x1f", h);
  h = text::fnv1a(candidate_id, h);
  return text::to_unit_interval(text::mix64(h));
}

void check_prerequisites(Method method, const QuestionInstance& inst, const Backend* backend) {
  const std::string where = "method " + std::string(to_string(method)) + " on '" + inst.qid + "'";
  if (uses_backend(method) && !backend) throw InvalidArgument(where + " needs a language-model backend");
  switch (method) {
    case Method::ecs_answer:
      if (!inst.answer || inst.answer->empty()) throw InvalidArgument(where + " needs a ground-truth answer");
      break;
    case Method::dense:
      if (!inst.query_embedding) throw InvalidArgument(where + " needs a query embedding");
      for (const auto& c : inst.candidates)
        if (!c.embedding) throw InvalidArgument(where + " needs an embedding on candidate '" + c.id + "'");
      break;
    case Method::recency:
      for (const auto& c : inst.candidates)
        if (!c.timestamp) throw InvalidArgument(where + " needs a timestamp on candidate '" + c.id + "'");
      break;
    default:
      break;
  }
}

std::vector<ScoredCandidate> score_all(Method method, const QuestionInstance& inst, Backend* backend,
                                       const ScoringConfig& cfg) {
  check_prerequisites(method, inst, backend);
  std::vector<ScoredCandidate> out;
  out.reserve(inst.candidates.size());
  const std::vector<std::string> empty_context;

  std::optional<TfidfIndex> index;
  if (method == Method::tfidf) index = TfidfIndex::for_instance(inst);

  for (const auto& c : inst.candidates) {
    double s = 0.0;
    switch (method) {
      case Method::ecs_answer:
        s = ecs_utility(*backend, empty_context, c, inst.query, *inst.answer, cfg.ecs);
        break;
      case Method::ecs_trajectory:
        s = ecs_trajectory_score(*backend, empty_context, c, inst.query, cfg.ecs, cfg.divergence);
        break;
      case Method::ecs_judge:
        s = ecs_judge_score(*backend, inst.query, c);
        break;
      case Method::tfidf:
        s = tfidf_score(inst.query, c.text, *index);
        break;
      case Method::dense:
        s = dense_score(*inst.query_embedding, *c.embedding);
        break;
      case Method::recency:
        s = recency_score(c, inst);
        break;
      case Method::random:
        s = random_score(cfg.seed, inst.qid, c.id);
        break;
    }
    out.push_back({c.id, method, s, std::nullopt});
  }
  return out;
}

}  // namespace ctxshape
