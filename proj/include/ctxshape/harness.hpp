#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctxshape/config.hpp"
#include "ctxshape/report.hpp"
#include "ctxshape/scoring.hpp"

namespace ctxshape {

// Ids of the k best scores; ties go to the smaller id.
std::set<std::string> select_top_k(const std::vector<ScoredCandidate>& scores, std::size_t k);

// |selected & gold| / |gold|. Requires equal sizes, which makes this number
// precision, recall and F1 at once.
double f1_at_gold_size(const std::set<std::string>& selected, const std::set<std::string>& gold);

enum class FilterBranch { answer, judge };
std::string_view to_string(FilterBranch b);

struct FilterStep {
  std::string candidate_id;
  FilterBranch branch = FilterBranch::answer;
  double score = 0.0;
  Decision decision = Decision::reject;
};

struct FilterResult {
  std::vector<Candidate> context;  // accepted updates, in arrival order
  std::vector<FilterStep> log;
  bool complete = true;
  // Set when a backend error stopped the pass early.
  std::string error;
};

// Sequential accept/reject pass. With an answer each update is scored by
// ecs_utility against the context accepted so far, otherwise by the judge.
// Accepts iff score > tau.
FilterResult filter_stream(Backend& backend, const std::vector<Candidate>& updates, std::string_view query,
                           const std::optional<std::string>& answer, const EcsConfig& cfg,
                           std::vector<Candidate> initial_context = {});

// Scores `corpus` with every configured method. backend may be null when no
// method needs one; embedder likewise unless dense is requested and the
// corpus lacks embeddings. Does not write files.
EvalReport run_benchmark(const RunConfig& cfg, const Corpus& corpus, Backend* backend,
                         Embedder* embedder = nullptr);

// Loads the corpus, builds backend and embedder from cfg, runs, and writes
// the report (plus the CSV summary when csv_path is set).
EvalReport run_benchmark(const RunConfig& cfg);

}  // namespace ctxshape
