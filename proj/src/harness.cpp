#include "ctxshape/harness.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "ctxshape/error.hpp"
#include "ctxshape/prefix_cache.hpp"

namespace ctxshape {

std::set<std::string> select_top_k(const std::vector<ScoredCandidate>& scores, std::size_t k) {
  if (k == 0 || k > scores.size())
    throw InvalidArgument("top-k needs 1 <= k <= " + std::to_string(scores.size()) + ", got " +
                          std::to_string(k));
  std::vector<const ScoredCandidate*> order;
  order.reserve(scores.size());
  for (const auto& s : scores) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const ScoredCandidate* a, const ScoredCandidate* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->candidate_id < b->candidate_id;
  });
  std::set<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.insert(order[i]->candidate_id);
  if (out.size() != k) throw InvalidArgument("top-k input repeats a candidate id");
  return out;
}

double f1_at_gold_size(const std::set<std::string>& selected, const std::set<std::string>& gold) {
  if (gold.empty()) throw ProtocolError("gold set is empty");
  if (selected.size() != gold.size())
    throw ProtocolError("selected " + std::to_string(selected.size()) + " items but gold has " +
                        std::to_string(gold.size()));
  std::size_t hits = 0;
  for (const auto& id : selected) hits += gold.count(id);
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::string_view to_string(FilterBranch b) { return b == FilterBranch::answer ? "answer" : "judge"; }

FilterResult filter_stream(Backend& backend, const std::vector<Candidate>& updates, std::string_view query,
                           const std::optional<std::string>& answer, const EcsConfig& cfg,
                           std::vector<Candidate> initial_context) {
  cfg.validate();
  FilterResult result;
  result.context = std::move(initial_context);
  std::vector<std::string> texts;
  for (const auto& c : result.context) texts.push_back(c.text);
  const FilterBranch branch = answer ? FilterBranch::answer : FilterBranch::judge;

  for (const auto& u : updates) {
    double score = 0.0;
    try {
      score = branch == FilterBranch::answer ? ecs_utility(backend, texts, u, query, *answer, cfg)
                                             : ecs_judge_score(backend, query, u);
    } catch (const BackendError& e) {
      result.complete = false;
      result.error = "update '" + u.id + "': " + e.what();
      return result;
    }
    const Decision d = score > cfg.tau ? Decision::accept : Decision::reject;
    result.log.push_back({u.id, branch, score, d});
    if (d == Decision::accept) {
      result.context.push_back(u);
      texts.push_back(u.text);
    }
  }
  return result;
}

namespace {

struct Cell {
  bool ok = false;
  std::string error;
  MethodResult result;
};

std::vector<std::string> sorted(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

Cell evaluate(Method m, const QuestionInstance& inst, Backend* backend, const ScoringConfig& sc) {
  Cell cell;
  try {
    auto scores = score_all(m, inst, backend, sc);
    auto selected = select_top_k(scores, inst.gold_ids.size());
    cell.result = {inst.qid, m, sorted(selected), sorted(inst.gold_ids), f1_at_gold_size(selected, inst.gold_ids)};
    cell.ok = true;
  } catch (const Error& e) {
    cell.error = "instance '" + inst.qid + "': " + e.what();
  } catch (const std::exception& e) {
    cell.error = "instance '" + inst.qid + "': " + e.what();
  }
  return cell;
}

bool needs_embeddings(const Corpus& corpus) {
  for (const auto& inst : corpus.instances) {
    if (!inst.query_embedding) return true;
    for (const auto& c : inst.candidates)
      if (!c.embedding) return true;
  }
  return false;
}

}  // namespace

EvalReport run_benchmark(const RunConfig& cfg, const Corpus& input, Backend* backend, Embedder* embedder) {
  cfg.validate();
  validate(input);
  const Corpus* corpus_ptr = &input;
  Corpus embedded;
  const bool wants_dense = std::find(cfg.methods.begin(), cfg.methods.end(), Method::dense) != cfg.methods.end();
  if (wants_dense && embedder && needs_embeddings(input)) {
    embedded = fill_embeddings(input, *embedder);
    corpus_ptr = &embedded;
  }
  const Corpus& corpus = *corpus_ptr;

  EvalReport report;
  report.config = to_json(cfg);
  // Where the report goes is not part of what produced it.
  report.config.erase("output_path");
  report.config.erase("csv_path");
  report.corpus_name = corpus.name;
  report.backend_name = backend ? backend->name() : "none";
  for (const auto& inst : corpus.instances) {
    InstanceRecord rec{inst.qid, inst.candidate_ids(), sorted(inst.gold_ids), {}};
    for (const auto& c : inst.candidates)
      if (c.text.empty()) rec.empty_candidate_ids.push_back(c.id);
    report.instances.push_back(std::move(rec));
  }

  ScoringConfig sc{cfg.ecs, cfg.divergence, cfg.seed};
  const std::size_t n_inst = corpus.instances.size();
  for (Method m : cfg.methods) {
    MethodSummary summary;
    summary.method = m;
    summary.uses_backend = uses_backend(m);
    std::vector<Cell> cells(n_inst);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto work = [&] {
      for (std::size_t i = next++; i < n_inst && !failed.load(); i = next++) {
        cells[i] = evaluate(m, corpus.instances[i], backend, sc);
        if (!cells[i].ok) failed = true;
      }
    };
    const std::size_t threads = std::min(cfg.workers, std::max<std::size_t>(n_inst, 1));
    if (threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    }

    // A single failed instance voids the method; partial results would break
    // parity with the other methods.
    for (const auto& c : cells) {
      if (!c.ok && !c.error.empty()) {
        summary.ok = false;
        summary.error = c.error;
        break;
      }
    }
    if (summary.ok) {
      double total = 0.0;
      for (auto& c : cells) {
        total += c.result.f1;
        report.results.push_back(std::move(c.result));
      }
      summary.instances = n_inst;
      if (n_inst) summary.mean_f1 = total / static_cast<double>(n_inst);
    }
    report.methods.push_back(std::move(summary));
  }
  if (backend) report.cache_stats = read_cache_stats(*backend);
  check_parity(report);
  return report;
}

EvalReport run_benchmark(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.corpus_path.empty()) throw InvalidArgument("run config has no corpus path");
  if (cfg.output_path.empty()) throw InvalidArgument("run config has no output path");
  Corpus corpus = load_corpus(cfg.corpus_path, cfg.corpus_format);
  if (!cfg.qids.empty()) corpus = select_instances(corpus, cfg.qids);

  const bool any_backend = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return uses_backend(m); });
  std::shared_ptr<Backend> backend = any_backend ? make_backend(cfg.backend) : nullptr;
  std::unique_ptr<Embedder> embedder = make_embedder(cfg.embedder, cfg.backend);

  EvalReport report = run_benchmark(cfg, corpus, backend.get(), embedder.get());
  emit_report(report, ReportFormat::json, cfg.output_path);
  if (!cfg.csv_path.empty()) emit_report(report, ReportFormat::csv_summary, cfg.csv_path);
  return report;
}

}  // namespace ctxshape
