#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctxshape/config.hpp"
#include "ctxshape/divergence.hpp"
#include "ctxshape/error.hpp"
#include "ctxshape/harness.hpp"
#include "ctxshape/mock_backend.hpp"
#include "ctxshape/prefix_cache.hpp"
#include "ctxshape/synthetic.hpp"

namespace py = pybind11;
using namespace ctxshape;
using nlohmann::json;

namespace {

Candidate candidate(std::string text, std::string id = "u") {
  Candidate c;
  c.id = std::move(id);
  c.text = std::move(text);
  return c;
}

TokenDistribution dist_from(const std::vector<std::pair<TokenId, double>>& probs, std::size_t k) {
  return distribution_from_probs(probs, k, 0);
}

std::vector<ScoredCandidate> scored_from(const std::vector<std::pair<std::string, double>>& scores) {
  std::vector<ScoredCandidate> out;
  for (const auto& [id, s] : scores) out.push_back({id, Method::random, s, std::nullopt});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Context selection toolkit core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
  auto backend_error = py::register_exception<BackendError>(m, "BackendError", base.ptr());
  py::register_exception<ContextOverflowError>(m, "ContextOverflowError", backend_error.ptr());
  py::register_exception<JudgeError>(m, "JudgeError", backend_error.ptr());

  py::class_<Backend, std::shared_ptr<Backend>>(m, "Backend")
      .def_property_readonly("name", &Backend::name)
      .def_property_readonly("k_limit", &Backend::k_limit)
      .def("tokenize", &Backend::tokenize, py::arg("text"))
      .def(
          "next_token_distribution",
          [](Backend& b, std::vector<std::string> context, std::string query, std::vector<TokenId> prefix) {
            auto d = b.next_token_distribution({std::move(context), std::move(query), std::move(prefix)});
            std::vector<std::pair<TokenId, double>> out;
            for (const auto& e : d.entries()) out.emplace_back(e.token, e.logprob);
            return out;
          },
          py::arg("context"), py::arg("query"), py::arg("prefix") = std::vector<TokenId>{},
          py::call_guard<py::gil_scoped_release>())
      .def(
          "answer_logprob",
          [](Backend& b, const std::vector<std::string>& context, const std::string& query,
             const std::string& answer) { return b.answer_logprob(context, query, answer); },
          py::arg("context"), py::arg("query"), py::arg("answer"), py::call_guard<py::gil_scoped_release>())
      .def("judge_factuality", &Backend::judge_factuality, py::arg("query"), py::arg("passage"),
           py::call_guard<py::gil_scoped_release>())
      .def("cache_stats",
           [](const Backend& b) {
             CacheStats s = b.cache_stats();
             return py::dict(py::arg("prefix_tokens_reused") = s.prefix_tokens_reused,
                             py::arg("tokens_encoded") = s.tokens_encoded, py::arg("cold_calls") = s.cold_calls);
           })
      .def_property_readonly("call_count", &Backend::call_count);

  m.def(
      "mock_backend",
      [](bool prefix_cache, double cache_weight) -> std::shared_ptr<Backend> {
        MockConfig cfg = MockConfig::defaults();
        cfg.cache_weight = cache_weight;
        std::shared_ptr<Backend> b = std::make_shared<MockBackend>(std::move(cfg));
        return prefix_cache ? with_prefix_cache(b) : b;
      },
      py::arg("prefix_cache") = true, py::arg("cache_weight") = 0.5);
  m.def(
      "_make_backend", [](const std::string& cfg) { return make_backend(backend_config_from_json(json::parse(cfg))); },
      py::arg("config_json"));

  m.def(
      "kl_divergence",
      [](const std::vector<std::pair<TokenId, double>>& p, const std::vector<std::pair<TokenId, double>>& q,
         std::size_t k_limit, double epsilon) {
        DivergenceConfig cfg;
        cfg.k_limit = k_limit;
        cfg.epsilon_smoothing = epsilon;
        return kl_divergence(dist_from(p, k_limit), dist_from(q, k_limit), cfg);
      },
      py::arg("p"), py::arg("q"), py::arg("k_limit") = kDefaultTopK, py::arg("epsilon") = 1e-10,
      "KL(p || q) in nats; p and q are (token id, probability) pairs.");
  m.def(
      "trajectory_divergence",
      [](Backend& b, const std::vector<std::string>& context, const std::string& text, const std::string& query,
         std::size_t horizon_T) {
        DivergenceConfig cfg;
        cfg.k_limit = b.k_limit();
        cfg.horizon_T = horizon_T;
        return trajectory_divergence(b, context, candidate(text), query, cfg);
      },
      py::arg("backend"), py::arg("context"), py::arg("text"), py::arg("query"), py::arg("horizon_T") = 8,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "ecs_utility",
      [](Backend& b, const std::vector<std::string>& context, const std::string& text, const std::string& query,
         const std::string& answer, double lambda_len) {
        EcsConfig cfg;
        cfg.lambda_len = lambda_len;
        return ecs_utility(b, context, candidate(text), query, answer, cfg);
      },
      py::arg("backend"), py::arg("context"), py::arg("text"), py::arg("query"), py::arg("answer"),
      py::arg("lambda_len") = 0.002, py::call_guard<py::gil_scoped_release>());
  m.def(
      "tfidf_score",
      [](const std::string& question, const std::string& text, const std::vector<std::string>& documents) {
        return tfidf_score(question, text, TfidfIndex(documents));
      },
      py::arg("question"), py::arg("text"), py::arg("documents"));
  m.def("dense_score", [](const std::vector<double>& a, const std::vector<double>& b) { return dense_score(a, b); },
        py::arg("a"), py::arg("b"));
  m.def("random_score", &random_score, py::arg("seed"), py::arg("qid"), py::arg("candidate_id"));

  m.def(
      "select_top_k",
      [](const std::vector<std::pair<std::string, double>>& scores, std::size_t k) {
        return select_top_k(scored_from(scores), k);
      },
      py::arg("scores"), py::arg("k"));
  m.def("f1_at_gold_size", &f1_at_gold_size, py::arg("selected"), py::arg("gold"));

  m.def(
      "filter_stream",
      [](Backend& b, const std::vector<std::pair<std::string, std::string>>& updates, const std::string& query,
         std::optional<std::string> answer, double tau, double lambda_len) {
        std::vector<Candidate> us;
        for (const auto& [id, text] : updates) us.push_back(candidate(text, id));
        EcsConfig cfg;
        cfg.tau = tau;
        cfg.lambda_len = lambda_len;
        FilterResult r;
        {
          py::gil_scoped_release release;
          r = filter_stream(b, us, query, answer, cfg);
        }
        py::list log;
        for (const auto& s : r.log)
          log.append(py::dict(py::arg("id") = s.candidate_id, py::arg("branch") = std::string(to_string(s.branch)),
                              py::arg("score") = s.score, py::arg("decision") = std::string(to_string(s.decision))));
        std::vector<std::string> accepted;
        for (const auto& c : r.context) accepted.push_back(c.id);
        return py::dict(py::arg("accepted") = accepted, py::arg("log") = log, py::arg("complete") = r.complete,
                        py::arg("error") = r.error);
      },
      py::arg("backend"), py::arg("updates"), py::arg("query"), py::arg("answer") = py::none(),
      py::arg("tau") = 0.05, py::arg("lambda_len") = 0.002);

  m.def(
      "_generate_synthetic",
      [](std::uint64_t seed, std::size_t questions, std::size_t insight, std::size_t duplicate,
         std::size_t redherring, std::size_t counterfactual, const std::string& style, std::size_t insight_padding,
         const std::string& name) {
        SyntheticSpec spec;
        spec.questions = questions;
        spec.insight = insight;
        spec.duplicate = duplicate;
        spec.redherring = redherring;
        spec.counterfactual = counterfactual;
        spec.distractor_style = parse_distractor_style(style);
        spec.insight_padding = insight_padding;
        spec.name = name;
        return to_json(generate_synthetic(seed, spec)).dump();
      },
      py::arg("seed"), py::arg("questions"), py::arg("insight"), py::arg("duplicate"), py::arg("redherring"),
      py::arg("counterfactual"), py::arg("style"), py::arg("insight_padding"), py::arg("name"));
  m.def(
      "_validate_corpus",
      [](const std::string& text, const std::string& format) {
        Corpus c = parse_corpus(text, parse_corpus_format(format));
        return to_json(c).dump();
      },
      py::arg("text"), py::arg("format") = "normalized");
  m.def(
      "_run_benchmark",
      [](const std::string& config, std::optional<std::string> corpus_text) {
        RunConfig cfg = run_config_from_json(json::parse(config));
        py::gil_scoped_release release;
        if (!corpus_text) return to_json(run_benchmark(cfg)).dump();
        Corpus corpus = parse_corpus(*corpus_text, cfg.corpus_format);
        if (!cfg.qids.empty()) corpus = select_instances(corpus, cfg.qids);
        const bool any = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method x) { return uses_backend(x); });
        std::shared_ptr<Backend> backend = any ? make_backend(cfg.backend) : nullptr;
        auto embedder = make_embedder(cfg.embedder, cfg.backend);
        return to_json(run_benchmark(cfg, corpus, backend.get(), embedder.get())).dump();
      },
      py::arg("config_json"), py::arg("corpus_json") = py::none());
}
