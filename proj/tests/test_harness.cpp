#include <doctest.h>

#include <cmath>

#include "ctxshape/error.hpp"
#include "ctxshape/harness.hpp"
#include "ctxshape/mock_backend.hpp"
#include "ctxshape/scripted_backend.hpp"
#include "ctxshape/synthetic.hpp"
#include "support.hpp"

using namespace ctxshape;

namespace {

std::vector<ScoredCandidate> scored(std::vector<std::pair<std::string, double>> v) {
  std::vector<ScoredCandidate> out;
  for (auto& [id, s] : v) out.push_back({id, Method::random, s, std::nullopt});
  return out;
}

Candidate cand(std::string id, std::string text) {
  Candidate c;
  c.id = std::move(id);
  c.text = std::move(text);
  return c;
}

RunConfig config(std::vector<Method> methods) {
  RunConfig cfg;
  cfg.methods = std::move(methods);
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("top-k picks the best and breaks ties by id") {
    CHECK(select_top_k(scored({{"a", 0.9}, {"b", 0.1}}), 1) == std::set<std::string>{"a"});
    CHECK(select_top_k(scored({{"b", 0.5}, {"a", 0.5}}), 1) == std::set<std::string>{"a"});
    CHECK(select_top_k(scored({{"a", 0.2}, {"b", 0.1}}), 2) == std::set<std::string>{"a", "b"});
    CHECK_THROWS_AS(select_top_k(scored({{"a", 0.2}}), 0), InvalidArgument);
    CHECK_THROWS_AS(select_top_k(scored({{"a", 0.2}}), 2), InvalidArgument);
  }

  TEST_CASE("f1 at gold size") {
    CHECK(f1_at_gold_size({"s1", "s2"}, {"s1", "s2"}) == 1.0);
    CHECK(f1_at_gold_size({"s1", "s3"}, {"s1", "s2"}) == 0.5);
    CHECK(f1_at_gold_size({"x", "y"}, {"s1", "s2"}) == 0.0);
    CHECK_THROWS_AS(f1_at_gold_size({"s1"}, {"s1", "s2"}), ProtocolError);
  }

  TEST_CASE("filter decisions follow the threshold") {
    ScriptedBackend b;
    b.set_answer_logprob({}, "a", -5.0);
    b.set_answer_logprob({"u1"}, "a", -3.8);            // +1.2
    b.set_answer_logprob({"u1", "u2"}, "a", -3.79);     // +0.01
    b.set_answer_logprob({"u1", "u3"}, "a", -4.3);      // -0.5
    EcsConfig cfg;
    cfg.lambda_len = 0.0;
    auto r = filter_stream(b, {cand("1", "u1"), cand("2", "u2"), cand("3", "u3")}, "q", "a", cfg);
    REQUIRE(r.log.size() == 3);
    CHECK(r.log[0].decision == Decision::accept);
    CHECK(r.log[1].decision == Decision::reject);
    CHECK(r.log[2].decision == Decision::reject);
    CHECK(r.log[0].score == doctest::Approx(1.2));
    CHECK(r.complete);
    REQUIRE(r.context.size() == 1);
    CHECK(r.context[0].id == "1");
  }

  TEST_CASE("empty stream leaves the context alone") {
    MockBackend m;
    auto r = filter_stream(m, {}, "q", std::nullopt, {}, {cand("c0", "seed")});
    CHECK(r.log.empty());
    CHECK(r.context.size() == 1);
    CHECK(m.call_count() == 0);
  }

  TEST_CASE("motivating stream on the mock: insight, duplicate, red herring") {
    MockBackend m;
    std::vector<Candidate> stream{cand("insight", "The capital of France is Paris."),
                                  cand("duplicate", "Paris is France's capital city."),
                                  cand("redherring", "The conductor enjoys jazz.")};
    auto r = filter_stream(m, stream, "What is the capital of France?", "Paris", {});
    REQUIRE(r.log.size() == 3);
    CHECK(r.log[0].decision == Decision::accept);
    CHECK(r.log[1].decision == Decision::reject);
    CHECK(r.log[2].decision == Decision::reject);
    // The red herring's only cost is its length.
    CHECK(r.log[2].score == doctest::Approx(-0.002 * 4).epsilon(1e-12));
  }

  TEST_CASE("without an answer the judge branch decides") {
    ScriptedBackend b;
    b.set_judge_score("good", 0.9);
    b.set_judge_score("meh", 0.05);
    auto r = filter_stream(b, {cand("1", "good"), cand("2", "meh")}, "q", std::nullopt, {});
    REQUIRE(r.log.size() == 2);
    CHECK(r.log[0].branch == FilterBranch::judge);
    CHECK(r.log[0].decision == Decision::accept);
    CHECK(r.log[1].decision == Decision::reject);  // not strictly above tau
  }

  TEST_CASE("backend failure keeps the partial log and marks it incomplete") {
    ScriptedBackend b;
    b.set_judge_score("good", 0.9);
    b.fail_on("boom");
    auto r = filter_stream(b, {cand("1", "good"), cand("2", "boom"), cand("3", "good")}, "q", std::nullopt, {});
    CHECK_FALSE(r.complete);
    CHECK(r.log.size() == 1);
    CHECK(r.error.find("'2'") != std::string::npos);
  }

  TEST_CASE("benchmark covers every method on the same instances") {
    Corpus c = generate_synthetic(4, SyntheticSpec{.questions = 4});
    MockBackend m;
    EvalReport r = run_benchmark(config({Method::tfidf, Method::random, Method::ecs_answer}), c, &m);
    REQUIRE(r.methods.size() == 3);
    for (const auto& s : r.methods) {
      CHECK(s.ok);
      CHECK(s.instances == 4);
    }
    CHECK(r.results.size() == 12);
    CHECK(r.aggregation == "macro");
    CHECK_NOTHROW(check_parity(r));
    CHECK(r.summary(Method::ecs_answer)->mean_f1 == 1.0);
  }

  TEST_CASE("gold sharing a rare query term makes tfidf perfect") {
    Corpus c = generate_synthetic(6, SyntheticSpec{.duplicate = 0, .redherring = 19, .counterfactual = 0,
                                                   .distractor_style = DistractorStyle::topical});
    EvalReport r = run_benchmark(config({Method::tfidf}), c, nullptr);
    CHECK(r.summary(Method::tfidf)->mean_f1 == 1.0);
  }

  TEST_CASE("a failing instance fails the whole method, other methods still report") {
    Corpus c = generate_synthetic(4, SyntheticSpec{.questions = 3});
    c.instances[1].answer.reset();
    MockBackend m;
    EvalReport r = run_benchmark(config({Method::ecs_answer, Method::tfidf}), c, &m);
    const MethodSummary* ecs = r.summary(Method::ecs_answer);
    CHECK_FALSE(ecs->ok);
    CHECK_FALSE(ecs->mean_f1.has_value());
    CHECK(ecs->error.find("q1") != std::string::npos);
    CHECK(r.summary(Method::tfidf)->ok);
    for (const auto& res : r.results) CHECK(res.method == Method::tfidf);
    CHECK_NOTHROW(check_parity(r));
  }

  TEST_CASE("workers do not change the report") {
    Corpus c = generate_synthetic(8, SyntheticSpec{.questions = 6});
    RunConfig one = config({Method::ecs_answer, Method::random});
    RunConfig many = one;
    many.workers = 3;
    MockBackend a, b;
    EvalReport ra = run_benchmark(one, c, &a);
    EvalReport rb = run_benchmark(many, c, &b);
    CHECK(ra.results == rb.results);
    CHECK(ra.methods == rb.methods);
  }

  TEST_CASE("empty-text candidates are flagged") {
    Corpus c = generate_synthetic(4, SyntheticSpec{.questions = 1});
    c.instances[0].candidates.push_back(cand("zz", ""));
    c.instances[0].candidates.back().timestamp = 99;
    MockBackend m;
    EvalReport r = run_benchmark(config({Method::ecs_answer}), c, &m);
    CHECK(r.instances[0].empty_candidate_ids == std::vector<std::string>{"zz"});
    CHECK(r.summary(Method::ecs_answer)->ok);
  }

  TEST_CASE("run from a config writes the report atomically") {
    testing::TempDir dir;
    save_corpus(generate_synthetic(1, SyntheticSpec{.questions = 2}), dir / "c.json");
    RunConfig cfg = config({Method::tfidf, Method::ecs_answer});
    cfg.corpus_path = (dir / "c.json").string();
    cfg.output_path = (dir / "r.json").string();
    cfg.csv_path = (dir / "r.csv").string();
    EvalReport r = run_benchmark(cfg);
    CHECK(std::filesystem::exists(dir / "r.json"));
    CHECK_FALSE(std::filesystem::exists(dir / "r.json.tmp"));
    CHECK(report_from_json(nlohmann::json::parse(testing::read_file(dir / "r.json"))) == r);
    CHECK(r.backend_name == "mock+prefix-cache");
    CHECK(r.cache_stats.prefix_tokens_reused > 0);
  }

  TEST_CASE("qid subsets are honoured") {
    testing::TempDir dir;
    save_corpus(generate_synthetic(1, SyntheticSpec{.questions = 5}), dir / "c.json");
    RunConfig cfg = config({Method::random});
    cfg.corpus_path = (dir / "c.json").string();
    cfg.output_path = (dir / "r.json").string();
    cfg.qids = {"q3", "q1"};
    EvalReport r = run_benchmark(cfg);
    REQUIRE(r.instances.size() == 2);
    CHECK(r.instances[0].qid == "q3");
  }

  TEST_CASE("invalid run configs") {
    Corpus c = generate_synthetic(1, SyntheticSpec{.questions = 1});
    CHECK_THROWS_AS(run_benchmark(config({}), c, nullptr), InvalidArgument);
    CHECK_THROWS_AS(run_benchmark(config({Method::tfidf, Method::tfidf}), c, nullptr), InvalidArgument);
    RunConfig bad = config({Method::tfidf});
    bad.selection_rule = "top-5";
    CHECK_THROWS_AS(run_benchmark(bad, c, nullptr), InvalidArgument);
  }
}
