#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <thread>

#include <json.hpp>

#include "ctxshape/error.hpp"
#include "ctxshape/http_backend.hpp"
#include "support.hpp"

using namespace ctxshape;
using nlohmann::json;

namespace {

// Splits text before each space: "a b c" -> "a", " b", " c".
std::vector<std::pair<std::size_t, std::string>> space_pieces(const std::string& s) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ' ') {
      out.emplace_back(start, s.substr(start, i - start));
      start = i;
    }
  }
  return out;
}

struct Recorder {
  std::mutex mu;
  std::vector<json> bodies;
  std::vector<std::string> auth;
  void add(const httplib::Request& req) {
    std::lock_guard lock(mu);
    bodies.push_back(json::parse(req.body));
    auth.push_back(req.get_header_value("Authorization"));
  }
};

// A small completions server: top_logprobs for one-token requests, per-piece
// logprob -1 for echo requests, and a word-count tokenizer.
void openai_routes(httplib::Server& s, Recorder& rec, json judge_top = nullptr) {
  s.Post("/v1/completions", [&rec, judge_top](const httplib::Request& req, httplib::Response& res) {
    rec.add(req);
    json body = json::parse(req.body);
    const std::string prompt = body["prompt"];
    json choice;
    json usage = {{"prompt_tokens", space_pieces(prompt).size()},
                  {"prompt_tokens_details", {{"cached_tokens", 3}}}};
    if (body.value("echo", false)) {
      json offsets = json::array(), lps = json::array(), toks = json::array();
      bool first = true;
      for (const auto& [off, piece] : space_pieces(prompt)) {
        offsets.push_back(off);
        toks.push_back(piece);
        lps.push_back(first ? json(nullptr) : json(-1.0));
        first = false;
      }
      choice = {{"text", prompt}, {"logprobs", {{"tokens", toks}, {"token_logprobs", lps}, {"text_offset", offsets}}}};
    } else {
      json top = judge_top.is_null() ? json{{" Paris", -0.2}, {" Rome", -1.9}, {" yes", -3.0}} : judge_top;
      choice = {{"text", " Paris"}, {"logprobs", {{"top_logprobs", json::array({top})}}}};
    }
    res.set_content(json{{"choices", {choice}}, {"usage", usage}}.dump(), "application/json");
  });
  s.Post("/tokenize", [&rec](const httplib::Request& req, httplib::Response& res) {
    rec.add(req);
    json body = json::parse(req.body);
    json tokens = json::array();
    for (std::size_t i = 0; i < space_pieces(body["prompt"]).size(); ++i) tokens.push_back(static_cast<int>(i));
    res.set_content(json{{"tokens", tokens}}.dump(), "application/json");
  });
}

HttpConfig config_for(const testing::FakeServer& server) {
  HttpConfig cfg;
  cfg.base_url = server.url();
  cfg.model = "test-model";
  cfg.request_timeout = 5;
  return cfg;
}

}  // namespace

TEST_SUITE("http_backend") {
  TEST_CASE("next-token distribution comes from top_logprobs") {
    Recorder rec;
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec); });
    ::setenv("CTXSHAPE_TEST_KEY", "sekrit", 1);
    HttpConfig cfg = config_for(server);
    cfg.api_key_env = "CTXSHAPE_TEST_KEY";
    cfg.k_limit = 20;
    HttpBackend b(cfg);
    TokenDistribution d = b.next_token_distribution({{"ctx"}, "capital?", {}});
    REQUIRE(d.size() == 3);
    CHECK(b.token_text(d.argmax()) == " Paris");
    CHECK(*d.logprob(d.argmax()) == doctest::Approx(-0.2));
    CHECK(d.argmax() >= HttpBackend::kInternBase);

    std::lock_guard lock(rec.mu);
    // Preflight tokenize, then the completion.
    REQUIRE(rec.bodies.size() == 2);
    CHECK(rec.bodies[0]["add_special_tokens"] == false);
    const json& body = rec.bodies[1];
    CHECK(body["max_tokens"] == 1);
    CHECK(body["logprobs"] == 20);
    CHECK(body["temperature"] == 0.0);
    CHECK(body["model"] == "test-model");
    CHECK(body["prompt"] == render_prompt(std::vector<std::string>{"ctx"}, "capital?"));
    CHECK(rec.auth[1] == "Bearer sekrit");
    ::unsetenv("CTXSHAPE_TEST_KEY");
  }

  TEST_CASE("interned ids are stable across calls") {
    Recorder rec;
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec); });
    HttpBackend b(config_for(server));
    auto d1 = b.next_token_distribution({{}, "q", {}});
    auto d2 = b.next_token_distribution({{"other"}, "q", {}});
    CHECK(d1.argmax() == d2.argmax());
  }

  TEST_CASE("answer logprob sums the echoed answer tokens") {
    Recorder rec;
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec); });
    HttpBackend b(config_for(server));
    CHECK(b.answer_logprob({}, "capital?", "Paris") == doctest::Approx(-1.0));
    CHECK(b.answer_logprob(std::vector<std::string>{"ctx"}, "capital?", "New York City") == doctest::Approx(-3.0));
    std::lock_guard lock(rec.mu);
    CHECK(rec.bodies.back()["echo"] == true);
  }

  TEST_CASE("base-2 logprobs are converted to nats") {
    Recorder rec;
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec); });
    HttpConfig cfg = config_for(server);
    cfg.logprob_base = LogBase::two;
    HttpBackend b(cfg);
    CHECK(b.answer_logprob({}, "q", "New York") == doctest::Approx(-2.0 * std::numbers::ln2));
  }

  TEST_CASE("judge reads yes/no variants from the top-k") {
    Recorder rec;
    json top = {{"\xe2\x96\x81Yes", -0.105}, {" No", -2.303}, {"Maybe", -4.0}};
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec, top); });
    HttpBackend b(config_for(server));
    CHECK(b.judge_factuality("q", "passage") == doctest::Approx(0.9).epsilon(1e-3));
    std::lock_guard lock(rec.mu);
    std::string prompt = rec.bodies.back()["prompt"];
    CHECK(prompt.find(std::string(kFactualityInstruction)) != std::string::npos);
  }

  TEST_CASE("judge without the negative option is an error, not zero") {
    Recorder rec;
    json top = {{" yes", -0.1}, {" maybe", -2.0}};
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec, top); });
    HttpBackend b(config_for(server));
    CHECK_THROWS_AS(b.judge_factuality("q", "passage"), JudgeError);
  }

  TEST_CASE("usage feeds the cache counters") {
    Recorder rec;
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec); });
    HttpConfig cfg = config_for(server);
    cfg.preflight_tokenize = false;
    HttpBackend b(cfg);
    b.next_token_distribution({{}, "what is the capital of france", {}});
    std::string prompt = render_prompt(std::vector<std::string>{}, "what is the capital of france");
    REQUIRE(space_pieces(prompt).size() > 3);
    std::uint64_t n = space_pieces(prompt).size();
    CacheStats s = b.cache_stats();
    CHECK(s.prefix_tokens_reused == 3);
    CHECK(s.tokens_encoded == n - 3);
    CHECK(s.cold_calls == 0);
  }

  TEST_CASE("overflow is detected locally by the tokenize preflight") {
    Recorder rec;
    testing::FakeServer server([&](httplib::Server& s) { openai_routes(s, rec); });
    HttpConfig cfg = config_for(server);
    cfg.max_context_tokens = 4;
    HttpBackend b(cfg);
    CHECK_THROWS_AS(b.next_token_distribution({{"a b c d e f"}, "q", {}}), ContextOverflowError);
    std::lock_guard lock(rec.mu);
    CHECK(rec.bodies.size() == 1);  // only the tokenize request went out
  }

  TEST_CASE("http errors surface the status and body") {
    testing::FakeServer server([](httplib::Server& s) {
      s.Post("/v1/completions", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("model exploded", "text/plain");
      });
    });
    HttpConfig cfg = config_for(server);
    cfg.preflight_tokenize = false;
    HttpBackend b(cfg);
    CHECK_THROWS_WITH_AS(b.next_token_distribution({{}, "q", {}}), doctest::Contains("model exploded"),
                         BackendError);
  }

  TEST_CASE("empty top_logprobs is an error") {
    testing::FakeServer server([](httplib::Server& s) {
      s.Post("/v1/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[{"text":"","logprobs":{"top_logprobs":[{}]}}]})", "application/json");
      });
    });
    HttpConfig cfg = config_for(server);
    cfg.preflight_tokenize = false;
    HttpBackend b(cfg);
    CHECK_THROWS_AS(b.next_token_distribution({{}, "q", {}}), BackendError);
  }

  TEST_CASE("unreachable server names the url") {
    HttpConfig cfg;
    cfg.base_url = "http://127.0.0.1:1";
    cfg.request_timeout = 2;
    cfg.preflight_tokenize = false;
    HttpBackend b(cfg);
    CHECK_THROWS_WITH_AS(b.next_token_distribution({{}, "q", {}}), doctest::Contains("127.0.0.1:1"),
                         BackendError);
  }

  TEST_CASE("in-flight requests respect the bound") {
    std::atomic<int> live{0}, peak{0};
    testing::FakeServer server([&](httplib::Server& s) {
      s.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        int now = ++live;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        --live;
        res.set_content(R"({"choices":[{"logprobs":{"top_logprobs":[{"a":-0.1}]}}]})", "application/json");
      });
    });
    HttpConfig cfg = config_for(server);
    cfg.preflight_tokenize = false;
    cfg.max_in_flight = 2;
    HttpBackend b(cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 6; ++i) threads.emplace_back([&] { b.next_token_distribution({{}, "q", {}}); });
    for (auto& t : threads) t.join();
    CHECK(peak.load() <= 2);
    CHECK(b.call_count() == 6);
  }

  TEST_CASE("config validation") {
    HttpConfig cfg;
    cfg.max_in_flight = 0;
    CHECK_THROWS_AS(HttpBackend{cfg}, InvalidArgument);
    CHECK_THROWS_AS(parse_log_base("3"), InvalidArgument);
    CHECK(parse_log_base("10") == LogBase::ten);
  }
}
