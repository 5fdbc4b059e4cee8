#include <doctest.h>

#include <cmath>
#include <mutex>

#include "ctxshape/divergence.hpp"
#include "ctxshape/error.hpp"
#include "ctxshape/mock_backend.hpp"
#include "ctxshape/scripted_backend.hpp"

using namespace ctxshape;

namespace {

TokenDistribution probs(std::vector<std::pair<TokenId, double>> p) { return distribution_from_probs(p); }

double direct_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

// Delegates to the mock and records every state it was asked about.
class RecordingBackend final : public Backend {
 public:
  std::string name() const override { return "recording"; }
  std::size_t k_limit() const override { return inner_.k_limit(); }
  std::size_t max_context_tokens() const override { return inner_.max_context_tokens(); }
  std::vector<PromptState> states;
  MockBackend inner_;
  std::size_t fail_at_prefix = static_cast<std::size_t>(-1);

 protected:
  std::vector<TokenId> do_tokenize(std::string_view t) override { return inner_.tokenize(t); }
  TokenDistribution do_next_token_distribution(const PromptState& s) override {
    if (s.generated_prefix.size() == fail_at_prefix) throw BackendError("connection reset");
    states.push_back(s);
    return inner_.next_token_distribution(s);
  }
  double do_answer_logprob(std::span<const std::string> c, std::string_view q, std::string_view a) override {
    return inner_.answer_logprob(c, q, a);
  }
  double do_judge_factuality(std::string_view q, std::string_view p) override {
    return inner_.judge_factuality(q, p);
  }
};

Candidate cand(std::string text) {
  Candidate c;
  c.id = "u";
  c.text = std::move(text);
  return c;
}

}  // namespace

TEST_SUITE("divergence") {
  TEST_CASE("kl of (0.9, 0.1) against (0.5, 0.5)") {
    const double oracle = direct_kl({0.9, 0.1}, {0.5, 0.5});
    const double reverse = direct_kl({0.5, 0.5}, {0.9, 0.1});
    CHECK(oracle == doctest::Approx(0.368064).epsilon(1e-6));
    CHECK(reverse == doctest::Approx(0.510826).epsilon(1e-6));
    auto p = probs({{1, 0.9}, {2, 0.1}});
    auto q = probs({{1, 0.5}, {2, 0.5}});
    CHECK(std::abs(kl_divergence(p, q, {}) - oracle) < 1e-6);
    CHECK(std::abs(kl_divergence(q, p, {}) - reverse) < 1e-6);
    CHECK(kl_divergence(p, p, {}) <= 1e-12);
  }

  TEST_CASE("identical distributions align to identical vectors") {
    auto p = probs({{1, 0.7}, {2, 0.3}});
    AlignedPair a = smooth_and_renormalize(p, p, {});
    CHECK(a.p == a.q);
    CHECK(a.support.size() == 2);
  }

  TEST_CASE("union alignment floors missing entries and keeps an other bucket") {
    auto p = probs({{1, 0.6}, {2, 0.4}});
    auto q = probs({{2, 0.7}, {3, 0.3}});
    DivergenceConfig cfg;
    cfg.epsilon_smoothing = 1e-3;
    AlignedPair a = smooth_and_renormalize(p, q, cfg);
    REQUIRE(a.support == std::vector<TokenId>{1, 2, 3});
    REQUIRE(a.p.size() == 4);
    const double z = 1.0 + 2e-3;  // two floored slots on each side
    CHECK(a.p[0] == doctest::Approx(0.6 / z).epsilon(1e-12));
    CHECK(a.p[1] == doctest::Approx(0.4 / z).epsilon(1e-12));
    CHECK(a.p[2] == doctest::Approx(1e-3 / z).epsilon(1e-12));
    CHECK(a.q[0] == doctest::Approx(1e-3 / z).epsilon(1e-12));
    CHECK(a.q[3] == doctest::Approx(1e-3 / z).epsilon(1e-12));
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      sp += a.p[i];
      sq += a.q[i];
      CHECK(a.p[i] >= cfg.epsilon_smoothing / z);
    }
    CHECK(std::abs(sp - 1.0) < 1e-9);
    CHECK(std::abs(sq - 1.0) < 1e-9);
  }

  TEST_CASE("untracked mass goes to the other bucket") {
    auto p = probs({{1, 0.5}, {2, 0.2}});
    AlignedPair a = smooth_and_renormalize(p, p, {});
    CHECK(a.p.back() == doctest::Approx(0.3).epsilon(1e-9));
    auto full = probs({{1, 0.25}, {2, 0.75}});
    AlignedPair b = smooth_and_renormalize(full, full, {});
    CHECK(b.p.back() <= 1e-10 + 1e-16);
  }

  TEST_CASE("top-k truncation applies before alignment") {
    auto p = probs({{1, 0.5}, {2, 0.3}, {3, 0.2}});
    DivergenceConfig cfg;
    cfg.k_limit = 2;
    AlignedPair a = smooth_and_renormalize(p, p, cfg);
    CHECK(a.support.size() == 2);
    CHECK(a.p.back() == doctest::Approx(0.2).epsilon(1e-9));
  }

  TEST_CASE("invalid inputs") {
    DivergenceConfig bad;
    bad.epsilon_smoothing = 0.0;
    auto p = probs({{1, 1.0}});
    CHECK_THROWS_AS(smooth_and_renormalize(p, p, bad), InvalidArgument);
    CHECK_THROWS_AS(smooth_and_renormalize(TokenDistribution{}, p, {}), InvalidArgument);
    std::vector<double> a{0.5, 0.5}, b{1.0};
    CHECK_THROWS_AS(kl_divergence(a, b), InvalidArgument);
  }

  TEST_CASE("two rigged steps add up") {
    ScriptedBackend b;
    auto peaked = probs({{1, 0.9}, {2, 0.1}});
    auto flat = probs({{1, 0.5}, {2, 0.5}});
    b.set_distributions({"insight"}, {peaked, peaked});
    b.set_distributions({}, {flat, flat});
    DivergenceConfig cfg;
    cfg.horizon_T = 2;
    const double step = direct_kl({0.9, 0.1}, {0.5, 0.5});
    CHECK(trajectory_divergence(b, {}, cand("insight"), "q", cfg) == doctest::Approx(2 * step).epsilon(1e-9));
    CHECK(trajectory_divergence(b, {}, cand("insight"), "q", cfg) == doctest::Approx(0.736128).epsilon(1e-6));
    cfg.horizon_T = 1;
    CHECK(trajectory_divergence(b, {}, cand("insight"), "q", cfg) == kl_divergence(peaked, flat, cfg));
  }

  TEST_CASE("both branches follow the augmented branch's greedy tokens") {
    RecordingBackend b;
    DivergenceConfig cfg;
    cfg.horizon_T = 3;
    trajectory_divergence(b, {}, cand("Rome is lovely."), "q", cfg);
    REQUIRE(b.states.size() == 6);
    for (std::size_t t = 0; t < 3; ++t) {
      const auto& aug = b.states[2 * t];
      const auto& base = b.states[2 * t + 1];
      CHECK(aug.context.size() == 1);
      CHECK(base.context.empty());
      CHECK(aug.generated_prefix == base.generated_prefix);
      CHECK(aug.generated_prefix.size() == t);
      if (t > 0) {
        TokenId expected = b.inner_.next_token_distribution(b.states[2 * (t - 1)]).argmax();
        CHECK(aug.generated_prefix.back() == expected);
      }
    }
  }

  TEST_CASE("backend errors carry the step index") {
    RecordingBackend b;
    b.fail_at_prefix = 2;
    DivergenceConfig cfg;
    cfg.horizon_T = 5;
    try {
      trajectory_divergence(b, {}, cand("Rome."), "q", cfg);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.step_index() == 3);
      CHECK(std::string(e.what()).find("step 3") != std::string::npos);
    }
  }

  TEST_CASE("irrelevant passages produce zero divergence on the mock") {
    MockBackend m;
    for (std::size_t T : {1, 4, 8}) {
      DivergenceConfig cfg;
      cfg.horizon_T = T;
      CHECK(trajectory_divergence(m, {}, cand("the conductor enjoys jazz"), "q", cfg) <= 1e-9);
      CHECK(trajectory_divergence(m, std::vector<std::string>{"Paris is in France."}, cand("sunny weather, cousin"), "q", cfg) <= 1e-9);
    }
  }

  TEST_CASE("an informative passage produces positive divergence on the mock") {
    MockBackend m;
    DivergenceConfig cfg;
    CHECK(trajectory_divergence(m, {}, cand("The capital of Italy is Rome."), "capital?", cfg) >= 0.01);
  }
}
