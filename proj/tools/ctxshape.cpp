// ctxshape: benchmark runner, stream filter, synthetic corpus generator and
// corpus validator.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxshape/config.hpp"
#include "ctxshape/error.hpp"
#include "ctxshape/harness.hpp"
#include "ctxshape/synthetic.hpp"

using namespace ctxshape;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitMethodFailed = 3;

struct BackendFlags {
  BackendConfig cfg;
  std::string logprob_base = "e";
  bool no_prefix_cache = false;
  bool no_preflight = false;

  BackendConfig resolve() const {
    BackendConfig out = cfg;
    out.logprob_base = parse_log_base(logprob_base);
    out.prefix_cache = !no_prefix_cache;
    out.preflight_tokenize = !no_preflight;
    return out;
  }
};

void add_backend_flags(CLI::App* app, BackendFlags& f) {
  app->add_option("--backend", f.cfg.kind, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  app->add_option("--base-url", f.cfg.base_url, "Inference server root URL");
  app->add_option("--completions-path", f.cfg.completions_path);
  app->add_option("--tokenize-path", f.cfg.tokenize_path);
  app->add_option("--model", f.cfg.model);
  app->add_option("--top-k", f.cfg.k_limit, "Logprobs requested per step")->check(CLI::PositiveNumber);
  app->add_option("--max-context", f.cfg.max_context_tokens)->check(CLI::PositiveNumber);
  app->add_option("--max-in-flight", f.cfg.max_in_flight)->check(CLI::Range(1, 1024));
  app->add_option("--timeout", f.cfg.request_timeout, "Seconds per request")->check(CLI::PositiveNumber);
  app->add_option("--api-key-env", f.cfg.api_key_env, "Environment variable holding the bearer token");
  app->add_option("--logprob-base", f.logprob_base, "Base of server logprobs: e, 2 or 10");
  app->add_flag("--no-prefix-cache", f.no_prefix_cache);
  app->add_flag("--no-preflight", f.no_preflight, "Skip the context-length check via the tokenize endpoint");
  app->add_option("--mock-irrelevant", f.cfg.mock_irrelevant_extra, "Extra words the mock ignores");
  app->add_option("--mock-cache-weight", f.cfg.mock_cache_weight);
}

void add_ecs_flags(CLI::App* app, EcsConfig& ecs, DivergenceConfig* div) {
  app->add_option("--lambda", ecs.lambda_len, "Length penalty per token");
  app->add_option("--tau", ecs.tau, "Acceptance threshold");
  if (div) {
    app->add_option("--horizon", ecs.horizon_T, "Trajectory steps");
    app->add_option("--epsilon", div->epsilon_smoothing, "Smoothing floor");
  }
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.assign(std::begin(kAllMethods), std::end(kAllMethods));
      continue;
    }
    out.push_back(parse_method(n));
  }
  return out;
}

std::string slurp(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// JSON lines of {"id", "text"} objects, or plain text with one update per line.
std::vector<Candidate> read_updates(const std::string& body) {
  std::vector<Candidate> out;
  std::istringstream in(body);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Candidate c;
    if (line.front() == '{') {
      try {
        json j = json::parse(line);
        c.id = j.at("id").get<std::string>();
        c.text = j.at("text").get<std::string>();
      } catch (const json::exception& e) {
        throw ParseError("update line " + std::to_string(lineno) + ": " + e.what());
      }
    } else {
      if (line.back() == '\r') line.pop_back();
      c.id = "u" + std::to_string(out.size() + 1);
      c.text = line;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context selection toolkit: score, filter and benchmark candidate context updates"};
  app.set_config("--config", "", "INI/TOML file of option values; sections name subcommands");
  app.require_subcommand(1);

  // run
  RunConfig run;
  BackendFlags run_backend;
  std::vector<std::string> run_methods{"ecs_answer", "tfidf", "random"};
  std::string run_format = "normalized";
  auto* run_cmd = app.add_subcommand("run", "Benchmark selection methods on a corpus");
  run_cmd->add_option("--corpus", run.corpus_path, "Corpus JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--format", run_format, "normalized, longmemeval or locomo");
  run_cmd->add_option("--methods", run_methods, "Methods, or 'all'")->delimiter(',');
  run_cmd->add_option("--qids", run.qids, "Evaluate only these question ids")->delimiter(',');
  run_cmd->add_option("--seed", run.seed, "Seed of the random baseline");
  run_cmd->add_option("--output", run.output_path, "Report JSON path")->required();
  run_cmd->add_option("--csv", run.csv_path, "Per-method CSV summary path");
  run_cmd->add_option("--workers", run.workers, "Instances evaluated concurrently")->check(CLI::PositiveNumber);
  run.embedder.kind = "hashing";
  run_cmd->add_option("--embedder", run.embedder.kind, "none, hashing or http")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "hashing", "http"}));
  run_cmd->add_option("--embed-dim", run.embedder.dim)->check(CLI::PositiveNumber);
  run_cmd->add_option("--embed-model", run.embedder.model);
  run_cmd->add_option("--embed-path", run.embedder.path);
  add_backend_flags(run_cmd, run_backend);
  add_ecs_flags(run_cmd, run.ecs, &run.divergence);

  // filter
  BackendFlags filter_backend;
  EcsConfig filter_ecs;
  std::string filter_input = "-";
  std::string filter_query;
  std::string filter_answer;
  auto* filter_cmd = app.add_subcommand("filter", "Stream updates through the accept/reject filter");
  filter_cmd->add_option("--input", filter_input, "Updates file, '-' for stdin");
  filter_cmd->add_option("--query", filter_query)->required();
  filter_cmd->add_option("--answer", filter_answer, "Known answer; without it the judge decides");
  add_backend_flags(filter_cmd, filter_backend);
  add_ecs_flags(filter_cmd, filter_ecs, nullptr);

  // gen
  SyntheticSpec spec;
  std::uint64_t gen_seed = 0;
  std::string gen_style = "lexical";
  std::string gen_output;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic corpus");
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("--questions", spec.questions);
  gen_cmd->add_option("--insight", spec.insight);
  gen_cmd->add_option("--duplicate", spec.duplicate);
  gen_cmd->add_option("--redherring", spec.redherring);
  gen_cmd->add_option("--counterfactual", spec.counterfactual);
  gen_cmd->add_option("--style", gen_style, "lexical or topical distractors");
  gen_cmd->add_option("--insight-padding", spec.insight_padding, "Filler words per insight");
  gen_cmd->add_option("--name", spec.name);
  gen_cmd->add_option("--output", gen_output, "Corpus path, stdout when omitted");

  // validate
  std::string validate_path;
  std::string validate_format = "normalized";
  auto* validate_cmd = app.add_subcommand("validate", "Check a corpus against the schema");
  validate_cmd->add_option("corpus", validate_path)->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--format", validate_format);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      run.methods = parse_methods(run_methods);
      run.corpus_format = parse_corpus_format(run_format);
      run.backend = run_backend.resolve();
      run.divergence.k_limit = run.backend.k_limit;
      run.divergence.horizon_T = run.ecs.horizon_T;
      EvalReport report = run_benchmark(run);
      std::cout << render_report(report, ReportFormat::csv_summary);
      for (const auto& m : report.methods) {
        if (!m.ok) {
          std::cerr << "method " << to_string(m.method) << " failed: " << m.error << "\n";
          return kExitMethodFailed;
        }
      }
      return 0;
    }

    if (*filter_cmd) {
      std::string body;
      if (filter_input == "-") {
        body = slurp(std::cin);
      } else {
        std::ifstream in(filter_input, std::ios::binary);
        if (!in) throw Error("cannot open updates file '" + filter_input + "'");
        body = slurp(in);
      }
      auto updates = read_updates(body);
      auto backend = make_backend(filter_backend.resolve());
      std::optional<std::string> answer;
      if (!filter_answer.empty()) answer = filter_answer;
      FilterResult result = filter_stream(*backend, updates, filter_query, answer, filter_ecs);
      for (const auto& s : result.log)
        std::cout << json{{"id", s.candidate_id},
                          {"branch", to_string(s.branch)},
                          {"score", s.score},
                          {"decision", to_string(s.decision)}}
                         .dump()
                  << "\n";
      json summary{{"accepted", json::array()}, {"complete", result.complete}};
      for (const auto& c : result.context) summary["accepted"].push_back(c.id);
      if (!result.complete) summary["error"] = result.error;
      std::cout << summary.dump() << "\n";
      return result.complete ? 0 : kExitError;
    }

    if (*gen_cmd) {
      spec.distractor_style = parse_distractor_style(gen_style);
      Corpus corpus = generate_synthetic(gen_seed, spec);
      if (gen_output.empty())
        std::cout << to_json(corpus).dump(2) << "\n";
      else
        save_corpus(corpus, gen_output);
      return 0;
    }

    if (*validate_cmd) {
      Corpus corpus = load_corpus(validate_path, parse_corpus_format(validate_format));
      std::size_t candidates = 0;
      for (const auto& inst : corpus.instances) candidates += inst.candidates.size();
      std::cout << "ok: " << corpus.instances.size() << " instances, " << candidates << " candidates";
      if (corpus.skipped_records) std::cout << ", " << corpus.skipped_records << " records skipped";
      std::cout << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
