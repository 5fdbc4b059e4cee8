#include "ctxshape/embedder.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "ctxshape/error.hpp"
#include "ctxshape/text.hpp"

namespace ctxshape {

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ < 2) throw InvalidArgument("hashing embedder needs dim >= 2");
}

std::vector<std::vector<double>> HashingEmbedder::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dim_, 0.0);
    v[0] = 1e-3;
    for (const auto& w : text::words(t)) {
      std::uint64_t h = text::mix64(text::fnv1a(w));
      std::size_t slot = 1 + static_cast<std::size_t>(h % (dim_ - 1));
      v[slot] += (h >> 63) ? -1.0 : 1.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)) {
  if (config_.batch_size == 0) throw InvalidArgument("embedding batch_size must be positive");
  if (!config_.api_key_env.empty())
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts) {
  using nlohmann::json;
  std::vector<std::vector<double>> out;
  httplib::Client cli(config_.base_url);
  auto secs = static_cast<time_t>(config_.request_timeout);
  cli.set_connection_timeout(secs);
  cli.set_read_timeout(secs);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
    auto batch = texts.subspan(start, std::min(config_.batch_size, texts.size() - start));
    json body = {{"input", std::vector<std::string>(batch.begin(), batch.end())}};
    if (!config_.model.empty()) body["model"] = config_.model;
    auto res = cli.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) throw BackendError("embedding endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw BackendError("embedding endpoint returned HTTP " + std::to_string(res->status));
    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw BackendError(std::string("embedding endpoint returned malformed JSON: ") + e.what());
    }
    if (!doc.contains("data") || !doc["data"].is_array() || doc["data"].size() != batch.size())
      throw BackendError("embedding response does not hold one vector per input");
    std::vector<std::vector<double>> vecs(batch.size());
    for (const auto& item : doc["data"]) {
      std::size_t idx = item.value("index", std::size_t{0});
      if (idx >= batch.size()) throw BackendError("embedding response index out of range");
      vecs[idx] = item.at("embedding").get<std::vector<double>>();
    }
    for (auto& v : vecs) out.push_back(std::move(v));
  }
  return out;
}

Corpus fill_embeddings(const Corpus& corpus, Embedder& embedder) {
  Corpus out = corpus;
  for (auto& inst : out.instances) {
    std::vector<std::string> texts;
    std::vector<std::optional<std::vector<double>>*> slots;
    if (!inst.query_embedding) {
      texts.push_back(inst.query);
      slots.push_back(&inst.query_embedding);
    }
    for (auto& c : inst.candidates) {
      if (c.embedding) continue;
      texts.push_back(c.text);
      slots.push_back(&c.embedding);
    }
    if (texts.empty()) continue;
    auto vecs = embedder.embed(texts);
    if (vecs.size() != texts.size()) throw BackendError("embedder returned the wrong number of vectors");
    for (std::size_t i = 0; i < vecs.size(); ++i) *slots[i] = std::move(vecs[i]);
  }
  validate(out);
  return out;
}

}  // namespace ctxshape
