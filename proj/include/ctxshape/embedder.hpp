#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctxshape/corpus.hpp"

namespace ctxshape {

// Source of dense vectors for the dense baseline. Kept apart from Backend so
// that baselines never count as language-model calls.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

// Signed feature hashing of lowercase words plus a small constant bias
// component (so empty text still has a nonzero vector).
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256);
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

struct HttpEmbedderConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/embeddings";
  std::string model;
  std::string api_key_env = "CTXSHAPE_API_KEY";
  double request_timeout = 60.0;
  std::size_t batch_size = 64;
};

// Client for an OpenAI-style embeddings endpoint.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpEmbedderConfig config);
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  HttpEmbedderConfig config_;
  std::string api_key_;
};

// Fills every missing candidate and query embedding.
Corpus fill_embeddings(const Corpus& corpus, Embedder& embedder);

}  // namespace ctxshape
