#pragma once

#include <filesystem>
#include <string>

#include "gsmile/pipeline.hpp"

namespace fixture {

inline const std::filesystem::path kEmbeddings = GSMILE_TEST_DATA "/tiny_embeddings.txt";
inline constexpr const char* kPrompt = "could you please make this rainy";

// Keyword mock that reacts to "make" and "rainy".
inline gsmile::adapters::MockModel keyword_mock() {
  gsmile::adapters::MockModel m;
  m.base_response = "a scene";
  m.keyword_responses = {{"make", "BUILD CREATE CONSTRUCT"}, {"rainy", "RAIN STORM WET"}};
  return m;
}

// Exhaustive masks over the six-token prompt, cache in `cache_dir` (or off).
inline gsmile::pipeline::RunConfig keyword_config(const std::filesystem::path& cache_dir = {}) {
  gsmile::pipeline::RunConfig c;
  c.prompt = kPrompt;
  c.model.kind = gsmile::adapters::ModelKind::Mock;
  c.model.mock = keyword_mock();
  c.embeddings = kEmbeddings;
  c.strategy = gsmile::perturb::Strategy::Exhaustive;
  c.seed = 7;
  c.max_itr = 1000;
  c.cache = !cache_dir.empty();
  if (c.cache) c.cache_dir = cache_dir;
  c.truth = std::vector<std::uint8_t>{0, 0, 0, 1, 0, 1};
  return c;
}

}  // namespace fixture
