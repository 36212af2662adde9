#pragma once

#include "relcl/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

namespace relcl::testing {

/// Tokens t0..t{n-1} tagged from `spans`.
inline SentenceRecord make_record(const std::string& id, std::size_t n, const std::vector<Span>& spans,
                                  const std::vector<RelationPair>& relations) {
  SentenceRecord r;
  r.id = id;
  for (std::size_t i = 0; i < n; ++i) r.tokens.push_back("t" + std::to_string(i));
  r.tags = encode_bio(spans, n);
  r.relations = relations;
  return r;
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

inline std::shared_ptr<EmbeddingSource> random_source(const std::vector<SentenceRecord>& records, Index dim,
                                                      std::uint64_t seed) {
  auto source = std::make_shared<EmbeddingSource>(EmbeddingMode::file, dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    source->insert(records[i].id, random_matrix(static_cast<Index>(records[i].size()), dim, mix_seed(seed, i)));
  }
  return source;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("relcl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace relcl::testing
