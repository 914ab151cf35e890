#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gsmile::embed {

// Points in R^dim with nonnegative weights summing to 1. Points are stored
// row-major in `coords` (size() * dim values).
class WeightedPointCloud {
 public:
  WeightedPointCloud() = default;
  // Validates the invariants; throws EmptyCloud / InvalidArgument.
  WeightedPointCloud(std::size_t dim, std::vector<double> coords, std::vector<double> weights);

  static WeightedPointCloud uniform(std::size_t dim, std::vector<double> coords);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return weights_.size(); }
  bool empty() const noexcept { return weights_.empty(); }
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }
  std::span<const double> weights() const noexcept { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

// word2vec-style text table. Entries keep file order; lookups go through an
// index so repeated queries are O(1).
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dim, bool case_fold = true) : dim_(dim), case_fold_(case_fold) {}

  // Returns false (and keeps the existing vector) if the token is already present.
  bool add(std::string token, std::vector<double> vec);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  bool case_fold() const noexcept { return case_fold_; }
  void set_case_fold(bool on) noexcept { case_fold_ = on; }

  const std::string& token(std::size_t id) const { return tokens_[id]; }
  std::span<const double> vector(std::size_t id) const {
    return {data_.data() + id * dim_, dim_};
  }

  // Entry id for a query token. With case folding the lowercased form is
  // tried first, then the token as written; finally the same lookups are
  // retried with leading/trailing ASCII punctuation stripped.
  std::optional<std::size_t> lookup(std::string_view token) const;

 private:
  std::optional<std::size_t> find_exact(std::string_view token) const;

  std::size_t dim_;
  bool case_fold_;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingTable parse_embedding_table(std::string_view text);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);
// Writes "<count> <dim>" followed by one row per entry, round-trip precision.
std::string format_embedding_table(const EmbeddingTable& table);

// Normalized bag of words: OOV tokens dropped, repeats merged, counts
// normalized. Throws AllTokensOOV when nothing is left.
WeightedPointCloud doc_to_nbow(std::span<const std::string> tokens, const EmbeddingTable& table);

// One point per in-vocabulary token occurrence (duplicates kept), uniform
// weights. These are the sample atoms the bootstrap resamples.
WeightedPointCloud doc_to_atoms(std::span<const std::string> tokens, const EmbeddingTable& table);

WeightedPointCloud parse_point_cloud(std::string_view text);
WeightedPointCloud load_point_cloud(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
std::string ascii_lower(std::string_view s);

}  // namespace gsmile::embed
