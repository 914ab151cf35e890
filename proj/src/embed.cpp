#include "gsmile/embed.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gsmile/error.hpp"

namespace gsmile::embed {
namespace {

constexpr double kWeightSumTolerance = 1e-9;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::optional<double> parse_real(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::optional<std::size_t> parse_count(std::string_view field) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  return v;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + why);
}

std::string_view strip_punct(std::string_view s) {
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && punct(s.front())) s.remove_prefix(1);
  while (!s.empty() && punct(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

WeightedPointCloud::WeightedPointCloud(std::size_t dim, std::vector<double> coords,
                                       std::vector<double> weights)
    : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
  if (weights_.empty()) throw Error(ErrorCode::EmptyCloud, "point cloud has no points");
  if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "point cloud dimension must be >= 1");
  if (coords_.size() != weights_.size() * dim_)
    throw Error(ErrorCode::InvalidArgument, "coordinate count does not match points * dim");
  if (!std::all_of(coords_.begin(), coords_.end(), [](double v) { return std::isfinite(v); }))
    throw Error(ErrorCode::InvalidArgument, "non-finite coordinate");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance)
    throw Error(ErrorCode::InvalidArgument, "weights sum to " + std::to_string(total) + ", not 1");
}

WeightedPointCloud WeightedPointCloud::uniform(std::size_t dim, std::vector<double> coords) {
  const std::size_t n = dim ? coords.size() / dim : 0;
  return WeightedPointCloud(dim, std::move(coords),
                            std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0));
}

bool EmbeddingTable::add(std::string token, std::vector<double> vec) {
  if (vec.size() != dim_)
    throw Error(ErrorCode::InvalidArgument, "vector for '" + token + "' has wrong dimension");
  if (index_.contains(token)) return false;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

std::optional<std::size_t> EmbeddingTable::find_exact(std::string_view token) const {
  if (case_fold_) {
    if (auto it = index_.find(ascii_lower(token)); it != index_.end()) return it->second;
  }
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::optional<std::size_t> EmbeddingTable::lookup(std::string_view token) const {
  if (auto id = find_exact(token)) return id;
  std::string_view stripped = strip_punct(token);
  if (!stripped.empty() && stripped.size() != token.size()) return find_exact(stripped);
  return std::nullopt;
}

EmbeddingTable parse_embedding_table(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t first = 0;
  std::optional<std::size_t> dim;
  // Skip leading blank lines, then detect the optional "<count> <dim>" header.
  while (first < lines.size() && split_fields(lines[first]).empty()) ++first;
  if (first < lines.size()) {
    auto fields = split_fields(lines[first]);
    if (fields.size() == 2) {
      auto count = parse_count(fields[0]);
      auto d = parse_count(fields[1]);
      if (count && d) {
        if (*d == 0) parse_fail(first + 1, "header dimension must be positive");
        dim = d;
        ++first;
      }
    }
  }

  std::optional<EmbeddingTable> table;
  for (std::size_t i = first; i < lines.size(); ++i) {
    auto fields = split_fields(lines[i]);
    if (fields.empty()) continue;
    if (fields.size() < 2) parse_fail(i + 1, "row has no vector components");
    const std::size_t row_dim = fields.size() - 1;
    if (!dim) dim = row_dim;
    if (row_dim != *dim)
      parse_fail(i + 1, "ragged row: expected " + std::to_string(*dim) + " components, got " +
                            std::to_string(row_dim));
    std::vector<double> vec(row_dim);
    for (std::size_t k = 0; k < row_dim; ++k) {
      auto v = parse_real(fields[k + 1]);
      if (!v) parse_fail(i + 1, "non-numeric field '" + std::string(fields[k + 1]) + "'");
      vec[k] = *v;
    }
    if (!table) table.emplace(*dim);
    table->add(std::string(fields[0]), std::move(vec));
  }
  if (!table || table->empty()) throw Error(ErrorCode::EmptyTable, "embedding table has no entries");
  return std::move(*table);
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  return parse_embedding_table(read_file(path));
}

std::string format_embedding_table(const EmbeddingTable& table) {
  std::ostringstream out;
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[32];
  for (std::size_t id = 0; id < table.size(); ++id) {
    out << table.token(id);
    for (double v : table.vector(id)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
  return out.str();
}

WeightedPointCloud doc_to_nbow(std::span<const std::string> tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyInput, "document has no tokens");
  std::vector<std::size_t> ids;
  std::vector<double> counts;
  for (const auto& t : tokens) {
    auto id = table.lookup(t);
    if (!id) continue;
    auto it = std::find(ids.begin(), ids.end(), *id);
    if (it == ids.end()) {
      ids.push_back(*id);
      counts.push_back(1.0);
    } else {
      counts[static_cast<std::size_t>(it - ids.begin())] += 1.0;
    }
  }
  if (ids.empty()) throw Error(ErrorCode::AllTokensOOV, "every token is out of vocabulary");
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> coords;
  coords.reserve(ids.size() * table.dim());
  for (auto id : ids) {
    auto v = table.vector(id);
    coords.insert(coords.end(), v.begin(), v.end());
  }
  for (auto& c : counts) c /= total;
  return WeightedPointCloud(table.dim(), std::move(coords), std::move(counts));
}

WeightedPointCloud doc_to_atoms(std::span<const std::string> tokens, const EmbeddingTable& table) {
  std::vector<double> coords;
  for (const auto& t : tokens) {
    if (auto id = table.lookup(t)) {
      auto v = table.vector(*id);
      coords.insert(coords.end(), v.begin(), v.end());
    }
  }
  if (coords.empty()) throw Error(ErrorCode::AllTokensOOV, "every token is out of vocabulary");
  return WeightedPointCloud::uniform(table.dim(), std::move(coords));
}

WeightedPointCloud parse_point_cloud(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && split_fields(lines[i]).empty()) ++i;
  if (i == lines.size()) throw Error(ErrorCode::ParseError, "missing \"n d\" header");
  auto header = split_fields(lines[i]);
  std::optional<std::size_t> n, d;
  if (header.size() == 2) {
    n = parse_count(header[0]);
    d = parse_count(header[1]);
  }
  if (!n || !d) parse_fail(i + 1, "header must be \"n d\"");
  if (*n == 0) throw Error(ErrorCode::EmptyCloud, "point cloud declares zero points");
  if (*d == 0) parse_fail(i + 1, "dimension must be positive");

  std::vector<double> coords;
  coords.reserve(*n * *d);
  std::size_t rows = 0;
  for (++i; i < lines.size(); ++i) {
    auto fields = split_fields(lines[i]);
    if (fields.empty()) continue;
    if (rows == *n) parse_fail(i + 1, "more rows than the header declares");
    if (fields.size() != *d)
      parse_fail(i + 1, "expected " + std::to_string(*d) + " values, got " +
                            std::to_string(fields.size()));
    for (auto f : fields) {
      auto v = parse_real(f);
      if (!v) parse_fail(i + 1, "non-numeric field '" + std::string(f) + "'");
      coords.push_back(*v);
    }
    ++rows;
  }
  if (rows != *n)
    throw Error(ErrorCode::ParseError, "header declares " + std::to_string(*n) +
                                           " rows, found " + std::to_string(rows));
  return WeightedPointCloud::uniform(*d, std::move(coords));
}

WeightedPointCloud load_point_cloud(const std::filesystem::path& path) {
  return parse_point_cloud(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace gsmile::embed
