#include "gsmile/perturb.hpp"

#include <algorithm>
#include <random>

#include "gsmile/error.hpp"

namespace gsmile::perturb {
namespace {

// Byte length of the Unicode whitespace code point starting at `pos`, or 0.
std::size_t whitespace_length(std::string_view s, std::size_t pos) {
  const auto c = static_cast<unsigned char>(s[pos]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  auto byte = [&](std::size_t k) -> unsigned {
    return pos + k < s.size() ? static_cast<unsigned char>(s[pos + k]) : 0u;
  };
  if (c == 0xc2 && (byte(1) == 0x85 || byte(1) == 0xa0)) return 2;
  if (c == 0xe1 && byte(1) == 0x9a && byte(2) == 0x80) return 3;  // U+1680
  if (c == 0xe2 && byte(1) == 0x80) {
    const unsigned b2 = byte(2);
    if ((b2 >= 0x80 && b2 <= 0x8a) || b2 == 0xa8 || b2 == 0xa9 || b2 == 0xaf) return 3;
  }
  if (c == 0xe2 && byte(1) == 0x81 && byte(2) == 0x9f) return 3;  // U+205F
  if (c == 0xe3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

}  // namespace

std::string TokenSequence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool Mask::all_ones() const noexcept {
  return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b == 1; });
}

Strategy parse_strategy(std::string_view name) {
  if (name == "bernoulli") return Strategy::Bernoulli;
  if (name == "exhaustive") return Strategy::Exhaustive;
  throw Error(ErrorCode::ConfigError, "unknown perturbation strategy '" + std::string(name) + "'");
}

std::string_view to_string(Strategy s) noexcept {
  return s == Strategy::Bernoulli ? "bernoulli" : "exhaustive";
}

TokenSequence tokenize(std::string_view prompt) {
  TokenSequence seq;
  seq.original = std::string(prompt);
  std::size_t pos = 0;
  while (pos < prompt.size()) {
    if (std::size_t ws = whitespace_length(prompt, pos)) {
      pos += ws;
      continue;
    }
    const std::size_t start = pos;
    while (pos < prompt.size() && whitespace_length(prompt, pos) == 0) ++pos;
    seq.tokens.emplace_back(prompt.substr(start, pos - start));
    seq.spans.push_back({start, pos});
  }
  if (seq.tokens.empty()) throw Error(ErrorCode::EmptyPrompt, "prompt has no non-whitespace content");
  return seq;
}

std::vector<Mask> sample_masks(std::size_t m, std::size_t J, std::uint64_t seed,
                               Strategy strategy) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "token count must be >= 1");

  std::vector<Mask> masks;
  if (strategy == Strategy::Exhaustive) {
    if (m > kMaxExhaustiveTokens)
      throw Error(ErrorCode::ExhaustiveTooLarge,
                  "exhaustive enumeration needs m <= 16, got " + std::to_string(m));
    const std::uint64_t full = (std::uint64_t{1} << m) - 1;
    masks.reserve(full);
    auto make = [&](std::uint64_t code) {
      Mask mask;
      mask.bits.resize(m);
      for (std::size_t i = 0; i < m; ++i) mask.bits[i] = (code >> (m - 1 - i)) & 1u;
      mask.index = masks.size();
      masks.push_back(std::move(mask));
    };
    make(full);
    for (std::uint64_t code = 1; code < full; ++code) make(code);
    return masks;
  }

  if (J == 0) throw Error(ErrorCode::InvalidArgument, "perturbation count must be >= 1");
  masks.reserve(J);
  masks.push_back(Mask{std::vector<std::uint8_t>(m, 1), 0});
  std::mt19937_64 rng(seed);
  while (masks.size() < J) {
    Mask mask;
    mask.bits.resize(m);
    bool any = false;
    for (auto& b : mask.bits) {
      b = static_cast<std::uint8_t>(rng() >> 63);
      any = any || b;
    }
    if (!any) continue;
    mask.index = masks.size();
    masks.push_back(std::move(mask));
  }
  return masks;
}

std::vector<std::string> masked_tokens(const TokenSequence& tokens, const Mask& mask) {
  if (mask.size() != tokens.size())
    throw Error(ErrorCode::LengthMismatch, "mask has " + std::to_string(mask.size()) +
                                               " bits for " + std::to_string(tokens.size()) +
                                               " tokens");
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (mask.bits[i]) kept.push_back(tokens.tokens[i]);
  return kept;
}

std::string apply_mask(const TokenSequence& tokens, const Mask& mask) {
  std::string out;
  for (const auto& t : masked_tokens(tokens, mask)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::vector<double> mask_to_features(const Mask& mask) {
  return {mask.bits.begin(), mask.bits.end()};
}

}  // namespace gsmile::perturb
