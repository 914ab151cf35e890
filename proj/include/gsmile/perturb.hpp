#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gsmile::perturb {

struct TokenSpan {
  std::size_t start = 0;  // byte offset, inclusive
  std::size_t end = 0;    // byte offset, exclusive

  bool operator==(const TokenSpan&) const = default;
};

// Word-level tokens of a prompt. Punctuation stays attached to its word.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<TokenSpan> spans;
  std::string original;

  std::size_t size() const noexcept { return tokens.size(); }
  // Tokens joined by single spaces (the whitespace-normalized prompt).
  std::string joined() const;
};

// Inclusion pattern for one perturbation; bit i == 1 keeps token i.
struct Mask {
  std::vector<std::uint8_t> bits;
  std::size_t index = 0;

  std::size_t size() const noexcept { return bits.size(); }
  bool all_ones() const noexcept;
  bool operator==(const Mask&) const = default;
};

enum class Strategy { Bernoulli, Exhaustive };

Strategy parse_strategy(std::string_view name);
std::string_view to_string(Strategy s) noexcept;

inline constexpr std::size_t kMaxExhaustiveTokens = 16;

// Splits on Unicode whitespace. Throws EmptyPrompt if nothing remains.
TokenSequence tokenize(std::string_view prompt);

// Bernoulli: record 0 is all-ones, followed by J-1 i.i.d. Bernoulli(0.5)
// masks with the all-zero mask rejected. Exhaustive: all 2^m - 1 non-empty
// masks, all-ones first, then ascending binary order (bit 0 = token 0 is the
// most significant digit); J is ignored.
std::vector<Mask> sample_masks(std::size_t m, std::size_t J, std::uint64_t seed,
                               Strategy strategy);

std::string apply_mask(const TokenSequence& tokens, const Mask& mask);
std::vector<std::string> masked_tokens(const TokenSequence& tokens, const Mask& mask);

std::vector<double> mask_to_features(const Mask& mask);

}  // namespace gsmile::perturb
