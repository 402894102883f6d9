#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asas::text {

/// Lowercases and drops every ASCII whitespace, digit and punctuation byte.
/// Bytes >= 0x80 (non-ASCII UTF-8) are kept as letters.
std::string normalize_text(std::string_view s);

/// Lowercased whitespace tokens with leading/trailing ASCII punctuation
/// trimmed; tokens that become empty are dropped.
std::vector<std::string> tokenize(std::string_view s);

/// Joins `count` tokens starting at `first` with single spaces.
std::string join(std::span<const std::string> tokens, std::size_t first, std::size_t count);

/// Number of UTF-8 code points.
std::size_t codepoints(std::string_view s);

struct MatchingBlock {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t size = 0;
  bool operator==(const MatchingBlock&) const = default;
};

/// Ratcliff/Obershelp matching blocks: the longest common contiguous block
/// (earliest in `a`, then earliest in `b`) and recursively the blocks to its
/// left and right. Sorted by position; no trailing sentinel.
std::vector<MatchingBlock> matching_blocks(std::string_view a, std::string_view b);

/// 2*M / (|a|+|b|), M the total size of the matching blocks; 1.0 for two
/// empty strings.
double similarity_ratio(std::string_view a, std::string_view b);

/// Cheap upper bound on `similarity_ratio` from the character multisets.
double quick_ratio(std::string_view a, std::string_view b);

/// Fixed 150-word English stopword list.
std::span<const std::string_view> stopwords();
bool is_stopword(std::string_view lowercase_word);

}  // namespace asas::text
