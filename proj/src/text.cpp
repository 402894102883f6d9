#include "asas/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace asas::text {
namespace {

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

}  // namespace

std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (c >= 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (std::isalpha(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_ascii_punct(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_ascii_punct(static_cast<unsigned char>(s[e - 1]))) --e;
    if (e > b) {
      std::string tok(s.substr(b, e - b));
      for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

std::string join(std::span<const std::string> tokens, std::size_t first, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out.push_back(' ');
    out += tokens[first + i];
  }
  return out;
}

std::size_t codepoints(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

namespace {

MatchingBlock longest_match(std::string_view a, std::string_view b, std::size_t alo, std::size_t ahi, std::size_t blo,
                            std::size_t bhi, std::vector<std::size_t>& prev, std::vector<std::size_t>& cur) {
  // prev[j+1] = length of the common suffix ending at a[i-1], b[j].
  MatchingBlock best{alo, blo, 0};
  std::fill(prev.begin() + static_cast<std::ptrdiff_t>(blo),
            prev.begin() + static_cast<std::ptrdiff_t>(bhi) + 1, 0);
  for (std::size_t i = alo; i < ahi; ++i) {
    cur[blo] = 0;
    for (std::size_t j = blo; j < bhi; ++j) {
      if (a[i] == b[j]) {
        const std::size_t k = prev[j] + 1;
        cur[j + 1] = k;
        if (k > best.size) best = {i + 1 - k, j + 1 - k, k};
      } else {
        cur[j + 1] = 0;
      }
    }
    std::swap(prev, cur);
  }
  return best;
}

}  // namespace

std::vector<MatchingBlock> matching_blocks(std::string_view a, std::string_view b) {
  std::vector<MatchingBlock> blocks;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  struct Range {
    std::size_t alo, ahi, blo, bhi;
  };
  std::vector<Range> queue{{0, a.size(), 0, b.size()}};
  while (!queue.empty()) {
    const Range r = queue.back();
    queue.pop_back();
    if (r.alo >= r.ahi || r.blo >= r.bhi) continue;
    const auto m = longest_match(a, b, r.alo, r.ahi, r.blo, r.bhi, prev, cur);
    if (m.size == 0) continue;
    blocks.push_back(m);
    queue.push_back({r.alo, m.a, r.blo, m.b});
    queue.push_back({m.a + m.size, r.ahi, m.b + m.size, r.bhi});
  }
  std::sort(blocks.begin(), blocks.end(), [](const MatchingBlock& x, const MatchingBlock& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return blocks;
}

double similarity_ratio(std::string_view a, std::string_view b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 1.0;
  std::size_t matched = 0;
  for (const auto& blk : matching_blocks(a, b)) matched += blk.size;
  return 2.0 * static_cast<double>(matched) / static_cast<double>(total);
}

double quick_ratio(std::string_view a, std::string_view b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 1.0;
  std::array<int, 256> avail{};
  for (unsigned char c : b) ++avail[c];
  std::size_t matches = 0;
  for (unsigned char c : a) {
    if (avail[c] > 0) {
      --avail[c];
      ++matches;
    }
  }
  return 2.0 * static_cast<double>(matches) / static_cast<double>(total);
}

namespace {

constexpr std::array<std::string_view, 150> kStopwords = {
    "a",        "about",   "above",   "after",    "again",      "against", "all",     "am",       "an",
    "and",      "any",     "are",     "as",       "at",         "be",      "because", "been",     "before",
    "being",    "below",   "between", "both",     "but",        "by",      "can",     "could",    "did",
    "do",       "does",    "doing",   "down",     "during",     "each",    "few",     "for",      "from",
    "further",  "had",     "has",     "have",     "having",     "he",      "her",     "here",     "hers",
    "herself",  "him",     "himself", "his",      "how",        "i",       "if",      "in",       "into",
    "is",       "it",      "its",     "itself",   "just",       "me",      "more",    "most",     "my",
    "myself",   "no",      "nor",     "not",      "now",        "of",      "off",     "on",       "once",
    "only",     "or",      "other",   "our",      "ours",       "ourselves", "out",   "over",     "own",
    "same",     "she",     "should",  "so",       "some",       "such",    "than",    "that",     "the",
    "their",    "theirs",  "them",    "themselves", "then",     "there",   "these",   "they",     "this",
    "those",    "through", "to",      "too",      "under",      "until",   "up",      "very",     "was",
    "we",       "were",    "what",    "when",     "where",      "which",   "while",   "who",      "whom",
    "why",      "will",    "with",    "would",    "you",        "your",    "yours",   "yourself", "yourselves",
    "also",     "may",     "might",   "must",     "shall",      "upon",    "yet",     "however",  "therefore",
    "thus",     "whether", "either",  "neither",  "although",   "though",  "since",   "unless",   "within",
    "without",  "among",   "around",  "toward",   "across",     "behind",
};

}  // namespace

std::span<const std::string_view> stopwords() { return kStopwords; }

bool is_stopword(std::string_view w) {
  static const std::unordered_set<std::string_view> set(kStopwords.begin(), kStopwords.end());
  return set.count(w) != 0;
}

}  // namespace asas::text
