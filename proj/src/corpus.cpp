#include "asas/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_set>

#include "asas/error.hpp"
#include "asas/metrics.hpp"
#include "asas/numeric.hpp"
#include "asas/rng.hpp"
#include "asas/textio.hpp"

namespace asas::corpus {

using textio::split;
using textio::strip_cr;
using textio::trim;

namespace {

/// Splits a document into lines without trailing CR; drops a final empty line.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) out.push_back(strip_cr(line));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::optional<std::size_t> find_column(const std::vector<std::string_view>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == name) return i;
  return std::nullopt;
}

std::size_t require_column(const std::vector<std::string_view>& header, std::string_view name) {
  auto idx = find_column(header, name);
  if (!idx) fail(Errc::MalformedRow, "header lacks column '" + std::string(name) + "'");
  return *idx;
}

std::optional<int> parse_score(std::string_view cell, std::size_t line_no) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  long long v = 0;
  if (!textio::try_parse_int(cell, v))
    fail(Errc::NonIntegerScore, "line " + std::to_string(line_no) + ": '" + std::string(cell) + "'");
  return static_cast<int>(v);
}

}  // namespace

std::vector<ScoredResponse> parse_dataset(std::string_view tsv, const ColumnMap& columns) {
  const auto lines = lines_of(tsv);
  if (lines.empty()) fail(Errc::MalformedRow, "missing header row");
  const auto header = split(lines[0], '\t');
  const auto c_id = require_column(header, columns.id);
  const auto c_prompt = require_column(header, columns.prompt);
  const auto c_text = require_column(header, columns.text);
  const auto c_s1 = find_column(header, columns.score1);
  const auto c_s2 = find_column(header, columns.score2);

  std::vector<ScoredResponse> out;
  std::set<std::pair<int, std::string>> seen;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split(lines[ln], '\t');
    if (cells.size() != header.size())
      fail(Errc::MalformedRow, "line " + std::to_string(ln + 1) + ": " + std::to_string(cells.size()) +
                                   " fields, expected " + std::to_string(header.size()));
    ScoredResponse r;
    r.id = std::string(trim(cells[c_id]));
    long long prompt = 0;
    if (!textio::try_parse_int(cells[c_prompt], prompt))
      fail(Errc::MalformedRow, "line " + std::to_string(ln + 1) + ": bad prompt id");
    r.prompt_id = static_cast<int>(prompt);
    r.text = std::string(cells[c_text]);
    if (c_s1) r.score1 = parse_score(cells[*c_s1], ln + 1);
    if (c_s2) r.score2 = parse_score(cells[*c_s2], ln + 1);
    if (!seen.emplace(r.prompt_id, r.id).second)
      fail(Errc::DuplicateId, "id '" + r.id + "' repeated in prompt " + std::to_string(r.prompt_id));
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_dataset(std::span<const ScoredResponse> responses, const ColumnMap& c) {
  std::ostringstream os;
  os << c.id << '\t' << c.prompt << '\t' << c.score1 << '\t' << c.score2 << '\t' << c.text << '\n';
  auto score = [](const std::optional<int>& s) { return s ? std::to_string(*s) : std::string(); };
  for (const auto& r : responses)
    os << r.id << '\t' << r.prompt_id << '\t' << score(r.score1) << '\t' << score(r.score2) << '\t' << r.text << '\n';
  return os.str();
}

std::unordered_map<std::string, int> parse_solution(std::string_view text, std::string_view id_column,
                                                    std::string_view score_column) {
  const auto lines = lines_of(text);
  if (lines.empty()) fail(Errc::MalformedRow, "answer key lacks a header");
  const char delim = lines[0].find('\t') != std::string_view::npos ? '\t' : ',';
  const auto header = split(lines[0], delim);
  const auto c_id = require_column(header, id_column);
  const auto c_score = require_column(header, score_column);
  std::unordered_map<std::string, int> key;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split(lines[ln], delim);
    if (cells.size() != header.size()) fail(Errc::MalformedRow, "answer key line " + std::to_string(ln + 1));
    auto score = parse_score(cells[c_score], ln + 1);
    if (!score) fail(Errc::NonIntegerScore, "answer key line " + std::to_string(ln + 1) + " has no score");
    if (!key.emplace(std::string(trim(cells[c_id])), *score).second)
      fail(Errc::DuplicateId, "answer key repeats id '" + std::string(trim(cells[c_id])) + "'");
  }
  return key;
}

void join_scores(std::vector<ScoredResponse>& responses, const std::unordered_map<std::string, int>& key) {
  for (auto& r : responses) {
    auto it = key.find(r.id);
    if (it == key.end()) fail(Errc::UnknownResponseId, "answer key has no score for '" + r.id + "'");
    r.score1 = it->second;
  }
}

Split split_dev(std::span<const ScoredResponse> responses, double dev_fraction, std::uint64_t seed) {
  if (responses.empty()) fail(Errc::EmptyInput, "nothing to split");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    fail(Errc::InvalidArgument, "dev fraction must lie in (0, 1)");
  for (const auto& r : responses)
    if (r.prompt_id != responses.front().prompt_id)
      fail(Errc::InvalidArgument, "split_dev expects a single prompt");

  const std::size_t n = responses.size();
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> in_dev(n, false);
  for (std::size_t i = 0; i < n_dev; ++i) in_dev[order[i]] = true;

  Split s;
  s.dev.reserve(n_dev);
  s.train.reserve(n - n_dev);
  for (std::size_t i = 0; i < n; ++i) (in_dev[i] ? s.dev : s.train).push_back(responses[i]);
  return s;
}

std::vector<int> PromptCorpus::labels(std::span<const ScoredResponse> split) const {
  std::vector<int> out;
  out.reserve(split.size());
  for (const auto& r : split) {
    if (!r.score1) fail(Errc::InvalidArgument, "response '" + r.id + "' has no score");
    out.push_back(label(*r.score1));
  }
  return out;
}

std::vector<std::string> PromptCorpus::ids(std::span<const ScoredResponse> split) const {
  std::vector<std::string> out;
  out.reserve(split.size());
  for (const auto& r : split) out.push_back(r.id);
  return out;
}

PromptCorpus make_prompt_corpus(std::span<const ScoredResponse> all, int prompt_id, double dev_fraction,
                                std::uint64_t seed, std::span<const ScoredResponse> test, std::string prompt_text) {
  std::vector<ScoredResponse> mine;
  for (const auto& r : all)
    if (r.prompt_id == prompt_id) mine.push_back(r);
  if (mine.empty()) fail(Errc::EmptyInput, "no responses for prompt " + std::to_string(prompt_id));

  int lo = INT32_MAX, hi = INT32_MIN;
  for (const auto& r : mine) {
    if (!r.score1) fail(Errc::InvalidArgument, "training response '" + r.id + "' has no Score1");
    for (const auto& s : {r.score1, r.score2}) {
      if (!s) continue;
      lo = std::min(lo, *s);
      hi = std::max(hi, *s);
    }
  }
  if (hi == lo)
    fail(Errc::InsufficientClasses, "prompt " + std::to_string(prompt_id) + " has a single observed score");

  PromptCorpus c;
  c.prompt_id = prompt_id;
  c.min_score = lo;
  c.k = hi - lo + 1;
  c.prompt_text = std::move(prompt_text);
  auto s = split_dev(mine, dev_fraction, seed);
  c.train = std::move(s.train);
  c.dev = std::move(s.dev);

  std::unordered_set<std::string> known;
  for (const auto& r : mine) known.insert(r.id);
  for (const auto& r : test) {
    if (r.prompt_id != prompt_id) continue;
    if (known.count(r.id)) fail(Errc::DuplicateId, "test id '" + r.id + "' also appears in training data");
    for (const auto& sc : {r.score1, r.score2})
      if (sc && (*sc < lo || *sc > hi))
        fail(Errc::LabelOutOfRange, "test response '" + r.id + "' score outside [" + std::to_string(lo) + "," +
                                        std::to_string(hi) + "]");
    c.test.push_back(r);
  }
  return c;
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char ch : text) {
    const bool space = std::isspace(ch) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

StatsRow corpus_stats(const PromptCorpus& corpus) {
  if (corpus.dev.empty()) fail(Errc::EmptyInput, "dev split is empty");
  std::vector<int> first, second;
  for (const auto& r : corpus.dev) {
    if (!r.score1 || !r.score2) fail(Errc::MissingSecondRead, "dev response '" + r.id + "' lacks two reads");
    first.push_back(corpus.label(*r.score1));
    second.push_back(corpus.label(*r.score2));
  }
  StatsRow row;
  row.prompt_id = corpus.prompt_id;
  row.n_train = corpus.train.size();
  row.n_dev = corpus.dev.size();
  row.n_test = corpus.test.size();
  row.dev_qwk = metrics::qwk(first, second, corpus.k);
  row.dev_accuracy = metrics::accuracy(first, second);
  std::size_t words = 0;
  for (const auto& r : corpus.train) words += word_count(r.text);
  for (const auto& r : corpus.dev) words += word_count(r.text);
  row.avg_length = static_cast<double>(words) / static_cast<double>(corpus.train.size() + corpus.dev.size());
  return row;
}

std::string stats_tsv_header() { return "set\ttrain_n\tdev_n\ttest_n\tdev_qwk\tdev_acc\tavg_length"; }

std::string stats_tsv_row(const StatsRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%zu\t%zu\t%zu\t%.3f\t%.1f%%\t%.1f", r.prompt_id, r.n_train, r.n_dev, r.n_test,
                r.dev_qwk, 100.0 * r.dev_accuracy, r.avg_length);
  return buf;
}

namespace {

std::string_view header_line(const std::vector<std::string_view>& lines, std::string_view what) {
  if (lines.empty() || lines[0].empty() || lines[0].front() != '#')
    fail(Errc::HeaderMismatch, std::string(what) + " file must start with a '#' header line");
  return lines[0].substr(1);
}

}  // namespace

LogProbMatrix load_logprobs(std::string_view text) {
  const auto lines = lines_of(text);
  LogProbMatrix m;
  bool have_model = false, have_prompt = false, have_k = false;
  for (const auto& [key, value] : textio::parse_fields(header_line(lines, "log-prob"), '\t')) {
    if (key == "model") {
      m.model_name = value;
      have_model = !value.empty();
    } else if (key == "prompt") {
      m.prompt_id = static_cast<int>(textio::parse_int(value));
      have_prompt = true;
    } else if (key == "k") {
      m.k = static_cast<int>(textio::parse_int(value));
      have_k = true;
    }
  }
  if (!have_model || !have_prompt || !have_k) fail(Errc::HeaderMismatch, "header needs model=, prompt= and k=");
  if (m.k < 2) fail(Errc::HeaderMismatch, "k must be at least 2");

  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty() || lines[ln].front() == '#') continue;
    const auto cells = split(lines[ln], '\t');
    if (cells.size() != static_cast<std::size_t>(m.k) + 1)
      fail(Errc::RowLengthMismatch, "line " + std::to_string(ln + 1) + ": " + std::to_string(cells.size() - 1) +
                                        " values for k=" + std::to_string(m.k));
    Eigen::VectorXd v(m.k);
    for (int j = 0; j < m.k; ++j) {
      v(j) = textio::parse_double(cells[static_cast<std::size_t>(j) + 1]);
      if (std::isnan(v(j)) || v(j) == std::numeric_limits<double>::infinity())
        fail(Errc::MalformedRow, "line " + std::to_string(ln + 1) + ": non-finite log-probability");
    }
    if (!std::isfinite(v.maxCoeff()))
      fail(Errc::MalformedRow, "line " + std::to_string(ln + 1) + ": every class has zero probability");
    v = log_softmax_rows(v.transpose()).transpose().cwiseMax(kLogProbFloor);
    std::string id(trim(cells[0]));
    if (!m.rows.emplace(id, std::move(v)).second) fail(Errc::DuplicateId, "log-prob id '" + id + "' repeated");
    m.order.push_back(std::move(id));
  }
  return m;
}

std::string write_logprobs(const LogProbMatrix& m, std::string_view extra_header_fields) {
  std::ostringstream os;
  os << "#model=" << m.model_name << "\tprompt=" << m.prompt_id << "\tk=" << m.k;
  if (!extra_header_fields.empty()) os << '\t' << extra_header_fields;
  os << '\n';
  for (const auto& id : m.order) {
    const auto* row = m.find(id);
    os << id;
    for (Eigen::Index j = 0; j < row->size(); ++j) os << '\t' << textio::format_double((*row)(j));
    os << '\n';
  }
  return os.str();
}

void validate_logprobs(const LogProbMatrix& m, const PromptCorpus& corpus) {
  if (m.k != corpus.k)
    fail(Errc::HeaderMismatch, "model '" + m.model_name + "' has k=" + std::to_string(m.k) + ", corpus has k=" +
                                   std::to_string(corpus.k));
  if (m.prompt_id != corpus.prompt_id)
    fail(Errc::HeaderMismatch, "model '" + m.model_name + "' is for prompt " + std::to_string(m.prompt_id));
  std::unordered_set<std::string> known;
  for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test})
    for (const auto& r : *split) known.insert(r.id);
  for (const auto& id : m.order)
    if (!known.count(id)) fail(Errc::UnknownResponseId, "model '" + m.model_name + "' scores unknown id '" + id + "'");
}

EmbeddingTable load_embeddings(std::string_view text) {
  const auto lines = lines_of(text);
  EmbeddingTable t;
  for (const auto& [key, value] : textio::parse_fields(header_line(lines, "embedding"), '\t'))
    if (key == "dim") t.dim = static_cast<int>(textio::parse_int(value));
  if (t.dim <= 0) fail(Errc::HeaderMismatch, "embedding header needs dim=<positive int>");
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty() || lines[ln].front() == '#') continue;
    const auto cells = split(lines[ln], '\t');
    if (cells.size() != static_cast<std::size_t>(t.dim) + 1)
      fail(Errc::DimMismatch, "line " + std::to_string(ln + 1) + ": " + std::to_string(cells.size() - 1) +
                                  " values for dim=" + std::to_string(t.dim));
    Eigen::VectorXd v(t.dim);
    for (int j = 0; j < t.dim; ++j) v(j) = textio::parse_double(cells[static_cast<std::size_t>(j) + 1]);
    std::string id(trim(cells[0]));
    if (!t.rows.emplace(id, std::move(v)).second) fail(Errc::DuplicateId, "embedding id '" + id + "' repeated");
  }
  return t;
}

}  // namespace asas::corpus
