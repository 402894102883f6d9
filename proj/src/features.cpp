#include "asas/features.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "asas/error.hpp"
#include "asas/text.hpp"
#include "asas/textio.hpp"

namespace asas::features {

using corpus::ScoredResponse;
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Prompt overlap

MinutiaeIndex::MinutiaeIndex(std::string_view prompt)
    : prompt_(text::normalize_text(prompt)), substrings_(kMinutiaeDims) {
  const std::string_view p(prompt_);
  for (int len = kMinutiaeMinLength; len <= kMinutiaeMaxLength; ++len) {
    auto& set = substrings_[static_cast<std::size_t>(len - kMinutiaeMinLength)];
    const auto l = static_cast<std::size_t>(len);
    for (std::size_t i = 0; i + l <= p.size(); ++i) set.insert(p.substr(i, l));
  }
}

Eigen::VectorXd MinutiaeIndex::overlap(std::string_view response) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kMinutiaeDims);
  const std::string r = text::normalize_text(response);
  const std::string_view rv(r);
  std::unordered_set<std::string_view> seen;
  for (int len = kMinutiaeMinLength; len <= kMinutiaeMaxLength; ++len) {
    const auto slot = static_cast<std::size_t>(len - kMinutiaeMinLength);
    const auto l = static_cast<std::size_t>(len);
    if (substrings_[slot].empty() || rv.size() < l) continue;
    seen.clear();
    for (std::size_t i = 0; i + l <= rv.size(); ++i) {
      const auto sub = rv.substr(i, l);
      if (substrings_[slot].count(sub) && seen.insert(sub).second) out(static_cast<Eigen::Index>(slot)) += 1.0;
    }
  }
  return out;
}

Eigen::VectorXd minutiae_overlap(std::string_view response, std::string_view prompt) {
  return MinutiaeIndex(prompt).overlap(response);
}

// ---------------------------------------------------------------------------
// Key n-grams

double chi_squared(std::span<const int> present, std::span<const int> class_sizes) {
  double n = 0.0, df = 0.0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    n += class_sizes[c];
    df += present[c];
  }
  if (n == 0.0) return 0.0;
  double chi = 0.0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double share = class_sizes[c] / n;
    const double e_present = df * share;
    const double e_absent = (n - df) * share;
    const double o_present = present[c];
    const double o_absent = class_sizes[c] - present[c];
    if (e_present > 0.0) chi += (o_present - e_present) * (o_present - e_present) / e_present;
    if (e_absent > 0.0) chi += (o_absent - e_absent) * (o_absent - e_absent) / e_absent;
  }
  return chi;
}

std::vector<KeyNgram> select_key_ngrams(std::span<const std::string> texts, std::span<const int> labels,
                                        int n_per_order) {
  if (texts.size() != labels.size()) fail(Errc::LengthMismatch, "texts and labels differ in length");
  if (n_per_order < 1) fail(Errc::InvalidArgument, "n_per_order must be positive");
  std::map<int, int> class_of;
  for (int y : labels) class_of.emplace(y, 0);
  if (class_of.size() < 2) fail(Errc::InsufficientClasses, "key n-gram selection needs two score classes");
  int next = 0;
  for (auto& [label, slot] : class_of) slot = next++;
  std::vector<int> class_sizes(class_of.size(), 0);
  for (int y : labels) ++class_sizes[static_cast<std::size_t>(class_of[y])];

  std::vector<KeyNgram> out;
  for (int order = 1; order <= kNgramOrders; ++order) {
    std::map<std::string, std::vector<int>> presence;
    for (std::size_t d = 0; d < texts.size(); ++d) {
      const auto toks = text::tokenize(texts[d]);
      const auto n = static_cast<std::size_t>(order);
      std::set<std::string> in_doc;
      for (std::size_t i = 0; i + n <= toks.size(); ++i) in_doc.insert(text::join(toks, i, n));
      const auto cls = static_cast<std::size_t>(class_of[labels[d]]);
      for (const auto& g : in_doc) {
        auto& counts = presence[g];
        if (counts.empty()) counts.assign(class_sizes.size(), 0);
        ++counts[cls];
      }
    }
    std::vector<KeyNgram> ranked;
    ranked.reserve(presence.size());
    for (const auto& [g, counts] : presence) ranked.push_back({g, order, chi_squared(counts, class_sizes)});
    std::stable_sort(ranked.begin(), ranked.end(), [](const KeyNgram& a, const KeyNgram& b) {
      return a.score != b.score ? a.score > b.score : a.text < b.text;
    });
    ranked.resize(static_cast<std::size_t>(n_per_order), KeyNgram{"", order, 0.0});
    out.insert(out.end(), ranked.begin(), ranked.end());
  }
  return out;
}

namespace {

/// Upper bound on the ratio from lengths alone.
double length_bound(std::size_t a, std::size_t b) {
  return a + b == 0 ? 1.0 : 2.0 * static_cast<double>(std::min(a, b)) / static_cast<double>(a + b);
}

/// Ratio if it can reach `floor`, otherwise a negative sentinel.
double bounded_ratio(std::string_view window, std::string_view key, double floor) {
  if (length_bound(window.size(), key.size()) < floor) return -1.0;
  if (text::quick_ratio(window, key) < floor) return -1.0;
  return text::similarity_ratio(window, key);
}

template <class Visit>
void for_each_window(const std::vector<std::string>& tokens, const KeyNgram& key, Visit&& visit) {
  if (key.text.empty()) return;
  const auto n = static_cast<std::size_t>(key.order);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) visit(text::join(tokens, i, n));
}

}  // namespace

Eigen::VectorXd near_match_count(std::string_view response, std::span<const KeyNgram> keys, double cutoff) {
  if (!(cutoff >= kMinCutoff && cutoff <= kMaxCutoff))
    fail(Errc::InvalidArgument, "near-match cutoff must lie in [0.5, 1]");
  const auto tokens = text::tokenize(response);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keys.size()));
  for (std::size_t g = 0; g < keys.size(); ++g)
    for_each_window(tokens, keys[g], [&](const std::string& w) {
      if (bounded_ratio(w, keys[g].text, cutoff) >= cutoff) out(static_cast<Eigen::Index>(g)) += 1.0;
    });
  return out;
}

NearMatchProfile::NearMatchProfile(std::string_view response, std::span<const KeyNgram> keys)
    : ratios_(keys.size()) {
  const auto tokens = text::tokenize(response);
  for (std::size_t g = 0; g < keys.size(); ++g) {
    for_each_window(tokens, keys[g], [&](const std::string& w) {
      const double r = bounded_ratio(w, keys[g].text, kMinCutoff);
      if (r >= kMinCutoff) ratios_[g].push_back(r);
    });
    std::sort(ratios_[g].begin(), ratios_[g].end(), std::greater<>());
  }
}

Eigen::VectorXd NearMatchProfile::counts(double cutoff) const {
  if (!(cutoff >= kMinCutoff && cutoff <= kMaxCutoff))
    fail(Errc::InvalidArgument, "near-match cutoff must lie in [0.5, 1]");
  Eigen::VectorXd out(static_cast<Eigen::Index>(ratios_.size()));
  for (std::size_t g = 0; g < ratios_.size(); ++g) {
    const auto& r = ratios_[g];
    // Sorted descending: count the prefix with ratio >= cutoff.
    const auto it = std::partition_point(r.begin(), r.end(), [cutoff](double x) { return x >= cutoff; });
    out(static_cast<Eigen::Index>(g)) = static_cast<double>(it - r.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// TF-IDF eigen-projection

namespace {

SparseRows tfidf_sparse(const TfidfProjection& model, std::span<const std::string> texts) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t d = 0; d < texts.size(); ++d) {
    std::map<int, int> counts;
    for (const auto& tok : text::tokenize(texts[d])) {
      auto it = model.index.find(tok);
      if (it != model.index.end()) ++counts[it->second];
    }
    double norm2 = 0.0;
    for (const auto& [col, c] : counts) {
      const double w = c * model.idf(col);
      norm2 += w * w;
    }
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (const auto& [col, c] : counts)
      triplets.emplace_back(static_cast<int>(d), col, c * model.idf(col) * inv);
  }
  SparseRows x(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(model.terms.size()));
  x.setFromTriplets(triplets.begin(), triplets.end());
  return x;
}

Eigen::MatrixXd project_sparse(const SparseRows& x, const Eigen::MatrixXd& projection) {
  return x * projection;
}

}  // namespace

TfidfProjection TfidfProjection::truncated(int d) const {
  if (d < 1 || d > dim()) fail(Errc::InvalidArgument, "cannot truncate projection to " + std::to_string(d));
  TfidfProjection out = *this;
  out.projection = projection.leftCols(d);
  out.eigenvalues = eigenvalues.head(d);
  out.requested_dim = d;
  return out;
}

TfidfProjection fit_tfidf_projection(std::span<const std::string> train_texts, int d_t) {
  if (d_t < 1) fail(Errc::InvalidArgument, "projection dimension must be positive");
  TfidfProjection model;
  model.requested_dim = d_t;

  std::map<std::string, int> df;
  for (const auto& t : train_texts) {
    const auto toks = text::tokenize(t);
    for (const auto& tok : std::set<std::string>(toks.begin(), toks.end())) ++df[tok];
  }
  if (df.empty()) fail(Errc::RankDeficient, "empty vocabulary");
  const double n = static_cast<double>(train_texts.size());
  model.idf.resize(static_cast<Eigen::Index>(df.size()));
  for (const auto& [term, count] : df) {
    const int col = static_cast<int>(model.terms.size());
    model.index.emplace(term, col);
    model.terms.push_back(term);
    model.idf(col) = std::log((1.0 + n) / (1.0 + count)) + 1.0;
  }

  const SparseRows x = tfidf_sparse(model, train_texts);
  const Eigen::Index v = x.cols(), rows = x.rows();
  Eigen::VectorXd values;  // descending
  Eigen::MatrixXd vectors;
  if (v <= rows) {
    const Eigen::MatrixXd gram = Eigen::MatrixXd(SparseRows(x.transpose() * x));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    values = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
  } else {
    // Dual route: eigenvectors of X X^T mapped back through X^T.
    const Eigen::MatrixXd gram = Eigen::MatrixXd(SparseRows(x * x.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    values = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
  }
  const double top = values.size() ? values(0) : 0.0;
  Eigen::Index rank = 0;
  while (rank < values.size() && top > 0.0 && values(rank) > 1e-9 * top) ++rank;
  if (rank == 0) fail(Errc::RankDeficient, "tf-idf matrix has no nonzero eigenvalue");
  const Eigen::Index d = std::min<Eigen::Index>(d_t, rank);

  model.eigenvalues = values.head(d);
  if (v <= rows) {
    model.projection = vectors.leftCols(d);
  } else {
    model.projection = x.transpose() * vectors.leftCols(d);
    for (Eigen::Index j = 0; j < d; ++j) model.projection.col(j) /= std::sqrt(values(j));
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index arg = 0;
    model.projection.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.projection(arg, j) < 0.0) model.projection.col(j) *= -1.0;
  }
  return model;
}

Eigen::MatrixXd tfidf_rows(const TfidfProjection& model, std::span<const std::string> texts) {
  return Eigen::MatrixXd(tfidf_sparse(model, texts));
}

Eigen::MatrixXd project(const TfidfProjection& model, std::span<const std::string> texts) {
  return project_sparse(tfidf_sparse(model, texts), model.projection);
}

// ---------------------------------------------------------------------------
// Text statistics

Eigen::VectorXd text_stats(std::string_view s) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kTextStatDims);
  const auto trimmed = textio::trim(s);
  if (trimmed.empty()) return out;
  const auto words = text::tokenize(trimmed);

  std::size_t sentences = 0;
  bool has_content = false;
  std::size_t punct = 0, digits = 0;
  for (unsigned char c : trimmed) {
    if (c < 0x80 && std::ispunct(c)) ++punct;
    if (c < 0x80 && std::isdigit(c)) ++digits;
    if (c == '.' || c == '!' || c == '?') {
      sentences += has_content;
      has_content = false;
    } else if (c >= 0x80 || std::isalnum(c)) {
      has_content = true;
    }
  }
  sentences += has_content;

  double total_len = 0.0, longest = 0.0, stop = 0.0;
  std::set<std::string> types;
  for (const auto& w : words) {
    const auto len = static_cast<double>(text::codepoints(w));
    total_len += len;
    longest = std::max(longest, len);
    stop += text::is_stopword(w);
    types.insert(w);
  }
  const auto nw = static_cast<double>(words.size());
  out(0) = static_cast<double>(text::codepoints(trimmed));
  out(1) = nw;
  out(2) = static_cast<double>(sentences);
  out(3) = nw > 0 ? total_len / nw : 0.0;
  out(4) = sentences > 0 ? nw / static_cast<double>(sentences) : 0.0;
  out(5) = nw > 0 ? static_cast<double>(types.size()) / nw : 0.0;
  out(6) = static_cast<double>(punct);
  out(7) = static_cast<double>(digits);
  out(8) = nw > 0 ? stop / nw : 0.0;
  out(9) = longest;
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) fail(Errc::EmptyInput, "cannot standardize zero rows");
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.sd.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().mean();
    const double sd = std::sqrt(var);
    s.sd(j) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? sd : 0.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) fail(Errc::DimMismatch, "standardizer fitted on a different width");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (sd(j) == 0.0)
      out.col(j).setZero();
    else
      out.col(j) = (x.col(j).array() - mean(j)) / sd(j);
  }
  return out;
}

int FeatureModelSpec::dim() const {
  return embedding_dim.value_or(0) + tfidf.dim() + kMinutiaeDims + static_cast<int>(key_ngrams.size()) +
         kTextStatDims;
}

namespace {

std::vector<std::string> texts_of(std::span<const ScoredResponse> responses) {
  std::vector<std::string> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back(r.text);
  return out;
}

const Eigen::VectorXd& embedding_of(const corpus::EmbeddingTable& table, const std::string& id) {
  auto it = table.rows.find(id);
  if (it == table.rows.end()) fail(Errc::MissingEmbedding, "no embedding for response '" + id + "'");
  return it->second;
}

/// Writes one response's blocks into `row` in the fixed concatenation order.
template <class Row>
void fill_row(Row&& row, const Eigen::VectorXd* embedding, const Eigen::Ref<const Eigen::RowVectorXd>& tfidf,
              const Eigen::VectorXd& minutiae, const Eigen::VectorXd& near, const Eigen::VectorXd& stats) {
  Eigen::Index c = 0;
  if (embedding) {
    row.segment(c, embedding->size()) = embedding->transpose();
    c += embedding->size();
  }
  row.segment(c, tfidf.size()) = tfidf;
  c += tfidf.size();
  row.segment(c, minutiae.size()) = minutiae.transpose();
  c += minutiae.size();
  row.segment(c, near.size()) = near.transpose();
  c += near.size();
  row.segment(c, stats.size()) = stats.transpose();
}

void check_embeddings(const FeatureModelSpec& spec, const corpus::EmbeddingTable* embeddings) {
  if (spec.embedding_dim && !embeddings)
    fail(Errc::MissingEmbedding, "feature spec expects embeddings of dim " + std::to_string(*spec.embedding_dim));
  if (spec.embedding_dim && embeddings->dim != *spec.embedding_dim)
    fail(Errc::DimMismatch, "embedding dim " + std::to_string(embeddings->dim) + " vs spec " +
                                std::to_string(*spec.embedding_dim));
}

}  // namespace

Eigen::MatrixXd raw_features(const FeatureModelSpec& spec, std::span<const ScoredResponse> responses,
                             const corpus::EmbeddingTable* embeddings) {
  check_embeddings(spec, embeddings);
  const auto texts = texts_of(responses);
  const Eigen::MatrixXd tfidf = project(spec.tfidf, texts);
  MinutiaeIndex minutiae(spec.prompt_minutiae);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(responses.size()), spec.dim());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd* emb = spec.embedding_dim ? &embedding_of(*embeddings, responses[i].id) : nullptr;
    fill_row(out.row(idx), emb, tfidf.row(idx), minutiae.overlap(texts[i]),
             near_match_count(texts[i], spec.key_ngrams, spec.near_match_cutoff), text_stats(texts[i]));
  }
  return out;
}

FeatureMatrix build_features(const FeatureModelSpec& spec, std::span<const ScoredResponse> responses,
                             const corpus::EmbeddingTable* embeddings) {
  FeatureMatrix m;
  for (const auto& r : responses) m.ids.push_back(r.id);
  m.data = spec.standardizer.apply(raw_features(spec, responses, embeddings));
  return m;
}

FeatureModelSpec fit_feature_spec(const corpus::PromptCorpus& corpus, const FeatureConfig& config,
                                  const corpus::EmbeddingTable* embeddings) {
  if (!(config.near_match_cutoff >= kMinCutoff && config.near_match_cutoff <= kMaxCutoff))
    fail(Errc::InvalidArgument, "near-match cutoff must lie in [0.5, 1]");
  FeatureModelSpec spec;
  const auto texts = texts_of(corpus.train);
  spec.tfidf = fit_tfidf_projection(texts, config.tfidf_dim);
  spec.key_ngrams = select_key_ngrams(texts, corpus.labels(corpus.train), config.ngrams_per_order);
  spec.near_match_cutoff = config.near_match_cutoff;
  if (embeddings) spec.embedding_dim = embeddings->dim;
  spec.prompt_minutiae = text::normalize_text(corpus.prompt_text);
  spec.standardizer = Standardizer::fit(raw_features(spec, corpus.train, embeddings));
  return spec;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
constexpr std::string_view kSpecMagic = "asas-feature-spec v1";
}

std::string serialize_spec(const FeatureModelSpec& spec) {
  std::ostringstream os;
  os << kSpecMagic << '\n';
  os << "embedding_dim=" << (spec.embedding_dim ? std::to_string(*spec.embedding_dim) : "none") << '\n';
  os << "near_match_cutoff=" << textio::format_double(spec.near_match_cutoff) << '\n';
  os << "prompt_minutiae=" << spec.prompt_minutiae << '\n';
  os << "requested_dim=" << spec.tfidf.requested_dim << '\n';
  os << "terms=" << spec.tfidf.terms.size() << '\n';
  for (std::size_t i = 0; i < spec.tfidf.terms.size(); ++i)
    os << spec.tfidf.terms[i] << '\t' << textio::format_double(spec.tfidf.idf(static_cast<Eigen::Index>(i))) << '\n';
  textio::write_vector(os, "eigenvalues", spec.tfidf.eigenvalues);
  textio::write_matrix(os, "projection", spec.tfidf.projection);
  os << "key_ngrams=" << spec.key_ngrams.size() << '\n';
  for (const auto& g : spec.key_ngrams) os << g.order << '\t' << textio::format_double(g.score) << '\t' << g.text << '\n';
  textio::write_vector(os, "standardizer_mean", spec.standardizer.mean);
  textio::write_vector(os, "standardizer_sd", spec.standardizer.sd);
  os << "end\n";
  return os.str();
}

FeatureModelSpec parse_spec(std::string_view text) {
  textio::LineReader in{std::string(text)};
  if (in.expect("magic") != kSpecMagic) fail(Errc::HeaderMismatch, "not a feature spec (or unsupported version)");
  FeatureModelSpec spec;
  const auto emb = in.expect_value("embedding_dim");
  if (emb != "none") spec.embedding_dim = static_cast<int>(textio::parse_int(emb));
  spec.near_match_cutoff = textio::parse_double(in.expect_value("near_match_cutoff"));
  spec.prompt_minutiae = std::string(in.expect_value("prompt_minutiae"));
  spec.tfidf.requested_dim = static_cast<int>(textio::parse_int(in.expect_value("requested_dim")));
  const auto v = textio::parse_int(in.expect_value("terms"));
  spec.tfidf.idf.resize(v);
  for (long long i = 0; i < v; ++i) {
    const auto cells = textio::split(in.expect("term"), '\t');
    if (cells.size() != 2) fail(Errc::MalformedRow, "term line " + std::to_string(i));
    spec.tfidf.terms.emplace_back(cells[0]);
    spec.tfidf.index.emplace(std::string(cells[0]), static_cast<int>(i));
    spec.tfidf.idf(i) = textio::parse_double(cells[1]);
  }
  spec.tfidf.eigenvalues = textio::read_vector(in, "eigenvalues");
  spec.tfidf.projection = textio::read_matrix(in, "projection");
  if (spec.tfidf.projection.rows() != v) fail(Errc::DimMismatch, "projection rows differ from vocabulary size");
  const auto g = textio::parse_int(in.expect_value("key_ngrams"));
  for (long long i = 0; i < g; ++i) {
    const auto line = in.expect("key n-gram");
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) fail(Errc::MalformedRow, "key n-gram line " + std::to_string(i));
    spec.key_ngrams.push_back({std::string(line.substr(t2 + 1)), static_cast<int>(textio::parse_int(line.substr(0, t1))),
                               textio::parse_double(line.substr(t1 + 1, t2 - t1 - 1))});
  }
  spec.standardizer.mean = textio::read_vector(in, "standardizer_mean");
  spec.standardizer.sd = textio::read_vector(in, "standardizer_sd");
  if (in.expect("end") != "end") fail(Errc::HeaderMismatch, "missing end marker");
  if (spec.standardizer.mean.size() != spec.dim()) fail(Errc::DimMismatch, "standardizer width differs from spec");
  return spec;
}

// ---------------------------------------------------------------------------
// Workspace

struct FeatureWorkspace::Cached {
  TfidfProjection tfidf;  // at max dimension
  std::vector<KeyNgram> key_ngrams;
  std::optional<int> embedding_dim;
  std::string prompt_minutiae;
  std::unordered_map<std::string, std::size_t> row_of;
  std::vector<Eigen::VectorXd> embedding;
  Eigen::MatrixXd tfidf_projected;
  std::vector<Eigen::VectorXd> minutiae;
  std::vector<NearMatchProfile> near;
  std::vector<Eigen::VectorXd> stats;
  std::vector<std::string> train_ids;

  Eigen::MatrixXd raw(std::span<const std::string> ids, int d, double cutoff) const {
    const int width = embedding_dim.value_or(0) + d + kMinutiaeDims + static_cast<int>(key_ngrams.size()) +
                      kTextStatDims;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), width);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = row_of.find(ids[i]);
      if (it == row_of.end()) fail(Errc::UnknownResponseId, "response '" + ids[i] + "' not in workspace");
      const auto r = it->second;
      fill_row(out.row(static_cast<Eigen::Index>(i)), embedding_dim ? &embedding[r] : nullptr,
               tfidf_projected.row(static_cast<Eigen::Index>(r)).head(d), minutiae[r], near[r].counts(cutoff),
               stats[r]);
    }
    return out;
  }
};

FeatureWorkspace::FeatureWorkspace(const corpus::PromptCorpus& corpus, const corpus::EmbeddingTable* embeddings,
                                   int max_tfidf_dim, int ngrams_per_order)
    : cache_(std::make_unique<Cached>()) {
  auto& c = *cache_;
  const auto train_texts = texts_of(corpus.train);
  c.tfidf = fit_tfidf_projection(train_texts, max_tfidf_dim);
  c.key_ngrams = select_key_ngrams(train_texts, corpus.labels(corpus.train), ngrams_per_order);
  if (embeddings) c.embedding_dim = embeddings->dim;
  c.prompt_minutiae = text::normalize_text(corpus.prompt_text);
  c.train_ids = corpus.ids(corpus.train);

  std::vector<const ScoredResponse*> all;
  for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test})
    for (const auto& r : *split) all.push_back(&r);
  std::vector<std::string> texts;
  for (const auto* r : all) texts.push_back(r->text);
  c.tfidf_projected = project(c.tfidf, texts);
  MinutiaeIndex minutiae(c.prompt_minutiae);
  for (std::size_t i = 0; i < all.size(); ++i) {
    c.row_of.emplace(all[i]->id, i);
    if (embeddings) c.embedding.push_back(embedding_of(*embeddings, all[i]->id));
    c.minutiae.push_back(minutiae.overlap(texts[i]));
    c.near.emplace_back(texts[i], c.key_ngrams);
    c.stats.push_back(text_stats(texts[i]));
  }
}

FeatureWorkspace::~FeatureWorkspace() = default;
FeatureWorkspace::FeatureWorkspace(FeatureWorkspace&&) noexcept = default;

int FeatureWorkspace::max_tfidf_dim() const { return cache_->tfidf.dim(); }

FeatureModelSpec FeatureWorkspace::spec(int tfidf_dim, double cutoff) const {
  if (!(cutoff >= kMinCutoff && cutoff <= kMaxCutoff))
    fail(Errc::InvalidArgument, "near-match cutoff must lie in [0.5, 1]");
  const auto& c = *cache_;
  FeatureModelSpec spec;
  spec.tfidf = c.tfidf.truncated(std::min(tfidf_dim, c.tfidf.dim()));
  spec.tfidf.requested_dim = tfidf_dim;
  spec.key_ngrams = c.key_ngrams;
  spec.near_match_cutoff = cutoff;
  spec.embedding_dim = c.embedding_dim;
  spec.prompt_minutiae = c.prompt_minutiae;
  spec.standardizer = Standardizer::fit(c.raw(c.train_ids, spec.tfidf.dim(), cutoff));
  return spec;
}

FeatureMatrix FeatureWorkspace::features(const FeatureModelSpec& spec, std::span<const ScoredResponse> split) const {
  FeatureMatrix m;
  for (const auto& r : split) m.ids.push_back(r.id);
  m.data = spec.standardizer.apply(cache_->raw(m.ids, spec.tfidf.dim(), spec.near_match_cutoff));
  return m;
}

}  // namespace asas::features
