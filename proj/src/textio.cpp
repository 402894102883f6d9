#include "asas/textio.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "asas/error.hpp"

namespace asas {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonIntegerScore: return "NonIntegerScore";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MissingSecondRead: return "MissingSecondRead";
    case Errc::HeaderMismatch: return "HeaderMismatch";
    case Errc::RowLengthMismatch: return "RowLengthMismatch";
    case Errc::UnknownResponseId: return "UnknownResponseId";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::DegenerateDistribution: return "DegenerateDistribution";
    case Errc::InsufficientClasses: return "InsufficientClasses";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::SingleClass: return "SingleClass";
    case Errc::EmptySpace: return "EmptySpace";
    case Errc::AllTrialsFailed: return "AllTrialsFailed";
    case Errc::CoverageGap: return "CoverageGap";
    case Errc::KMismatch: return "KMismatch";
    case Errc::TooFewCandidates: return "TooFewCandidates";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

namespace textio {

std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view s) {
  s = trim(s);
  double x = 0.0;
  // from_chars rejects a leading '+'.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(Errc::MalformedRow, "not a number: '" + std::string(s) + "'");
  return x;
}

bool try_parse_int(std::string_view s, long long& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

long long parse_int(std::string_view s) {
  long long v = 0;
  if (!try_parse_int(s, v)) fail(Errc::MalformedRow, "not an integer: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(Errc::Io, "write failed for " + path.string());
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    fail(Errc::Io, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string artifact_header(std::uint64_t seed,
                            const std::vector<std::pair<std::string, std::string>>& digests) {
  std::string out = "# asas " ASAS_VERSION " seed=" + std::to_string(seed) + " inputs=";
  for (std::size_t i = 0; i < digests.size(); ++i) {
    if (i) out += ',';
    out += digests[i].first + ":" + digests[i].second.substr(0, 16);
  }
  if (digests.empty()) out += '-';
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_fields(std::string_view line, char delim) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto field : split(line, delim)) {
    field = trim(field);
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string_view::npos)
      fail(Errc::HeaderMismatch, "expected key=value, got '" + std::string(field) + "'");
    out.emplace_back(std::string(trim(field.substr(0, eq))), std::string(trim(field.substr(eq + 1))));
  }
  return out;
}

LineReader::LineReader(std::string text) : text_(std::move(text)) {}

bool LineReader::next(std::string_view& line) {
  while (pos_ < text_.size()) {
    auto end = text_.find('\n', pos_);
    if (end == std::string::npos) end = text_.size();
    std::string_view l(text_.data() + pos_, end - pos_);
    pos_ = end + 1;
    l = strip_cr(l);
    if (!l.empty() && l.front() == '#') continue;
    line = l;
    return true;
  }
  return false;
}

std::string_view LineReader::expect(std::string_view what) {
  std::string_view line;
  if (!next(line)) fail(Errc::HeaderMismatch, "unexpected end of input, expected " + std::string(what));
  return line;
}

std::string_view LineReader::expect_value(std::string_view key) {
  const auto line = expect(key);
  const auto eq = line.find('=');
  if (eq == std::string_view::npos || line.substr(0, eq) != key)
    fail(Errc::HeaderMismatch, "expected '" + std::string(key) + "=', got '" + std::string(line) + "'");
  return line.substr(eq + 1);
}

void write_matrix(std::ostream& os, std::string_view name, const Eigen::MatrixXd& m) {
  os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << '\t';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix(LineReader& in, std::string_view name) {
  const auto head = split(in.expect("matrix header"), ' ');
  if (head.size() != 4 || head[0] != "matrix" || head[1] != name)
    fail(Errc::HeaderMismatch, "expected matrix '" + std::string(name) + "'");
  const auto rows = parse_int(head[2]);
  const auto cols = parse_int(head[3]);
  if (rows < 0 || cols < 0) fail(Errc::HeaderMismatch, "negative matrix shape");
  Eigen::MatrixXd m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    const auto line = in.expect("matrix row");
    const auto cells = cols == 0 ? std::vector<std::string_view>{} : split(line, '\t');
    if (static_cast<long long>(cells.size()) != cols)
      fail(Errc::RowLengthMismatch, "matrix '" + std::string(name) + "' row " + std::to_string(i));
    for (long long j = 0; j < cols; ++j) m(i, j) = parse_double(cells[static_cast<std::size_t>(j)]);
  }
  return m;
}

void write_vector(std::ostream& os, std::string_view name, const Eigen::VectorXd& v) {
  write_matrix(os, name, v.transpose());
}

Eigen::VectorXd read_vector(LineReader& in, std::string_view name) {
  Eigen::MatrixXd m = read_matrix(in, name);
  if (m.rows() != 1) fail(Errc::HeaderMismatch, "vector '" + std::string(name) + "' must have one row");
  return m.row(0).transpose();
}

}  // namespace textio
}  // namespace asas
