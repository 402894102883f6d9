#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace asas::textio {

/// Shortest decimal that parses back to the identical double.
std::string format_double(double x);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);
bool try_parse_int(std::string_view s, long long& out);

std::vector<std::string_view> split(std::string_view s, char delim);
std::string_view trim(std::string_view s);
std::string_view strip_cr(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view bytes);

/// `# asas <version> seed=<seed> inputs=<name>:<digest>,...`
std::string artifact_header(std::uint64_t seed,
                            const std::vector<std::pair<std::string, std::string>>& digests);

/// Parses `key=value` fields separated by `delim` (e.g. a `#model=..\tk=..` line).
std::vector<std::pair<std::string, std::string>> parse_fields(std::string_view line, char delim);

/// Sequential line reader over an in-memory document. Lines starting with
/// `#` are skipped by `next()`.
class LineReader {
 public:
  explicit LineReader(std::string text);

  bool next(std::string_view& line);
  std::string_view expect(std::string_view what);
  /// Reads `key=value` and returns value; throws HeaderMismatch on mismatch.
  std::string_view expect_value(std::string_view key);

 private:
  std::string text_;
  std::size_t pos_ = 0;
};

void write_matrix(std::ostream& os, std::string_view name, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(LineReader& in, std::string_view name);
void write_vector(std::ostream& os, std::string_view name, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(LineReader& in, std::string_view name);

}  // namespace asas::textio
