// Minimal CSV support shared by every stage. Artifact files start with a
// '#' metadata line naming the producing stage and config hash; the reader
// skips such lines.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tdg::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; -1 if absent.
  int col(const std::string& name) const;
  // Column index by name; throws DataError if absent.
  int require(const std::string& name) const;
};

Table read_file(const std::string& path);

std::vector<std::string> split_line(const std::string& line);

long to_long(const std::string& s, const std::string& context);
double to_double(const std::string& s, const std::string& context);
bool to_bool(const std::string& s, const std::string& context);

class Writer {
 public:
  // meta lines are written as leading '#' comments (stage/config hash).
  Writer(const std::string& path, const std::vector<std::string>& header,
         const std::vector<std::string>& meta = {});
  ~Writer();

  void row(const std::vector<std::string>& fields);

 private:
  struct Impl;
  Impl* impl_;
};

// Canonical numeric formatting so reruns are byte-identical.
std::string fmt(double v);
std::string fmt(long v);
std::string fmt(int v);

// FNV-1a over a string; used for config hashes in artifact metadata.
std::uint64_t fnv1a(const std::string& s);

}  // namespace tdg::csv
