#include "core/csvio.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace tdg::csv {

int Table::col(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int Table::require(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw DataError("missing required column '" + name + "'");
  return c;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size())
        throw DataError(path + ": row " + std::to_string(t.rows.size() + 2) +
                        " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw DataError(path + ": empty file, no header row");
  return t;
}

long to_long(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": not an integer: '" + s + "'");
  }
}

double to_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": not a number: '" + s + "'");
  }
}

bool to_bool(const std::string& s, const std::string& context) {
  if (s == "1" || s == "true" || s == "True") return true;
  if (s == "0" || s == "false" || s == "False") return false;
  throw DataError(context + ": not a boolean: '" + s + "'");
}

struct Writer::Impl {
  std::ofstream out;
  std::size_t n_cols = 0;
  std::string path;
};

Writer::Writer(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::string>& meta)
    : impl_(new Impl) {
  impl_->out.open(path);
  impl_->path = path;
  if (!impl_->out) {
    delete impl_;
    throw DataError("cannot open for writing: " + path);
  }
  for (const auto& m : meta) impl_->out << "# " << m << "\n";
  impl_->n_cols = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    impl_->out << header[i] << (i + 1 < header.size() ? "," : "\n");
}

Writer::~Writer() { delete impl_; }

void Writer::row(const std::vector<std::string>& fields) {
  if (fields.size() != impl_->n_cols)
    throw DataError(impl_->path + ": writer row arity mismatch");
  for (std::size_t i = 0; i < fields.size(); ++i)
    impl_->out << fields[i] << (i + 1 < fields.size() ? "," : "\n");
}

std::string fmt(double v) {
  // Shortest representation that round-trips; stable across runs.
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double parsed = std::strtod(buf, nullptr);
  for (int prec = 1; prec < 17; ++prec) {
    char cand[40];
    std::snprintf(cand, sizeof cand, "%.*g", prec, v);
    if (std::strtod(cand, nullptr) == parsed) return cand;
  }
  return buf;
}

std::string fmt(long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tdg::csv
