#include "trishbb/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace trishbb::data {

namespace {

[[noreturn]] void parse_fail(long line_no, const std::string& what) {
  throw std::runtime_error("libsvm parse error at line " +
                           std::to_string(line_no) + ": " + what);
}

const char* skip_ws(const char* p, const char* end) {
  while (p != end && (*p == ' ' || *p == '\t')) ++p;
  return p;
}

// from_chars rejects an explicit leading '+' ("+1" labels are the common
// on-disk form), so step over one before handing the digits to it.
const char* skip_plus(const char* p, const char* end) {
  if (p != end && *p == '+' && p + 1 != end &&
      std::isdigit(static_cast<unsigned char>(p[1])))
    ++p;
  return p;
}

}  // namespace

ParsedSplit parse_libsvm(std::istream& in, int d_hint,
                         const ParseOptions& opts) {
  ParsedSplit out;
  out.d = d_hint;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const char* p = line.data();
    const char* end = p + line.size();
    p = skip_ws(p, end);
    if (p == end) continue;  // blank line

    SparseExample ex;
    long label = 0;
    p = skip_plus(p, end);
    auto r = std::from_chars(p, end, label);
    if (r.ec != std::errc()) parse_fail(line_no, "cannot read label");
    p = r.ptr;
    if (label == 1)
      ex.label = +1;
    else if (label == -1)
      ex.label = -1;
    else if (label == 0 && opts.zero_label_is_negative)
      ex.label = -1;
    else
      parse_fail(line_no, "label must be +1 or -1, got '" +
                              std::to_string(label) + "'");

    int prev_idx = 0;  // 1-based; entries must strictly increase
    while (true) {
      p = skip_ws(p, end);
      if (p == end) break;
      long idx = 0;
      r = std::from_chars(p, end, idx);
      if (r.ec != std::errc() || r.ptr == end || *r.ptr != ':')
        parse_fail(line_no, "expected '<index>:<value>'");
      if (idx <= 0) parse_fail(line_no, "feature index must be >= 1");
      if (idx <= prev_idx)
        parse_fail(line_no, "feature indices must be strictly increasing");
      p = skip_plus(r.ptr + 1, end);
      double val = 0;
      auto rv = std::from_chars(p, end, val);
      if (rv.ec != std::errc()) parse_fail(line_no, "cannot read value");
      p = rv.ptr;
      prev_idx = static_cast<int>(idx);
      ex.features.emplace_back(static_cast<int>(idx) - 1, val);
      if (idx > out.d) out.d = static_cast<int>(idx);
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

ParsedSplit parse_libsvm_file(const std::string& path, int d_hint,
                              const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return parse_libsvm(in, d_hint, opts);
}

std::string to_libsvm_line(const SparseExample& ex) {
  std::string s = ex.label > 0 ? "+1" : "-1";
  char buf[64];
  for (const auto& [idx, val] : ex.features) {
    // %.17g round-trips doubles exactly
    std::snprintf(buf, sizeof(buf), " %d:%.17g", idx + 1, val);
    s += buf;
  }
  return s;
}

Dataset load_dataset(const std::string& name, const std::string& train_path,
                     const std::string& test_path, int d_hint,
                     const ParseOptions& opts) {
  Dataset ds;
  ds.name = name;
  ParsedSplit tr = parse_libsvm_file(train_path, d_hint, opts);
  ParsedSplit te = parse_libsvm_file(test_path, d_hint, opts);
  ds.train = std::move(tr.examples);
  ds.test = std::move(te.examples);
  ds.d = std::max(tr.d, te.d);
  if (ds.train.empty())
    throw std::runtime_error("dataset " + name + ": empty train split");
  return ds;
}

NormStats fit_zero_one(const std::vector<SparseExample>& train, int d) {
  if (train.empty()) throw std::invalid_argument("fit_zero_one: empty input");
  NormStats st;
  st.lo.assign(static_cast<size_t>(d), 0.0);
  st.hi.assign(static_cast<size_t>(d), 0.0);
  std::vector<long> count(static_cast<size_t>(d), 0);
  std::vector<bool> seen(static_cast<size_t>(d), false);
  for (const auto& ex : train) {
    for (const auto& [j, v] : ex.features) {
      if (!seen[j]) {
        st.lo[j] = st.hi[j] = v;
        seen[j] = true;
      } else {
        st.lo[j] = std::min(st.lo[j], v);
        st.hi[j] = std::max(st.hi[j], v);
      }
      ++count[j];
    }
  }
  const long n = static_cast<long>(train.size());
  for (int j = 0; j < d; ++j) {
    if (count[j] < n) {  // implicit zeros take part in the column range
      st.lo[j] = std::min(st.lo[j], 0.0);
      st.hi[j] = std::max(st.hi[j], 0.0);
    }
  }
  return st;
}

std::vector<SparseExample> normalize_zero_one(
    const std::vector<SparseExample>& examples, const NormStats& stats,
    int d) {
  if (examples.empty())
    throw std::invalid_argument("normalize_zero_one: empty input");
  auto scale = [&](int j, double v) {
    const double range = stats.hi[j] - stats.lo[j];
    if (range <= 0.0) return 0.0;  // constant column
    return (v - stats.lo[j]) / range;
  };
  // Columns whose dense minimum is negative map the implicit 0 to a nonzero
  // value; those entries must be materialized to preserve dense semantics.
  std::vector<int> fill_cols;
  for (int j = 0; j < d; ++j)
    if (stats.lo[j] < 0.0 && stats.hi[j] - stats.lo[j] > 0.0)
      fill_cols.push_back(j);

  std::vector<SparseExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    SparseExample nx;
    nx.label = ex.label;
    if (fill_cols.empty()) {
      nx.features.reserve(ex.features.size());
      for (const auto& [j, v] : ex.features)
        nx.features.emplace_back(j, scale(j, v));
    } else {
      size_t fi = 0;  // merge explicit entries with materialized columns
      for (const auto& [j, v] : ex.features) {
        while (fi < fill_cols.size() && fill_cols[fi] < j) {
          nx.features.emplace_back(fill_cols[fi], scale(fill_cols[fi], 0.0));
          ++fi;
        }
        if (fi < fill_cols.size() && fill_cols[fi] == j) ++fi;
        nx.features.emplace_back(j, scale(j, v));
      }
      while (fi < fill_cols.size()) {
        nx.features.emplace_back(fill_cols[fi], scale(fill_cols[fi], 0.0));
        ++fi;
      }
    }
    out.push_back(std::move(nx));
  }
  return out;
}

std::vector<SparseExample> normalize_zero_one(
    const std::vector<SparseExample>& examples, int d) {
  return normalize_zero_one(examples, fit_zero_one(examples, d), d);
}

ValidationReport validate_metadata(const Dataset& ds,
                                   const ExpectedMetadata& expected) {
  ValidationReport rep;
  auto check = [&](const char* field, long expect, long actual) {
    if (expect != actual) {
      rep.pass = false;
      std::ostringstream os;
      os << field << " expected=" << expect << " actual=" << actual;
      rep.mismatches.push_back(os.str());
    }
  };
  check("n_train", expected.n_train, static_cast<long>(ds.train.size()));
  check("n_test", expected.n_test, static_cast<long>(ds.test.size()));
  check("d", expected.d, ds.d);
  return rep;
}

}  // namespace trishbb::data
