#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace trishbb::data {

// One labeled sparse sample. Feature indices are 1-based on disk (LIBSVM
// convention) and converted to 0-based here, at the module boundary; they are
// strictly increasing within an example.
struct SparseExample {
  int label = 0;  // +1 or -1
  std::vector<std::pair<int, double>> features;
};

struct Dataset {
  std::string name;
  std::vector<SparseExample> train;
  std::vector<SparseExample> test;
  int d = 0;  // feature dimension shared by both splits
};

struct ParseOptions {
  // Accept label "0" and map it to -1. Off by default: silently training on
  // mislabeled data is worse than a parse error.
  bool zero_label_is_negative = false;
};

struct ParsedSplit {
  std::vector<SparseExample> examples;
  int d = 0;  // max 1-based index seen, raised to d_hint if that is larger
};

// Parses `<label> <idx>:<val> ...` lines. Throws std::runtime_error with the
// offending line number on malformed input, index <= 0, non-increasing
// indices, or a label outside {+1,-1} (see ParseOptions for "0").
ParsedSplit parse_libsvm(std::istream& in, int d_hint = 0,
                         const ParseOptions& opts = {});
ParsedSplit parse_libsvm_file(const std::string& path, int d_hint = 0,
                              const ParseOptions& opts = {});

// Inverse of parsing, with enough digits that reparsing reproduces the exact
// (label, index, value) triples.
std::string to_libsvm_line(const SparseExample& ex);

// Loads both splits and unifies d = max(train, test, d_hint); a test split
// may use indices absent from the train split.
Dataset load_dataset(const std::string& name, const std::string& train_path,
                     const std::string& test_path, int d_hint = 0,
                     const ParseOptions& opts = {});

// Column-wise min/max of the training split under dense semantics: a feature
// absent from an example counts as 0, so a column's range includes 0 unless
// every example carries the feature explicitly.
struct NormStats {
  std::vector<double> lo, hi;
};

NormStats fit_zero_one(const std::vector<SparseExample>& train, int d);

// Rescales each stored value v to (v - lo)/(hi - lo); constant columns map
// to 0. Columns with lo < 0 shift implicit zeros to a nonzero value, in which
// case the missing entries are materialized to keep the dense semantics.
std::vector<SparseExample> normalize_zero_one(
    const std::vector<SparseExample>& examples, const NormStats& stats, int d);

// Convenience: fit on `examples` and apply to them in one step.
std::vector<SparseExample> normalize_zero_one(
    const std::vector<SparseExample>& examples, int d);

struct ExpectedMetadata {
  long n_train = 0;
  long n_test = 0;
  int d = 0;
};

struct ValidationReport {
  bool pass = true;
  // "field expected=X actual=Y" entries, one per mismatch
  std::vector<std::string> mismatches;
};

// Report-only comparison of loaded sizes against expectations.
ValidationReport validate_metadata(const Dataset& ds,
                                   const ExpectedMetadata& expected);

}  // namespace trishbb::data
