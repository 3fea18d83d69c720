#pragma once

#include <Eigen/Core>
#include <charconv>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polyfm/common.hpp"

namespace polyfm {

// Non-owning view of one sample: feature indices (strictly increasing,
// 0-based) and the matching nonzero values.
struct SampleView {
  std::span<const Index> indices;
  std::span<const double> values;

  Index size() const { return static_cast<Index>(indices.size()); }
};

// Owning counterpart of SampleView, used when a sample is built on the fly.
struct Sample {
  std::vector<Index> indices;
  std::vector<double> values;

  SampleView view() const { return {indices, values}; }
};

// Sparse design matrix plus targets. Stored column-major (the coordinate
// descent solvers sweep features and need all samples touching a feature);
// row views are materialized once at construction for prediction.
class SparseDataset {
 public:
  SparseDataset() = default;

  static SparseDataset from_rows(const std::vector<Sample>& rows,
                                 const std::vector<double>& targets,
                                 Index n_features) {
    if (rows.size() != targets.size())
      throw DimensionError("from_rows: " + std::to_string(rows.size()) +
                           " rows but " + std::to_string(targets.size()) +
                           " targets");
    SparseDataset ds;
    ds.n_samples_ = static_cast<Index>(rows.size());
    ds.n_features_ = n_features;
    ds.targets_ = Eigen::Map<const Eigen::VectorXd>(targets.data(),
                                                    targets.size());
    ds.row_ptr_.assign(1, 0);
    for (Index i = 0; i < ds.n_samples_; ++i) {
      const Sample& r = rows[i];
      if (r.indices.size() != r.values.size())
        throw DimensionError("from_rows: index/value length mismatch in row " +
                             std::to_string(i));
      Index prev = -1;
      for (std::size_t t = 0; t < r.indices.size(); ++t) {
        Index j = r.indices[t];
        if (j <= prev)
          throw DimensionError(
              "from_rows: feature indices not strictly increasing in row " +
              std::to_string(i));
        prev = j;
        if (j < 0 || j >= n_features)
          throw DimensionError("from_rows: feature index " +
                               std::to_string(j) + " out of range in row " +
                               std::to_string(i));
        if (r.values[t] == 0.0) continue;
        ds.row_idx_.push_back(j);
        ds.row_val_.push_back(r.values[t]);
      }
      ds.row_ptr_.push_back(static_cast<Index>(ds.row_idx_.size()));
    }
    ds.build_columns();
    return ds;
  }

  Index n_samples() const { return n_samples_; }
  Index n_features() const { return n_features_; }
  Index nnz() const { return static_cast<Index>(row_val_.size()); }

  double target(Index i) const { return targets_[i]; }
  const Eigen::VectorXd& targets() const { return targets_; }

  SampleView row(Index i) const {
    const Index b = row_ptr_[i], e = row_ptr_[i + 1];
    return {std::span<const Index>(row_idx_.data() + b, e - b),
            std::span<const double>(row_val_.data() + b, e - b)};
  }

  // Samples with a nonzero in feature j, and those values.
  std::span<const Index> col_rows(Index j) const {
    const Index b = col_ptr_[j], e = col_ptr_[j + 1];
    return {col_row_.data() + b, static_cast<std::size_t>(e - b)};
  }
  std::span<const double> col_values(Index j) const {
    const Index b = col_ptr_[j], e = col_ptr_[j + 1];
    return {col_val_.data() + b, static_cast<std::size_t>(e - b)};
  }

 private:
  void build_columns() {
    col_ptr_.assign(n_features_ + 1, 0);
    for (Index j : row_idx_) ++col_ptr_[j + 1];
    for (Index j = 0; j < n_features_; ++j) col_ptr_[j + 1] += col_ptr_[j];
    col_row_.resize(row_idx_.size());
    col_val_.resize(row_val_.size());
    std::vector<Index> cursor(col_ptr_.begin(), col_ptr_.end() - 1);
    for (Index i = 0; i < n_samples_; ++i) {
      for (Index t = row_ptr_[i]; t < row_ptr_[i + 1]; ++t) {
        const Index j = row_idx_[t];
        col_row_[cursor[j]] = i;
        col_val_[cursor[j]] = row_val_[t];
        ++cursor[j];
      }
    }
  }

  Index n_samples_ = 0;
  Index n_features_ = 0;
  std::vector<Index> row_ptr_{0}, row_idx_;
  std::vector<double> row_val_;
  std::vector<Index> col_ptr_{0}, col_row_;
  std::vector<double> col_val_;
  Eigen::VectorXd targets_;
};

namespace detail {

inline double parse_real(std::string_view tok, std::size_t line,
                         const char* what) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(std::string("bad ") + what + " '" + std::string(tok) +
                         "'",
                     line);
  return v;
}

}  // namespace detail

// Reads svmlight/libsvm text: one sample per line,
// "<target> <index>:<value> ...", indices 1-based and strictly increasing.
// Explicit zeros are dropped from storage but still count toward the
// inferred dimension. Text after '#' is a comment.
inline SparseDataset load_svmlight(const std::string& path,
                                   Index n_features_override = 0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");

  std::vector<Sample> rows;
  std::vector<double> targets;
  Index max_index = 0;  // 0-based max + 1, i.e. inferred dimension
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (auto hash = sv.find('#'); hash != std::string_view::npos)
      sv = sv.substr(0, hash);
    // tokenize on blanks
    std::vector<std::string_view> toks;
    std::size_t pos = 0;
    while (pos < sv.size()) {
      while (pos < sv.size() && (sv[pos] == ' ' || sv[pos] == '\t')) ++pos;
      std::size_t start = pos;
      while (pos < sv.size() && sv[pos] != ' ' && sv[pos] != '\t') ++pos;
      if (pos > start) toks.push_back(sv.substr(start, pos - start));
    }
    if (toks.empty()) continue;

    targets.push_back(detail::parse_real(toks[0], lineno, "target"));
    Sample row;
    Index prev = 0;  // 1-based; entries must satisfy idx > prev
    for (std::size_t t = 1; t < toks.size(); ++t) {
      auto colon = toks[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError("expected index:value, got '" + std::string(toks[t]) +
                             "'",
                         lineno);
      std::string_view idx_tok = toks[t].substr(0, colon);
      Index idx = 0;
      auto res =
          std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
      if (res.ec != std::errc() || res.ptr != idx_tok.data() + idx_tok.size())
        throw ParseError("bad feature index '" + std::string(idx_tok) + "'",
                         lineno);
      if (idx < 1)
        throw ParseError("feature index " + std::to_string(idx) +
                             " out of range (indices are 1-based)",
                         lineno);
      if (idx <= prev)
        throw ParseError("feature indices not strictly increasing", lineno);
      prev = idx;
      double val =
          detail::parse_real(toks[t].substr(colon + 1), lineno, "value");
      max_index = std::max(max_index, idx);
      if (val == 0.0) continue;
      row.indices.push_back(idx - 1);
      row.values.push_back(val);
    }
    rows.push_back(std::move(row));
  }

  Index d = max_index;
  if (n_features_override > 0) {
    if (n_features_override < max_index)
      throw DimensionError("n_features override " +
                           std::to_string(n_features_override) +
                           " is smaller than max index " +
                           std::to_string(max_index) + " seen in '" + path +
                           "'");
    d = n_features_override;
  }
  return SparseDataset::from_rows(rows, targets, d);
}

// Writes svmlight text with 1-based indices. Values use the shortest decimal
// form that round-trips, so save followed by load reproduces the dataset
// exactly.
inline void save_svmlight(const SparseDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (Index i = 0; i < ds.n_samples(); ++i) {
    out << format_double(ds.target(i));
    SampleView r = ds.row(i);
    for (Index t = 0; t < r.size(); ++t)
      out << ' ' << (r.indices[t] + 1) << ':' << format_double(r.values[t]);
    out << '\n';
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

// Prepends `count` all-ones features; original feature j becomes j + count.
// Used to turn homogeneous models into inhomogeneous ones.
inline SparseDataset augment(const SparseDataset& ds, Index count) {
  if (count < 0) throw ConfigError("augment count must be >= 0");
  std::vector<Sample> rows(ds.n_samples());
  std::vector<double> targets(ds.n_samples());
  for (Index i = 0; i < ds.n_samples(); ++i) {
    SampleView r = ds.row(i);
    Sample& out = rows[i];
    out.indices.reserve(count + r.size());
    out.values.reserve(count + r.size());
    for (Index c = 0; c < count; ++c) {
      out.indices.push_back(c);
      out.values.push_back(1.0);
    }
    for (Index t = 0; t < r.size(); ++t) {
      out.indices.push_back(r.indices[t] + count);
      out.values.push_back(r.values[t]);
    }
    targets[i] = ds.target(i);
  }
  return SparseDataset::from_rows(rows, targets, ds.n_features() + count);
}

// Keeps the given samples (in the given order). Feature dimension is
// unchanged.
inline SparseDataset subset(const SparseDataset& ds,
                            const std::vector<Index>& sample_ids) {
  std::vector<Sample> rows;
  std::vector<double> targets;
  rows.reserve(sample_ids.size());
  targets.reserve(sample_ids.size());
  for (Index i : sample_ids) {
    if (i < 0 || i >= ds.n_samples())
      throw DimensionError("subset: sample id " + std::to_string(i) +
                           " out of range");
    SampleView r = ds.row(i);
    rows.push_back(Sample{{r.indices.begin(), r.indices.end()},
                          {r.values.begin(), r.values.end()}});
    targets.push_back(ds.target(i));
  }
  return SparseDataset::from_rows(rows, targets, ds.n_features());
}

// One-hot encoding of a (user, item) pair over n_users + n_items features:
// ones at positions user and n_users + item.
inline Sample one_hot_pair(Index user, Index item, Index n_users,
                           Index n_items) {
  if (user < 0 || user >= n_users)
    throw DimensionError("one_hot_pair: user " + std::to_string(user) +
                         " out of range [0, " + std::to_string(n_users) + ")");
  if (item < 0 || item >= n_items)
    throw DimensionError("one_hot_pair: item " + std::to_string(item) +
                         " out of range [0, " + std::to_string(n_items) + ")");
  return Sample{{user, n_users + item}, {1.0, 1.0}};
}

}  // namespace polyfm
