#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/eval/report.hpp"
#include "contracate/scm/dataset.hpp"

namespace contracate::io {

/// Column layout of a tabular dataset.
struct TabularSchema {
  std::vector<std::string> covariates;
  std::vector<std::string> treatments;
  std::string outcome = "y";
  /// Latent tags; either both empty or both populated.
  std::vector<std::string> causal_latents;
  std::vector<std::string> noncausal_latents;
  /// Column holding "train"/"eval"; when absent the split is derived from a seed.
  std::optional<std::string> split_column;

  bool has_latents() const { return !causal_latents.empty(); }

  void validate() const {
    if (covariates.empty()) throw SchemaError("schema: no covariate columns");
    if (treatments.empty()) throw SchemaError("schema: no treatment columns");
    if (outcome.empty()) throw SchemaError("schema: no outcome column");
    if (causal_latents.empty() != noncausal_latents.empty()) {
      throw SchemaError("schema: causal and non-causal latent columns must be given together");
    }
    std::set<std::string> seen;
    auto add = [&](const std::string& c) {
      if (!seen.insert(c).second) throw SchemaError("schema: column '" + c + "' is listed more than once");
    };
    for (const auto& c : covariates) add(c);
    for (const auto& c : treatments) add(c);
    add(outcome);
    for (const auto& c : causal_latents) add(c);
    for (const auto& c : noncausal_latents) add(c);
    if (split_column) add(*split_column);
  }

  /// x0.., t0.., y, tc0.., tnc0.., split for the given dimensions.
  static TabularSchema standard(std::size_t dim_x, std::size_t dim_t, std::size_t dim_causal = 0,
                                std::size_t dim_noncausal = 0, bool with_split = true) {
    TabularSchema s;
    for (std::size_t i = 0; i < dim_x; ++i) s.covariates.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < dim_t; ++i) s.treatments.push_back("t" + std::to_string(i));
    for (std::size_t i = 0; i < dim_causal; ++i) s.causal_latents.push_back("tc" + std::to_string(i));
    for (std::size_t i = 0; i < dim_noncausal; ++i) s.noncausal_latents.push_back("tnc" + std::to_string(i));
    if (with_split) s.split_column = "split";
    return s;
  }

  static TabularSchema for_dataset(const scm::Dataset& ds) {
    std::size_t m = 0, d = 0;
    if (ds.has_latents()) {
      m = static_cast<std::size_t>(ds.samples.front().t_causal->size());
      d = static_cast<std::size_t>(ds.samples.front().t_noncausal->size());
    }
    return standard(ds.dim_x(), ds.dim_t(), m, d, !ds.split.empty());
  }

  /// Recognizes the standard names in a header (x<i>, t<i>, tc<i>, tnc<i>,
  /// y, split).
  static TabularSchema infer(const std::vector<std::string>& header) {
    auto indexed = [](const std::string& name, std::string_view prefix) {
      if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
      for (std::size_t i = prefix.size(); i < name.size(); ++i)
        if (name[i] < '0' || name[i] > '9') return false;
      return true;
    };
    TabularSchema s;
    bool outcome = false;
    for (const auto& h : header) {
      if (indexed(h, "tnc")) s.noncausal_latents.push_back(h);
      else if (indexed(h, "tc")) s.causal_latents.push_back(h);
      else if (indexed(h, "t")) s.treatments.push_back(h);
      else if (indexed(h, "x")) s.covariates.push_back(h);
      else if (h == "y") outcome = true;
      else if (h == "split") s.split_column = h;
    }
    if (!outcome) throw SchemaError("cannot infer schema: no 'y' column");
    s.validate();
    return s;
  }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    std::size_t b = 0;
    while (b < c.size() && c[b] == ' ') ++b;
    c.erase(0, b);
  }
  return out;
}

inline double parse_real(const std::string& cell, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("non-numeric cell '" + cell + "'", row, col);
  }
  return v;
}

}  // namespace detail

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes every numeric cell with 17 significant digits, which round-trips
/// 64-bit doubles exactly.
inline void save_csv(const scm::Dataset& ds, std::ostream& os, const TabularSchema& schema) {
  schema.validate();
  if (schema.covariates.size() != ds.dim_x() || schema.treatments.size() != ds.dim_t()) {
    throw SchemaError("save_csv: schema widths do not match the dataset");
  }
  if (schema.has_latents() && !ds.has_latents()) throw SchemaError("save_csv: schema has latent columns, data has none");
  if (schema.split_column && ds.split.size() != ds.size()) throw SchemaError("save_csv: dataset has no split");

  bool first = true;
  auto head = [&](const std::string& c) {
    os << (first ? "" : ",") << c;
    first = false;
  };
  for (const auto& c : schema.covariates) head(c);
  for (const auto& c : schema.treatments) head(c);
  head(schema.outcome);
  for (const auto& c : schema.causal_latents) head(c);
  for (const auto& c : schema.noncausal_latents) head(c);
  if (schema.split_column) head(*schema.split_column);
  os << '\n';

  using eval::format_real;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples[i];
    std::string line;
    for (auto v : s.x) line += format_real(v) + ",";
    for (auto v : s.t) line += format_real(v) + ",";
    line += format_real(s.y);
    if (schema.has_latents()) {
      if (static_cast<std::size_t>(s.t_causal->size()) != schema.causal_latents.size() ||
          static_cast<std::size_t>(s.t_noncausal->size()) != schema.noncausal_latents.size()) {
        throw SchemaError("save_csv: latent widths do not match the schema");
      }
      for (auto v : *s.t_causal) line += "," + format_real(v);
      for (auto v : *s.t_noncausal) line += "," + format_real(v);
    }
    if (schema.split_column) line += ds.split[i] == scm::Split::Train ? ",train" : ",eval";
    os << line << '\n';
  }
}

inline void save_csv(const scm::Dataset& ds, const std::string& path, const TabularSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  save_csv(ds, out, schema);
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline void save_csv(const scm::Dataset& ds, const std::string& path) {
  save_csv(ds, path, TabularSchema::for_dataset(ds));
}

struct LoadOptions {
  /// Used when the schema has no split column.
  std::uint64_t split_seed = 0;
  double train_fraction = 0.7;
};

/// Parses CSV text. Row numbers in errors count the header as row 1;
/// columns are 1-based.
inline scm::Dataset parse_csv(const std::string& text, const TabularSchema& schema, const std::string& source,
                              const LoadOptions& opts = {}) {
  schema.validate();
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(source + ": empty file (no header)");
  const auto header = detail::split_line(line);

  auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError(source + ": missing column '" + name + "'");
  };
  auto find_all = [&](const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const auto& n : names) idx.push_back(find(n));
    return idx;
  };
  const auto cx = find_all(schema.covariates);
  const auto ct = find_all(schema.treatments);
  const auto cy = find(schema.outcome);
  const auto cc = find_all(schema.causal_latents);
  const auto cn = find_all(schema.noncausal_latents);
  const std::optional<std::size_t> cs = schema.split_column ? std::optional(find(*schema.split_column)) : std::nullopt;

  scm::Dataset ds;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(source + ": expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       row, cells.size() + 1);
    }
    auto read = [&](const std::vector<std::size_t>& cols) {
      scm::Vector v(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) v[static_cast<Eigen::Index>(k)] = detail::parse_real(cells[cols[k]], row, cols[k] + 1);
      return v;
    };
    scm::Sample s;
    s.x = read(cx);
    s.t = read(ct);
    s.y = detail::parse_real(cells[cy], row, cy + 1);
    if (schema.has_latents()) {
      s.t_causal = read(cc);
      s.t_noncausal = read(cn);
    }
    if (cs) {
      const auto& tag = cells[*cs];
      if (tag == "train") ds.split.push_back(scm::Split::Train);
      else if (tag == "eval") ds.split.push_back(scm::Split::Eval);
      else throw ParseError(source + ": split must be 'train' or 'eval', got '" + tag + "'", row, *cs + 1);
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.empty()) throw DataError(source + ": no data rows");
  if (!cs) ds.split = scm::make_split(ds.size(), opts.train_fraction, opts.split_seed);
  ds.provenance = scm::ExternalProvenance{source, fnv1a(text)};
  return ds;
}

inline scm::Dataset load_csv(const std::string& path, const TabularSchema& schema, const LoadOptions& opts = {}) {
  return parse_csv(read_file(path), schema, path, opts);
}

/// Loads a file written with the standard column names.
inline scm::Dataset load_csv(const std::string& path, const LoadOptions& opts = {}) {
  const std::string text = read_file(path);
  const auto eol = text.find('\n');
  const TabularSchema schema = TabularSchema::infer(detail::split_line(text.substr(0, eol)));
  return parse_csv(text, schema, path, opts);
}

}  // namespace contracate::io
