#include "cibhash/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include "cibhash/random.hpp"
#include "binary_io.hpp"

namespace cibhash {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr std::uint32_t kVersion = 1;

void check_finite(const MatrixF& m, const std::string& where) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i]))
      fail(ErrorCode::non_finite, where + ": element " + std::to_string(i) + " is not finite");
  }
}

}  // namespace

void validate(const FeatureDataset& dataset) {
  if (dataset.features.rows() < 1 || dataset.features.cols() < 1)
    fail(ErrorCode::invalid_argument, "dataset must have at least one row and one column");
  check_finite(dataset.features, "dataset");
  if (dataset.labels.size() != dataset.size())
    fail(ErrorCode::invalid_argument, "label count does not match row count");
  for (const auto& list : dataset.labels) {
    if (std::adjacent_find(list.begin(), list.end(), std::greater_equal<>()) != list.end())
      fail(ErrorCode::invalid_argument, "label lists must be sorted and unique");
  }
}

FeatureDataset unlabeled(MatrixF features) {
  FeatureDataset ds;
  ds.labels.assign(static_cast<std::size_t>(features.rows()), {});
  ds.features = std::move(features);
  return ds;
}

FeatureDataset load_features(const std::filesystem::path& path) {
  ByteReader in(path);
  in.expect_magic("CIBF");
  in.expect_version(kVersion);
  const auto rows = in.get<std::uint64_t>();
  const auto cols = in.get<std::uint32_t>();
  if (rows == 0 || cols == 0) fail(ErrorCode::malformed, "'" + path.string() + "' has an empty shape");
  if (rows > std::numeric_limits<std::uint64_t>::max() / cols ||
      rows > static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max()))
    fail(ErrorCode::dimension_overflow, "'" + path.string() + "' declares too many elements");
  const std::uint64_t count = rows * cols;
  in.need_bytes(count, sizeof(float));
  MatrixF features(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.get_all(features.data(), count);
  in.expect_end();
  check_finite(features, path.string());
  return unlabeled(std::move(features));
}

void save_features(const FeatureDataset& dataset, const std::filesystem::path& path) {
  const MatrixF& f = dataset.features;
  ByteWriter out(path);
  out.magic("CIBF");
  out.put<std::uint32_t>(kVersion);
  out.put<std::uint64_t>(static_cast<std::uint64_t>(f.rows()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(f.cols()));
  out.put_all(f.data(), static_cast<std::size_t>(f.size()));
  out.finish();
}

LabelSet load_labels(const std::filesystem::path& path) {
  ByteReader in(path);
  in.expect_magic("CIBL");
  in.expect_version(kVersion);
  const auto rows = in.get<std::uint64_t>();
  // every row needs at least its two-byte count
  in.need_bytes(rows, sizeof(std::uint16_t));
  LabelSet labels(rows);
  for (auto& list : labels) {
    const auto count = in.get<std::uint16_t>();
    list.resize(count);
    in.get_all(list.data(), count);
    if (std::adjacent_find(list.begin(), list.end(), std::greater_equal<>()) != list.end())
      fail(ErrorCode::malformed, "'" + path.string() + "' has an unsorted label list");
  }
  in.expect_end();
  return labels;
}

void save_labels(const LabelSet& labels, const std::filesystem::path& path) {
  ByteWriter out(path);
  out.magic("CIBL");
  out.put<std::uint32_t>(kVersion);
  out.put<std::uint64_t>(labels.size());
  for (const auto& list : labels) {
    if (list.size() > std::numeric_limits<std::uint16_t>::max())
      fail(ErrorCode::dimension_overflow, "label list longer than 65535 entries");
    out.put<std::uint16_t>(static_cast<std::uint16_t>(list.size()));
    out.put_all(list.data(), list.size());
  }
  out.finish();
}

FeatureDataset load_dataset(const std::filesystem::path& features, const std::filesystem::path& labels) {
  FeatureDataset ds = load_features(features);
  ds.labels = load_labels(labels);
  if (ds.labels.size() != ds.size())
    fail(ErrorCode::malformed, "'" + labels.string() + "' has " + std::to_string(ds.labels.size()) +
                                   " rows, features have " + std::to_string(ds.size()));
  return ds;
}

PackedCodes load_codes(const std::filesystem::path& path) {
  ByteReader in(path);
  in.expect_magic("CIBC");
  in.expect_version(kVersion);
  const auto rows = in.get<std::uint64_t>();
  const auto bits = in.get<std::uint32_t>();
  if (bits == 0 || bits > PackedCodes::kMaxBits)
    fail(ErrorCode::malformed, "'" + path.string() + "' has unsupported bit width " + std::to_string(bits));
  const std::uint64_t per_row = (bits + 63) / 64;
  if (rows > std::numeric_limits<std::uint64_t>::max() / per_row)
    fail(ErrorCode::dimension_overflow, "'" + path.string() + "' declares too many codes");
  const std::uint64_t count = rows * per_row;
  in.need_bytes(count, sizeof(std::uint64_t));
  std::vector<std::uint64_t> words(count);
  in.get_all(words.data(), count);
  in.expect_end();
  try {
    return PackedCodes(rows, bits, std::move(words));
  } catch (const Error& e) {
    fail(ErrorCode::malformed, "'" + path.string() + "': " + e.what());
  }
}

void save_codes(const PackedCodes& codes, const std::filesystem::path& path) {
  ByteWriter out(path);
  out.magic("CIBC");
  out.put<std::uint32_t>(kVersion);
  out.put<std::uint64_t>(codes.size());
  out.put<std::uint32_t>(static_cast<std::uint32_t>(codes.bits()));
  out.put_all(codes.words().data(), codes.words().size());
  out.finish();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

FeatureDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i) numeric = numeric && parse_double(cells[i], values[i]);
    if (first && !numeric) {
      header = std::move(cells);
      first = false;
      continue;
    }
    first = false;
    if (!numeric) fail(ErrorCode::malformed, path.string() + ":" + std::to_string(line_no) + ": non-numeric cell");
    if (!rows.empty() && values.size() != rows.front().size())
      fail(ErrorCode::malformed, path.string() + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) fail(ErrorCode::malformed, "'" + path.string() + "' has no data rows");
  if (!header.empty() && header.size() != rows.front().size())
    fail(ErrorCode::malformed, "'" + path.string() + "' header width does not match rows");

  const bool has_label = !header.empty() && header.back() == "label";
  const std::size_t cols = rows.front().size() - (has_label ? 1 : 0);
  if (cols == 0) fail(ErrorCode::malformed, "'" + path.string() + "' has no feature columns");

  FeatureDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  ds.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<float>(rows[r][c]);
    if (has_label) {
      const double label = rows[r].back();
      if (label < 0 || label != std::floor(label) || label > std::numeric_limits<std::uint32_t>::max())
        fail(ErrorCode::malformed, "'" + path.string() + "' has an invalid label on row " + std::to_string(r));
      ds.labels[r] = {static_cast<std::uint32_t>(label)};
    }
  }
  check_finite(ds.features, path.string());
  return ds;
}

FeatureDataset generate_synthetic(const SyntheticSpec& spec) {
  require(spec.clusters >= 2, "synthetic spec needs at least 2 clusters");
  require(spec.per_cluster >= 2, "synthetic spec needs at least 2 items per cluster");
  require(spec.dim >= 1, "synthetic spec needs dim >= 1");
  require(spec.separation > 0, "synthetic spec needs separation > 0");

  RandomStream centers_rng(derive_seed(spec.seed, {0}));
  const auto dim = static_cast<Eigen::Index>(spec.dim);
  MatrixD centers(static_cast<Eigen::Index>(spec.clusters), dim);
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    RowVectorD v(dim);
    for (;;) {
      for (Eigen::Index j = 0; j < dim; ++j) v(j) = centers_rng.normal();
      // Gram-Schmidt against earlier centers while there is room left
      if (k < dim) {
        for (Eigen::Index prev = 0; prev < k; ++prev) {
          const RowVectorD q = centers.row(prev) / spec.separation;
          v -= v.dot(q) * q;
        }
      }
      const double norm = v.norm();
      if (norm > 1e-6) {
        v /= norm;
        break;
      }
    }
    centers.row(k) = spec.separation * v;
  }

  RandomStream noise_rng(derive_seed(spec.seed, {1}));
  const std::size_t n = spec.clusters * spec.per_cluster;
  FeatureDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), dim);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i / spec.per_cluster;
    for (Eigen::Index j = 0; j < dim; ++j)
      ds.features(static_cast<Eigen::Index>(i), j) =
          static_cast<float>(centers(static_cast<Eigen::Index>(k), j) + noise_rng.normal());
    ds.labels[i] = {static_cast<std::uint32_t>(k)};
  }
  return ds;
}

QuerySplit split_every(const FeatureDataset& dataset, std::size_t every) {
  require(every >= 2, "split stride must be at least 2");
  const std::size_t n = dataset.size();
  const std::size_t nq = (n + every - 1) / every;
  require(nq >= 1 && n - nq >= 1, "split leaves an empty side");
  QuerySplit split;
  split.queries.features.resize(static_cast<Eigen::Index>(nq), dataset.features.cols());
  split.database.features.resize(static_cast<Eigen::Index>(n - nq), dataset.features.cols());
  std::size_t qi = 0;
  std::size_t di = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = dataset.features.row(static_cast<Eigen::Index>(i));
    if (i % every == 0) {
      split.queries.features.row(static_cast<Eigen::Index>(qi++)) = row;
      split.queries.labels.push_back(dataset.labels[i]);
    } else {
      split.database.features.row(static_cast<Eigen::Index>(di++)) = row;
      split.database.labels.push_back(dataset.labels[i]);
    }
  }
  return split;
}

}  // namespace cibhash
