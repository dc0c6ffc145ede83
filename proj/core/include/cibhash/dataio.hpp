#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cibhash/packed_codes.hpp"
#include "cibhash/types.hpp"

namespace cibhash {

/// Per-item class ids. Each list is sorted and free of duplicates; an empty
/// list means the item is unlabeled.
using LabelSet = std::vector<std::vector<std::uint32_t>>;

struct FeatureDataset {
  MatrixF features;  // one item per row
  LabelSet labels;   // labels.size() == features.rows()

  std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
};

/// Throws unless the dataset has at least one row and column, every value is
/// finite and every label list is sorted and unique.
void validate(const FeatureDataset& dataset);

/// Builds a dataset with one empty label list per row.
FeatureDataset unlabeled(MatrixF features);

// Binary formats, little-endian, each headed by a four-byte magic and a u32
// version:
//   features  "CIBF" v1  u64 rows, u32 cols, rows*cols f32 row-major
//   labels    "CIBL" v1  u64 rows, then per row u16 count + count*u32 ids
//   codes     "CIBC" v1  u64 rows, u32 bits, rows*ceil(bits/64) u64 words

/// Loads a feature file. Labels come back empty (one empty list per row).
FeatureDataset load_features(const std::filesystem::path& path);
void save_features(const FeatureDataset& dataset, const std::filesystem::path& path);

LabelSet load_labels(const std::filesystem::path& path);
void save_labels(const LabelSet& labels, const std::filesystem::path& path);

/// Feature file plus a label file with the same row count.
FeatureDataset load_dataset(const std::filesystem::path& features, const std::filesystem::path& labels);

PackedCodes load_codes(const std::filesystem::path& path);
void save_codes(const PackedCodes& codes, const std::filesystem::path& path);

/// Comma-separated numeric rows. When the first line is a header and its
/// last column is named "label", that column becomes a single class id.
FeatureDataset load_csv(const std::filesystem::path& path);

struct SyntheticSpec {
  std::size_t clusters = 10;
  std::size_t dim = 128;
  std::size_t per_cluster = 500;
  double separation = 6.0;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian clusters with unit within-cluster std. Cluster k sits at
/// separation * q_k where the q_k are random orthonormal directions (random
/// unit directions when clusters > dim), so centers are at least
/// `separation` apart. Item i belongs to cluster i / per_cluster.
FeatureDataset generate_synthetic(const SyntheticSpec& spec);

/// Rows with index % every == 0 become queries; the rest the database.
struct QuerySplit {
  FeatureDataset queries;
  FeatureDataset database;
};
QuerySplit split_every(const FeatureDataset& dataset, std::size_t every);

}  // namespace cibhash
