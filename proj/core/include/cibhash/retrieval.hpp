#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cibhash/binarizer.hpp"
#include "cibhash/dataio.hpp"
#include "cibhash/packed_codes.hpp"

namespace cibhash {

PackedCodes pack(const DeterministicCode& codes);
DeterministicCode unpack(const PackedCodes& codes);

/// Popcount of the XOR. Throws if the rows differ in length.
std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

struct Neighbor {
  std::uint32_t index = 0;
  std::uint32_t distance = 0;

  bool operator==(const Neighbor&) const = default;
};

/// Ascending distance, ties broken by ascending database index.
using RankedList = std::vector<Neighbor>;

/// Exact top-k by linear scan. k > db.size() returns every item.
RankedList topk(const PackedCodes& db, std::span<const std::uint64_t> query, std::size_t k);

/// topk for every query row; queries are spread over `threads` workers and
/// the result does not depend on the thread count.
std::vector<RankedList> topk_batch(const PackedCodes& db, const PackedCodes& queries, std::size_t k,
                                   std::size_t threads = 1);

enum class Relevance { single, multi };

Relevance parse_relevance(const std::string& name);
const char* to_string(Relevance r) noexcept;

/// single: first class ids equal; multi: label sets intersect. Empty label
/// lists are never relevant.
bool is_relevant(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b, Relevance mode);

/// Mean over queries of AP@N, where AP@N sums precision@k over the relevant
/// ranks k <= N and divides by the number of relevant items in the top N
/// (zero when none is retrieved).
double map_at_n(const PackedCodes& queries, const PackedCodes& db, const LabelSet& query_labels,
                const LabelSet& db_labels, std::size_t n, Relevance relevance, std::size_t threads = 1);

/// Mean over queries of |relevant in top N| / N.
double precision_at_n(const PackedCodes& queries, const PackedCodes& db, const LabelSet& query_labels,
                      const LabelSet& db_labels, std::size_t n, Relevance relevance, std::size_t threads = 1);

struct PRPoint {
  std::size_t radius = 0;
  double recall = 0.0;
  double precision = 0.0;
};

/// One point per Hamming radius r = 0..bits, built from the lookup set
/// {db items within distance r}, averaged over queries. An empty lookup set
/// counts as precision 1; a query without any relevant item counts as recall 1.
using PRCurve = std::vector<PRPoint>;

PRCurve pr_curve(const PackedCodes& queries, const PackedCodes& db, const LabelSet& query_labels,
                 const LabelSet& db_labels, Relevance relevance, std::size_t threads = 1);

}  // namespace cibhash
