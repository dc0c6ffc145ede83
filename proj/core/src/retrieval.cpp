#include "cibhash/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>

#include "cibhash/parallel.hpp"

namespace cibhash {

PackedCodes::PackedCodes(std::size_t rows, std::size_t bits)
    : rows_(rows), bits_(bits), words_per_row_((bits + 63) / 64) {
  require(bits >= 1 && bits <= kMaxBits, "code width must be in [1, 4096]");
  words_.assign(rows_ * words_per_row_, 0);
}

PackedCodes::PackedCodes(std::size_t rows, std::size_t bits, std::vector<std::uint64_t> words)
    : PackedCodes(rows, bits) {
  require(words.size() == words_.size(), "packed word count does not match rows and bits");
  words_ = std::move(words);
  if (bits_ % 64 != 0) {
    const std::uint64_t pad_mask = ~((std::uint64_t{1} << (bits_ % 64)) - 1);
    for (std::size_t i = 0; i < rows_; ++i)
      require((words_[i * words_per_row_ + words_per_row_ - 1] & pad_mask) == 0, "padding bits must be zero");
  }
}

void PackedCodes::set_bit(std::size_t i, std::size_t d, bool value) {
  require(d < bits_, "bit index out of range");
  std::uint64_t& w = words_[i * words_per_row_ + d / 64];
  const std::uint64_t mask = std::uint64_t{1} << (d % 64);
  w = value ? (w | mask) : (w & ~mask);
}

PackedCodes pack(const DeterministicCode& codes) {
  const auto rows = static_cast<std::size_t>(codes.bits.rows());
  const auto bits = static_cast<std::size_t>(codes.bits.cols());
  PackedCodes out(rows, bits);
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = out.row(i);
    for (std::size_t d = 0; d < bits; ++d)
      if (codes.bits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) != 0)
        row[d / 64] |= std::uint64_t{1} << (d % 64);
  }
  return out;
}

DeterministicCode unpack(const PackedCodes& codes) {
  DeterministicCode out{BitMatrix(static_cast<Eigen::Index>(codes.size()), static_cast<Eigen::Index>(codes.bits()))};
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (std::size_t d = 0; d < codes.bits(); ++d)
      out.bits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = codes.bit(i, d) ? 1 : 0;
  return out;
}

std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  require(a.size() == b.size(), "hamming: code widths differ");
  std::size_t dist = 0;
  for (std::size_t w = 0; w < a.size(); ++w) dist += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
  return dist;
}

namespace {

template <std::size_t Words>
void scan_fixed(const PackedCodes& db, std::span<const std::uint64_t> query, std::vector<std::uint32_t>& dist) {
  const std::uint64_t* base = db.words().data();
  std::uint64_t q[Words];
  std::copy_n(query.begin(), Words, q);
  for (std::size_t i = 0; i < db.size(); ++i) {
    std::uint32_t acc = 0;
    for (std::size_t w = 0; w < Words; ++w) acc += static_cast<std::uint32_t>(std::popcount(base[i * Words + w] ^ q[w]));
    dist[i] = acc;
  }
}

void scan_distances(const PackedCodes& db, std::span<const std::uint64_t> query, std::vector<std::uint32_t>& dist) {
  dist.resize(db.size());
  switch (db.words_per_row()) {
    case 1: scan_fixed<1>(db, query, dist); return;
    case 2: scan_fixed<2>(db, query, dist); return;
    case 4: scan_fixed<4>(db, query, dist); return;
    default:
      for (std::size_t i = 0; i < db.size(); ++i) dist[i] = static_cast<std::uint32_t>(hamming(db.row(i), query));
  }
}

/// Selects the k best by counting distances: every distance is <= bits, so a
/// histogram finds the cut-off radius in one pass, and a second pass collects
/// candidates in index order, which is already the tie order.
RankedList select_topk(const std::vector<std::uint32_t>& dist, std::size_t bits, std::size_t k) {
  k = std::min(k, dist.size());
  std::vector<std::size_t> hist(bits + 2, 0);
  for (std::uint32_t d : dist) ++hist[d];
  std::size_t cutoff = 0;
  std::size_t below = 0;  // items with distance < cutoff
  while (below + hist[cutoff] < k) below += hist[cutoff++];
  std::size_t take_at_cutoff = k - below;

  RankedList out;
  out.reserve(k);
  for (std::size_t i = 0; i < dist.size() && out.size() < k; ++i) {
    const std::uint32_t d = dist[i];
    if (d < cutoff) {
      out.push_back({static_cast<std::uint32_t>(i), d});
    } else if (d == cutoff && take_at_cutoff > 0) {
      out.push_back({static_cast<std::uint32_t>(i), d});
      --take_at_cutoff;
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
  return out;
}

void check_compatible(const PackedCodes& db, std::size_t query_words, std::size_t k) {
  require(k >= 1, "k must be at least 1");
  require(query_words == db.words_per_row(), "query width does not match the database");
  require(db.size() <= std::numeric_limits<std::uint32_t>::max(), "database too large for 32-bit indices");
}

}  // namespace

RankedList topk(const PackedCodes& db, std::span<const std::uint64_t> query, std::size_t k) {
  check_compatible(db, query.size(), k);
  std::vector<std::uint32_t> dist;
  scan_distances(db, query, dist);
  return select_topk(dist, db.bits(), k);
}

std::vector<RankedList> topk_batch(const PackedCodes& db, const PackedCodes& queries, std::size_t k,
                                   std::size_t threads) {
  require(queries.bits() == db.bits(), "query width does not match the database");
  check_compatible(db, queries.words_per_row(), k);
  std::vector<RankedList> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> dist;
    for (std::size_t q = begin; q < end; ++q) {
      scan_distances(db, queries.row(q), dist);
      out[q] = select_topk(dist, db.bits(), k);
    }
  });
  return out;
}

Relevance parse_relevance(const std::string& name) {
  if (name == "single") return Relevance::single;
  if (name == "multi") return Relevance::multi;
  fail(ErrorCode::invalid_argument, "unknown relevance mode '" + name + "'");
}

const char* to_string(Relevance r) noexcept { return r == Relevance::single ? "single" : "multi"; }

bool is_relevant(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b, Relevance mode) {
  if (a.empty() || b.empty()) return false;
  if (mode == Relevance::single) return a.front() == b.front();
  // both sorted
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i; else ++j;
  }
  return false;
}

namespace {

void check_eval_inputs(const PackedCodes& queries, const PackedCodes& db, const LabelSet& query_labels,
                       const LabelSet& db_labels) {
  require(queries.bits() == db.bits(), "query and database code widths differ");
  require(query_labels.size() == queries.size(), "query label count does not match query codes");
  require(db_labels.size() == db.size(), "database label count does not match database codes");
  require(queries.size() >= 1, "need at least one query");
}

/// Per-query scores averaged in query order.
template <typename Score>
double mean_over_queries(std::size_t count, std::size_t threads, Score&& score) {
  std::vector<double> per_query(count);
  parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) per_query[q] = score(q);
  });
  double sum = 0.0;
  for (double v : per_query) sum += v;
  return sum / static_cast<double>(count);
}

}  // namespace

double map_at_n(const PackedCodes& queries, const PackedCodes& db, const LabelSet& query_labels,
                const LabelSet& db_labels, std::size_t n, Relevance relevance, std::size_t threads) {
  check_eval_inputs(queries, db, query_labels, db_labels);
  require(n >= 1, "N must be at least 1");
  return mean_over_queries(queries.size(), threads, [&](std::size_t q) {
    const RankedList ranked = topk(db, queries.row(q), n);
    double precision_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (is_relevant(query_labels[q], db_labels[ranked[r].index], relevance)) {
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    return hits == 0 ? 0.0 : precision_sum / static_cast<double>(hits);
  });
}

double precision_at_n(const PackedCodes& queries, const PackedCodes& db, const LabelSet& query_labels,
                      const LabelSet& db_labels, std::size_t n, Relevance relevance, std::size_t threads) {
  check_eval_inputs(queries, db, query_labels, db_labels);
  require(n >= 1, "N must be at least 1");
  return mean_over_queries(queries.size(), threads, [&](std::size_t q) {
    const RankedList ranked = topk(db, queries.row(q), n);
    std::size_t hits = 0;
    for (const Neighbor& nb : ranked)
      if (is_relevant(query_labels[q], db_labels[nb.index], relevance)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(n);
  });
}

PRCurve pr_curve(const PackedCodes& queries, const PackedCodes& db, const LabelSet& query_labels,
                 const LabelSet& db_labels, Relevance relevance, std::size_t threads) {
  check_eval_inputs(queries, db, query_labels, db_labels);
  const std::size_t bits = db.bits();
  // per query: cumulative (retrieved, relevant-retrieved) counts by radius
  std::vector<std::vector<double>> recall(queries.size(), std::vector<double>(bits + 1));
  std::vector<std::vector<double>> precision(queries.size(), std::vector<double>(bits + 1));
  parallel_for(queries.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> dist;
    std::vector<std::size_t> all(bits + 1);
    std::vector<std::size_t> rel(bits + 1);
    for (std::size_t q = begin; q < end; ++q) {
      scan_distances(db, queries.row(q), dist);
      std::fill(all.begin(), all.end(), 0);
      std::fill(rel.begin(), rel.end(), 0);
      std::size_t total_rel = 0;
      for (std::size_t i = 0; i < dist.size(); ++i) {
        ++all[dist[i]];
        if (is_relevant(query_labels[q], db_labels[i], relevance)) {
          ++rel[dist[i]];
          ++total_rel;
        }
      }
      std::size_t cum_all = 0;
      std::size_t cum_rel = 0;
      for (std::size_t r = 0; r <= bits; ++r) {
        cum_all += all[r];
        cum_rel += rel[r];
        precision[q][r] = cum_all == 0 ? 1.0 : static_cast<double>(cum_rel) / static_cast<double>(cum_all);
        recall[q][r] = total_rel == 0 ? 1.0 : static_cast<double>(cum_rel) / static_cast<double>(total_rel);
      }
    }
  });
  PRCurve curve(bits + 1);
  for (std::size_t r = 0; r <= bits; ++r) {
    double rs = 0.0;
    double ps = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      rs += recall[q][r];
      ps += precision[q][r];
    }
    curve[r] = {r, rs / static_cast<double>(queries.size()), ps / static_cast<double>(queries.size())};
  }
  return curve;
}

}  // namespace cibhash
