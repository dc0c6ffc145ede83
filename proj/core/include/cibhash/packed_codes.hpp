#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cibhash/types.hpp"

namespace cibhash {

/// Bit-packed hash codes. Bit d of a row lives in word d / 64 at bit position
/// d % 64; bits past `bits()` in the last word are always zero.
class PackedCodes {
 public:
  static constexpr std::size_t kMaxBits = 4096;

  PackedCodes() = default;
  PackedCodes(std::size_t rows, std::size_t bits);
  /// Adopts raw words; throws if the size is wrong or a padding bit is set.
  PackedCodes(std::size_t rows, std::size_t bits, std::vector<std::uint64_t> words);

  std::size_t size() const noexcept { return rows_; }
  std::size_t bits() const noexcept { return bits_; }
  std::size_t words_per_row() const noexcept { return words_per_row_; }

  std::span<const std::uint64_t> row(std::size_t i) const {
    return {words_.data() + i * words_per_row_, words_per_row_};
  }
  std::span<std::uint64_t> row(std::size_t i) {
    return {words_.data() + i * words_per_row_, words_per_row_};
  }
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  bool bit(std::size_t i, std::size_t d) const {
    return (words_[i * words_per_row_ + d / 64] >> (d % 64)) & 1U;
  }
  void set_bit(std::size_t i, std::size_t d, bool value);

  bool operator==(const PackedCodes&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace cibhash
