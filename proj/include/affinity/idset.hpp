#ifndef AFFINITY_IDSET_HPP_
#define AFFINITY_IDSET_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace affinity {

using UserId = std::uint64_t;

/// Immutable sorted set of 64-bit user IDs.
///
/// IDs are split into a 48-bit chunk key and a 16-bit low part. Each chunk
/// stores its low parts either as a sorted uint16 array (up to 4096 values)
/// or as a 65536-bit bitmap. All chunk payloads live in two shared pools, so
/// a set costs two heap blocks regardless of how many chunks it has.
///
/// The representation is canonical: a chunk is a bitmap iff it holds more
/// than kArrayMax values. Two sets are equal iff their pools are equal.
class IdSet {
 public:
  static constexpr std::uint32_t kArrayMax = 4096;
  static constexpr std::uint32_t kBitmapWords = 1024;

  class const_iterator;

  IdSet() = default;

  /// Distinct values of `ids`, in any order, with duplicates allowed.
  static IdSet build(std::span<const UserId> ids);
  static IdSet build(std::vector<UserId>&& ids);

  /// `ids` must be strictly ascending; throws std::invalid_argument otherwise.
  static IdSet from_sorted(std::span<const UserId> ids);

  std::uint64_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool contains(UserId id) const;

  std::vector<UserId> to_vector() const;

  /// Calls f(UserId) for every element in ascending order.
  template <class F>
  void for_each(F&& f) const;

  const_iterator begin() const;
  const_iterator end() const;

  std::size_t chunk_count() const noexcept { return keys_.size(); }
  /// Heap bytes held by the set (excluding the object itself).
  std::size_t memory_bytes() const noexcept;

  friend bool operator==(const IdSet& a, const IdSet& b) = default;

 private:
  struct Chunk {
    std::uint32_t offset;       // into arrays_ or bitmaps_ (in words)
    std::uint32_t cardinality;  // 1..65536
    friend bool operator==(const Chunk&, const Chunk&) = default;
  };

  bool is_bitmap(std::size_t i) const noexcept {
    return chunks_[i].cardinality > kArrayMax;
  }
  std::span<const std::uint16_t> array_at(std::size_t i) const noexcept {
    return {arrays_.data() + chunks_[i].offset, chunks_[i].cardinality};
  }
  std::span<const std::uint64_t> bitmap_at(std::size_t i) const noexcept {
    return {bitmaps_.data() + chunks_[i].offset, kBitmapWords};
  }

  std::vector<std::uint64_t> keys_;
  std::vector<Chunk> chunks_;
  std::vector<std::uint16_t> arrays_;
  std::vector<std::uint64_t> bitmaps_;
  std::uint64_t size_ = 0;

  friend class IdSetWriter;
  friend struct IdSetOps;
};

class IdSet::const_iterator {
 public:
  using iterator_category = std::forward_iterator_tag;
  using value_type = UserId;
  using difference_type = std::ptrdiff_t;
  using pointer = const UserId*;
  using reference = UserId;

  const_iterator() = default;

  UserId operator*() const noexcept { return value_; }
  const_iterator& operator++();
  const_iterator operator++(int) {
    auto tmp = *this;
    ++*this;
    return tmp;
  }
  friend bool operator==(const const_iterator& a, const const_iterator& b) {
    return a.chunk_ == b.chunk_ && a.pos_ == b.pos_;
  }

 private:
  friend class IdSet;
  const_iterator(const IdSet* set, std::size_t chunk) : set_(set), chunk_(chunk) { settle(); }
  void settle();

  const IdSet* set_ = nullptr;
  std::size_t chunk_ = 0;
  std::uint32_t pos_ = 0;  // array index, or bit index within a bitmap chunk
  UserId value_ = 0;
};

template <class F>
void IdSet::for_each(F&& f) const {
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    const UserId high = keys_[i] << 16;
    if (!is_bitmap(i)) {
      for (std::uint16_t low : array_at(i)) f(high | low);
    } else {
      auto words = bitmap_at(i);
      for (std::uint32_t w = 0; w < kBitmapWords; ++w) {
        std::uint64_t bits = words[w];
        while (bits != 0) {
          const int t = std::countr_zero(bits);
          f(high | (UserId{w} << 6) | static_cast<UserId>(t));
          bits &= bits - 1;
        }
      }
    }
  }
}

// Set algebra. All results are fresh sets; inputs are never modified.
IdSet intersect(const IdSet& a, const IdSet& b);
IdSet unite(const IdSet& a, const IdSet& b);
IdSet difference(const IdSet& a, const IdSet& b);
std::uint64_t intersection_size(const IdSet& a, const IdSet& b);
IdSet unite_all(std::span<const IdSet* const> sets);

/// Number of sets containing each user, for users in at least one set.
class MembershipCounts {
 public:
  using Entry = std::pair<UserId, std::uint32_t>;

  explicit MembershipCounts(std::vector<Entry> entries) : entries_(std::move(entries)) {}

  std::size_t size() const noexcept { return entries_.size(); }
  /// 0 when the user is in no set.
  std::uint32_t count(UserId id) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  std::vector<Entry> entries_;  // ascending by UserId
};

/// Throws std::invalid_argument on an empty sequence (a league with no teams).
MembershipCounts multi_way_membership_counts(std::span<const IdSet* const> sets);

// IDS1 binary layout: "IDS1", u64 LE count, count u64 LE values ascending.
class IdsFormatError : public std::runtime_error {
 public:
  enum class Code { kBadMagic, kTruncated, kOrdering, kTrailingBytes };
  IdsFormatError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

std::vector<std::byte> encode_ids1(const IdSet& set);
void write_ids1(const IdSet& set, std::ostream& out);
IdSet decode_ids1(std::span<const std::byte> bytes);

}  // namespace affinity

#endif  // AFFINITY_IDSET_HPP_
