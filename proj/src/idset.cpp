#include "affinity/idset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <memory>
#include <ostream>

namespace affinity {

namespace {

constexpr std::uint32_t kWords = IdSet::kBitmapWords;

inline bool test_bit(std::span<const std::uint64_t> words, std::uint16_t low) {
  return (words[low >> 6] >> (low & 63)) & 1u;
}

inline std::uint32_t popcount_words(const std::uint64_t* words) {
  std::uint32_t n = 0;
  for (std::uint32_t w = 0; w < kWords; ++w) n += static_cast<std::uint32_t>(std::popcount(words[w]));
  return n;
}

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

// Appends chunks in ascending key order and keeps the representation canonical.
class IdSetWriter {
 public:
  void add_array(std::uint64_t key, std::span<const std::uint16_t> lows) {
    if (lows.empty()) return;
    if (lows.size() > IdSet::kArrayMax) {
      std::array<std::uint64_t, kWords> words{};
      for (std::uint16_t v : lows) words[v >> 6] |= std::uint64_t{1} << (v & 63);
      push_bitmap(key, words.data(), static_cast<std::uint32_t>(lows.size()));
      return;
    }
    set_.keys_.push_back(key);
    set_.chunks_.push_back({static_cast<std::uint32_t>(set_.arrays_.size()),
                            static_cast<std::uint32_t>(lows.size())});
    set_.arrays_.insert(set_.arrays_.end(), lows.begin(), lows.end());
    set_.size_ += lows.size();
  }

  void add_bitmap(std::uint64_t key, const std::uint64_t* words, std::uint32_t card) {
    if (card == 0) return;
    if (card <= IdSet::kArrayMax) {
      std::uint16_t buf[IdSet::kArrayMax];
      std::uint32_t n = 0;
      for (std::uint32_t w = 0; w < kWords; ++w) {
        std::uint64_t bits = words[w];
        while (bits != 0) {
          buf[n++] = static_cast<std::uint16_t>((w << 6) | std::countr_zero(bits));
          bits &= bits - 1;
        }
      }
      add_array(key, {buf, n});
      return;
    }
    push_bitmap(key, words, card);
  }

  void copy_chunk(const IdSet& src, std::size_t i) {
    if (src.is_bitmap(i)) {
      push_bitmap(src.keys_[i], src.bitmap_at(i).data(), src.chunks_[i].cardinality);
    } else {
      add_array(src.keys_[i], src.array_at(i));
    }
  }

  IdSet finish() && { return std::move(set_); }

 private:
  void push_bitmap(std::uint64_t key, const std::uint64_t* words, std::uint32_t card) {
    set_.keys_.push_back(key);
    set_.chunks_.push_back({static_cast<std::uint32_t>(set_.bitmaps_.size()), card});
    set_.bitmaps_.insert(set_.bitmaps_.end(), words, words + kWords);
    set_.size_ += card;
  }

  IdSet set_;
};

namespace {

// Feeds strictly ascending IDs into a writer, one chunk at a time.
class SortedAppender {
 public:
  void push(UserId v) {
    const std::uint64_t key = v >> 16;
    if (!lows_.empty() && key != key_) flush();
    key_ = key;
    lows_.push_back(static_cast<std::uint16_t>(v & 0xffffu));
  }
  IdSet finish() && {
    flush();
    return std::move(writer_).finish();
  }

 private:
  void flush() {
    writer_.add_array(key_, lows_);
    lows_.clear();
  }
  IdSetWriter writer_;
  std::uint64_t key_ = 0;
  std::vector<std::uint16_t> lows_;
};

}  // namespace

struct IdSetOps {
  using Words = std::array<std::uint64_t, kWords>;

  static void and_chunks(const IdSet& a, std::size_t i, const IdSet& b, std::size_t j,
                         IdSetWriter& out, std::vector<std::uint16_t>& scratch, Words& words) {
    const std::uint64_t key = a.keys_[i];
    const bool abm = a.is_bitmap(i);
    const bool bbm = b.is_bitmap(j);
    scratch.clear();
    if (!abm && !bbm) {
      auto x = a.array_at(i);
      auto y = b.array_at(j);
      if (x.size() > y.size()) std::swap(x, y);
      if (x.size() * 32 < y.size()) {
        auto it = y.begin();
        for (std::uint16_t v : x) {
          it = std::lower_bound(it, y.end(), v);
          if (it == y.end()) break;
          if (*it == v) scratch.push_back(v);
        }
      } else {
        std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(scratch));
      }
      out.add_array(key, scratch);
    } else if (abm != bbm) {
      auto arr = abm ? b.array_at(j) : a.array_at(i);
      auto bmp = abm ? a.bitmap_at(i) : b.bitmap_at(j);
      for (std::uint16_t v : arr)
        if (test_bit(bmp, v)) scratch.push_back(v);
      out.add_array(key, scratch);
    } else {
      auto x = a.bitmap_at(i);
      auto y = b.bitmap_at(j);
      for (std::uint32_t w = 0; w < kWords; ++w) words[w] = x[w] & y[w];
      out.add_bitmap(key, words.data(), popcount_words(words.data()));
    }
  }

  static std::uint64_t and_count(const IdSet& a, std::size_t i, const IdSet& b, std::size_t j) {
    const bool abm = a.is_bitmap(i);
    const bool bbm = b.is_bitmap(j);
    std::uint64_t n = 0;
    if (!abm && !bbm) {
      auto x = a.array_at(i);
      auto y = b.array_at(j);
      auto p = x.begin();
      auto q = y.begin();
      while (p != x.end() && q != y.end()) {
        if (*p < *q) {
          ++p;
        } else if (*q < *p) {
          ++q;
        } else {
          ++n, ++p, ++q;
        }
      }
    } else if (abm != bbm) {
      auto arr = abm ? b.array_at(j) : a.array_at(i);
      auto bmp = abm ? a.bitmap_at(i) : b.bitmap_at(j);
      for (std::uint16_t v : arr) n += test_bit(bmp, v);
    } else {
      auto x = a.bitmap_at(i);
      auto y = b.bitmap_at(j);
      for (std::uint32_t w = 0; w < kWords; ++w) n += std::popcount(x[w] & y[w]);
    }
    return n;
  }

  static void or_chunks(const IdSet& a, std::size_t i, const IdSet& b, std::size_t j,
                        IdSetWriter& out, std::vector<std::uint16_t>& scratch, Words& words) {
    const std::uint64_t key = a.keys_[i];
    const bool abm = a.is_bitmap(i);
    const bool bbm = b.is_bitmap(j);
    if (!abm && !bbm) {
      scratch.clear();
      auto x = a.array_at(i);
      auto y = b.array_at(j);
      std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(scratch));
      out.add_array(key, scratch);
      return;
    }
    words.fill(0);
    for (auto [s, k] : {std::pair{&a, i}, std::pair{&b, j}}) {
      if (s->is_bitmap(k)) {
        auto src = s->bitmap_at(k);
        for (std::uint32_t w = 0; w < kWords; ++w) words[w] |= src[w];
      } else {
        for (std::uint16_t v : s->array_at(k)) words[v >> 6] |= std::uint64_t{1} << (v & 63);
      }
    }
    out.add_bitmap(key, words.data(), popcount_words(words.data()));
  }

  static void andnot_chunks(const IdSet& a, std::size_t i, const IdSet& b, std::size_t j,
                            IdSetWriter& out, std::vector<std::uint16_t>& scratch, Words& words) {
    const std::uint64_t key = a.keys_[i];
    const bool abm = a.is_bitmap(i);
    const bool bbm = b.is_bitmap(j);
    if (!abm) {
      scratch.clear();
      auto x = a.array_at(i);
      if (!bbm) {
        auto y = b.array_at(j);
        std::set_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(scratch));
      } else {
        auto bmp = b.bitmap_at(j);
        for (std::uint16_t v : x)
          if (!test_bit(bmp, v)) scratch.push_back(v);
      }
      out.add_array(key, scratch);
      return;
    }
    auto x = a.bitmap_at(i);
    std::copy(x.begin(), x.end(), words.begin());
    if (bbm) {
      auto y = b.bitmap_at(j);
      for (std::uint32_t w = 0; w < kWords; ++w) words[w] &= ~y[w];
    } else {
      for (std::uint16_t v : b.array_at(j)) words[v >> 6] &= ~(std::uint64_t{1} << (v & 63));
    }
    out.add_bitmap(key, words.data(), popcount_words(words.data()));
  }

  static IdSet intersect(const IdSet& a, const IdSet& b) {
    IdSetWriter out;
    std::vector<std::uint16_t> scratch;
    scratch.reserve(IdSet::kArrayMax);
    auto words = std::make_unique<Words>();
    std::size_t i = 0, j = 0;
    while (i < a.keys_.size() && j < b.keys_.size()) {
      if (a.keys_[i] < b.keys_[j]) {
        ++i;
      } else if (b.keys_[j] < a.keys_[i]) {
        ++j;
      } else {
        and_chunks(a, i++, b, j++, out, scratch, *words);
      }
    }
    return std::move(out).finish();
  }

  static std::uint64_t intersection_size(const IdSet& a, const IdSet& b) {
    std::uint64_t n = 0;
    std::size_t i = 0, j = 0;
    while (i < a.keys_.size() && j < b.keys_.size()) {
      if (a.keys_[i] < b.keys_[j]) {
        ++i;
      } else if (b.keys_[j] < a.keys_[i]) {
        ++j;
      } else {
        n += and_count(a, i++, b, j++);
      }
    }
    return n;
  }

  static IdSet unite(const IdSet& a, const IdSet& b) {
    IdSetWriter out;
    std::vector<std::uint16_t> scratch;
    auto words = std::make_unique<Words>();
    std::size_t i = 0, j = 0;
    while (i < a.keys_.size() || j < b.keys_.size()) {
      if (j == b.keys_.size() || (i < a.keys_.size() && a.keys_[i] < b.keys_[j])) {
        out.copy_chunk(a, i++);
      } else if (i == a.keys_.size() || b.keys_[j] < a.keys_[i]) {
        out.copy_chunk(b, j++);
      } else {
        or_chunks(a, i++, b, j++, out, scratch, *words);
      }
    }
    return std::move(out).finish();
  }

  static IdSet difference(const IdSet& a, const IdSet& b) {
    IdSetWriter out;
    std::vector<std::uint16_t> scratch;
    auto words = std::make_unique<Words>();
    std::size_t j = 0;
    for (std::size_t i = 0; i < a.keys_.size(); ++i) {
      while (j < b.keys_.size() && b.keys_[j] < a.keys_[i]) ++j;
      if (j < b.keys_.size() && b.keys_[j] == a.keys_[i]) {
        andnot_chunks(a, i, b, j, out, scratch, *words);
      } else {
        out.copy_chunk(a, i);
      }
    }
    return std::move(out).finish();
  }

  struct ChunkRef {
    std::uint64_t key;
    const IdSet* set;
    std::size_t index;
  };

  static std::vector<ChunkRef> chunks_by_key(std::span<const IdSet* const> sets) {
    std::vector<ChunkRef> refs;
    for (const IdSet* s : sets)
      for (std::size_t i = 0; i < s->keys_.size(); ++i) refs.push_back({s->keys_[i], s, i});
    std::stable_sort(refs.begin(), refs.end(),
                     [](const ChunkRef& x, const ChunkRef& y) { return x.key < y.key; });
    return refs;
  }

  static IdSet unite_all(std::span<const IdSet* const> sets) {
    if (sets.empty()) return {};
    if (sets.size() == 1) return *sets[0];
    auto refs = chunks_by_key(sets);
    IdSetWriter out;
    auto words = std::make_unique<Words>();
    for (std::size_t g = 0; g < refs.size();) {
      std::size_t e = g + 1;
      while (e < refs.size() && refs[e].key == refs[g].key) ++e;
      if (e - g == 1) {
        out.copy_chunk(*refs[g].set, refs[g].index);
      } else {
        words->fill(0);
        for (std::size_t r = g; r < e; ++r) {
          const IdSet& s = *refs[r].set;
          if (s.is_bitmap(refs[r].index)) {
            auto src = s.bitmap_at(refs[r].index);
            for (std::uint32_t w = 0; w < kWords; ++w) (*words)[w] |= src[w];
          } else {
            for (std::uint16_t v : s.array_at(refs[r].index))
              (*words)[v >> 6] |= std::uint64_t{1} << (v & 63);
          }
        }
        out.add_bitmap(refs[g].key, words->data(), popcount_words(words->data()));
      }
      g = e;
    }
    return std::move(out).finish();
  }

  static MembershipCounts membership(std::span<const IdSet* const> sets) {
    auto refs = chunks_by_key(sets);
    std::vector<MembershipCounts::Entry> entries;
    std::vector<std::uint32_t> counts(65536, 0);
    for (std::size_t g = 0; g < refs.size();) {
      std::size_t e = g + 1;
      while (e < refs.size() && refs[e].key == refs[g].key) ++e;
      for (std::size_t r = g; r < e; ++r) {
        const IdSet& s = *refs[r].set;
        const std::size_t k = refs[r].index;
        if (s.is_bitmap(k)) {
          auto src = s.bitmap_at(k);
          for (std::uint32_t w = 0; w < kWords; ++w) {
            std::uint64_t bits = src[w];
            while (bits != 0) {
              ++counts[(w << 6) | std::countr_zero(bits)];
              bits &= bits - 1;
            }
          }
        } else {
          for (std::uint16_t v : s.array_at(k)) ++counts[v];
        }
      }
      const UserId high = refs[g].key << 16;
      for (std::uint32_t low = 0; low < 65536; ++low) {
        if (counts[low] != 0) {
          entries.emplace_back(high | low, counts[low]);
          counts[low] = 0;
        }
      }
      g = e;
    }
    return MembershipCounts(std::move(entries));
  }
};

IdSet IdSet::build(std::span<const UserId> ids) {
  return build(std::vector<UserId>(ids.begin(), ids.end()));
}

IdSet IdSet::build(std::vector<UserId>&& ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  SortedAppender app;
  for (UserId v : ids) app.push(v);
  return std::move(app).finish();
}

IdSet IdSet::from_sorted(std::span<const UserId> ids) {
  SortedAppender app;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0 && ids[i] <= ids[i - 1])
      throw std::invalid_argument("IdSet::from_sorted: input not strictly ascending at index " +
                                  std::to_string(i));
    app.push(ids[i]);
  }
  return std::move(app).finish();
}

bool IdSet::contains(UserId id) const {
  const std::uint64_t key = id >> 16;
  auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return false;
  const auto i = static_cast<std::size_t>(it - keys_.begin());
  const auto low = static_cast<std::uint16_t>(id & 0xffffu);
  if (is_bitmap(i)) return test_bit(bitmap_at(i), low);
  auto arr = array_at(i);
  return std::binary_search(arr.begin(), arr.end(), low);
}

std::vector<UserId> IdSet::to_vector() const {
  std::vector<UserId> out;
  out.reserve(size_);
  for_each([&](UserId v) { out.push_back(v); });
  return out;
}

std::size_t IdSet::memory_bytes() const noexcept {
  return keys_.capacity() * sizeof(std::uint64_t) + chunks_.capacity() * sizeof(Chunk) +
         arrays_.capacity() * sizeof(std::uint16_t) + bitmaps_.capacity() * sizeof(std::uint64_t);
}

IdSet::const_iterator IdSet::begin() const { return const_iterator(this, 0); }
IdSet::const_iterator IdSet::end() const { return const_iterator(this, keys_.size()); }

void IdSet::const_iterator::settle() {
  // Positions pos_ on the first element at or after the current (chunk_, pos_).
  while (chunk_ < set_->keys_.size()) {
    const UserId high = set_->keys_[chunk_] << 16;
    if (!set_->is_bitmap(chunk_)) {
      auto arr = set_->array_at(chunk_);
      if (pos_ < arr.size()) {
        value_ = high | arr[pos_];
        return;
      }
    } else {
      auto words = set_->bitmap_at(chunk_);
      std::uint32_t w = pos_ >> 6;
      if (w < kWords) {
        std::uint64_t bits = words[w] & (~std::uint64_t{0} << (pos_ & 63));
        while (bits == 0 && ++w < kWords) bits = words[w];
        if (w < kWords) {
          pos_ = (w << 6) | static_cast<std::uint32_t>(std::countr_zero(bits));
          value_ = high | pos_;
          return;
        }
      }
    }
    ++chunk_;
    pos_ = 0;
  }
  pos_ = 0;
  value_ = 0;
}

IdSet::const_iterator& IdSet::const_iterator::operator++() {
  ++pos_;
  settle();
  return *this;
}

IdSet intersect(const IdSet& a, const IdSet& b) { return IdSetOps::intersect(a, b); }
IdSet unite(const IdSet& a, const IdSet& b) { return IdSetOps::unite(a, b); }
IdSet difference(const IdSet& a, const IdSet& b) { return IdSetOps::difference(a, b); }
std::uint64_t intersection_size(const IdSet& a, const IdSet& b) {
  return IdSetOps::intersection_size(a, b);
}
IdSet unite_all(std::span<const IdSet* const> sets) { return IdSetOps::unite_all(sets); }

std::uint32_t MembershipCounts::count(UserId id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const Entry& e, UserId v) { return e.first < v; });
  return (it != entries_.end() && it->first == id) ? it->second : 0;
}

MembershipCounts multi_way_membership_counts(std::span<const IdSet* const> sets) {
  if (sets.empty())
    throw std::invalid_argument("multi_way_membership_counts: no sets given (league has no teams)");
  return IdSetOps::membership(sets);
}

// --- IDS1 ---

namespace {
constexpr char kMagic[4] = {'I', 'D', 'S', '1'};
}

std::vector<std::byte> encode_ids1(const IdSet& set) {
  std::vector<std::byte> out(12 + 8 * set.size());
  std::memcpy(out.data(), kMagic, 4);
  std::uint64_t n = to_le(set.size());
  std::memcpy(out.data() + 4, &n, 8);
  std::byte* p = out.data() + 12;
  set.for_each([&](UserId v) {
    const std::uint64_t le = to_le(v);
    std::memcpy(p, &le, 8);
    p += 8;
  });
  return out;
}

void write_ids1(const IdSet& set, std::ostream& out) {
  auto bytes = encode_ids1(set);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

IdSet decode_ids1(std::span<const std::byte> bytes) {
  using Code = IdsFormatError::Code;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IdsFormatError(Code::kBadMagic, "IDS1: bad magic bytes");
  if (bytes.size() < 12) throw IdsFormatError(Code::kTruncated, "IDS1: truncated header");
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data() + 4, 8);
  n = to_le(n);
  const std::size_t body = bytes.size() - 12;
  if (n > body / 8) throw IdsFormatError(Code::kTruncated, "IDS1: count exceeds payload");
  if (body != n * 8) throw IdsFormatError(Code::kTrailingBytes, "IDS1: trailing bytes after payload");
  SortedAppender app;
  const std::byte* p = bytes.data() + 12;
  UserId prev = 0;
  for (std::uint64_t i = 0; i < n; ++i, p += 8) {
    std::uint64_t v = 0;
    std::memcpy(&v, p, 8);
    v = to_le(v);
    if (i > 0 && v <= prev)
      throw IdsFormatError(Code::kOrdering,
                           "IDS1: values not strictly ascending at index " + std::to_string(i));
    app.push(v);
    prev = v;
  }
  return std::move(app).finish();
}

}  // namespace affinity
