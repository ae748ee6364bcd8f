#pragma once

#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

// Fixed-width bit vector. All set algebra in this library (belief supports, state sets,
// antichain subsumption) runs on this type; operands must have equal width.
class Bitset {
 public:
  Bitset() = default;

  explicit Bitset(uint32_t size, bool value = false)
      : size_(size), blocks_((size + 63) / 64, value ? ~0ull : 0ull) {
    trim();
  }

  static Bitset of(uint32_t size, std::initializer_list<uint32_t> bits) {
    Bitset result(size);
    for (uint32_t b : bits) {
      result.set(b);
    }
    return result;
  }

  uint32_t size() const { return size_; }

  bool get(uint32_t i) const {
    assert(i < size_);
    return (blocks_[i >> 6] >> (i & 63)) & 1ull;
  }

  void set(uint32_t i, bool value = true) {
    assert(i < size_);
    if (value) {
      blocks_[i >> 6] |= 1ull << (i & 63);
    } else {
      blocks_[i >> 6] &= ~(1ull << (i & 63));
    }
  }

  bool any() const {
    for (uint64_t b : blocks_) {
      if (b != 0) {
        return true;
      }
    }
    return false;
  }

  bool none() const { return !any(); }

  uint32_t count() const {
    uint32_t n = 0;
    for (uint64_t b : blocks_) {
      n += static_cast<uint32_t>(__builtin_popcountll(b));
    }
    return n;
  }

  Bitset& operator|=(Bitset const& other) {
    assert(size_ == other.size_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i] |= other.blocks_[i];
    }
    return *this;
  }

  Bitset& operator&=(Bitset const& other) {
    assert(size_ == other.size_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i] &= other.blocks_[i];
    }
    return *this;
  }

  // Set difference.
  Bitset& operator-=(Bitset const& other) {
    assert(size_ == other.size_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i] &= ~other.blocks_[i];
    }
    return *this;
  }

  friend Bitset operator|(Bitset lhs, Bitset const& rhs) { return lhs |= rhs; }
  friend Bitset operator&(Bitset lhs, Bitset const& rhs) { return lhs &= rhs; }
  friend Bitset operator-(Bitset lhs, Bitset const& rhs) { return lhs -= rhs; }

  Bitset complement() const {
    Bitset result(*this);
    for (auto& b : result.blocks_) {
      b = ~b;
    }
    result.trim();
    return result;
  }

  bool operator==(Bitset const& other) const {
    return size_ == other.size_ && blocks_ == other.blocks_;
  }

  bool operator!=(Bitset const& other) const { return !(*this == other); }

  // Lexicographic on blocks; used only to canonicalize orderings in output.
  bool operator<(Bitset const& other) const {
    assert(size_ == other.size_);
    return blocks_ < other.blocks_;
  }

  bool is_subset_of(Bitset const& other) const {
    assert(size_ == other.size_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i] & ~other.blocks_[i]) {
        return false;
      }
    }
    return true;
  }

  bool intersects(Bitset const& other) const {
    assert(size_ == other.size_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i] & other.blocks_[i]) {
        return true;
      }
    }
    return false;
  }

  static constexpr uint32_t npos = ~0u;

  uint32_t find_first() const {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i] != 0) {
        return static_cast<uint32_t>(i * 64 + __builtin_ctzll(blocks_[i]));
      }
    }
    return npos;
  }

  uint32_t find_next(uint32_t prev) const {
    uint32_t i = prev + 1;
    if (i >= size_) {
      return npos;
    }
    uint64_t block = blocks_[i >> 6] >> (i & 63);
    if (block != 0) {
      return i + static_cast<uint32_t>(__builtin_ctzll(block));
    }
    for (std::size_t j = (i >> 6) + 1; j < blocks_.size(); ++j) {
      if (blocks_[j] != 0) {
        return static_cast<uint32_t>(j * 64 + __builtin_ctzll(blocks_[j]));
      }
    }
    return npos;
  }

  // Range-for over set bit positions.
  class OnesIterator {
   public:
    OnesIterator(Bitset const* owner, uint32_t pos) : owner_(owner), pos_(pos) {}
    uint32_t operator*() const { return pos_; }
    OnesIterator& operator++() {
      pos_ = owner_->find_next(pos_);
      return *this;
    }
    bool operator!=(OnesIterator const& other) const { return pos_ != other.pos_; }

   private:
    Bitset const* owner_;
    uint32_t pos_;
  };

  OnesIterator begin() const { return OnesIterator(this, find_first()); }
  OnesIterator end() const { return OnesIterator(this, npos); }

  // Named range for call sites where bare iteration would read ambiguously.
  Bitset const& ones() const { return *this; }

  std::vector<uint32_t> to_indices() const {
    std::vector<uint32_t> result;
    result.reserve(count());
    for (uint32_t i : *this) {
      result.push_back(i);
    }
    return result;
  }

  std::string to_string() const {
    std::string result = "{";
    bool first = true;
    for (uint32_t i : *this) {
      if (!first) {
        result += ",";
      }
      result += std::to_string(i);
      first = false;
    }
    result += "}";
    return result;
  }

  std::size_t hash() const {
    std::size_t seed = size_;
    for (uint64_t b : blocks_) {
      hash_combine(seed, static_cast<std::size_t>(b));
    }
    return seed;
  }

 private:
  void trim() {
    if (size_ % 64 != 0 && !blocks_.empty()) {
      blocks_.back() &= (1ull << (size_ % 64)) - 1;
    }
  }

  uint32_t size_ = 0;
  std::vector<uint64_t> blocks_;
};

struct BitsetHash {
  std::size_t operator()(Bitset const& b) const { return b.hash(); }
};

}  // namespace pomdp_shield
