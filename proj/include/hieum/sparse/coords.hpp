#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace hieum::sparse {

struct Coord {
  std::int32_t t = 0;
  std::int32_t y = 0;
  std::int32_t x = 0;

  auto operator<=>(const Coord&) const = default;
};

// (t, y, x) triple used for shapes, kernels and strides.
struct Dims3 {
  int t = 1;
  int y = 1;
  int x = 1;

  int volume() const { return t * y * x; }
  bool operator==(const Dims3&) const = default;
};

// Open-addressing hash from coordinate to row. The hash is a fixed integer
// mix of the packed coordinate, so layout never depends on run or platform.
class CoordIndex {
 public:
  CoordIndex() = default;
  explicit CoordIndex(std::span<const Coord> coords);

  std::int32_t find(const Coord& c) const;

 private:
  static std::uint64_t pack(const Coord& c) {
    return (static_cast<std::uint64_t>(c.t) << 42) | (static_cast<std::uint64_t>(c.y) << 21) |
           static_cast<std::uint64_t>(c.x);
  }
  static std::uint64_t mix(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
  }

  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};
  std::vector<std::uint64_t> keys_;
  std::vector<std::int32_t> rows_;
  std::uint64_t mask_ = 0;
};

// Sorted, unique active coordinates inside a (T, H, W) extent, with a row index.
class CoordSet {
 public:
  // coords must be strictly increasing in (t, y, x) order and inside shape.
  CoordSet(std::vector<Coord> coords, Dims3 shape);

  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  const Coord& operator[](std::size_t i) const { return coords_[i]; }
  std::span<const Coord> coords() const { return coords_; }
  Dims3 shape() const { return shape_; }

  bool inside(const Coord& c) const {
    return c.t >= 0 && c.y >= 0 && c.x >= 0 && c.t < shape_.t && c.y < shape_.y && c.x < shape_.x;
  }
  // Row of c, or -1 when inactive or outside the extent.
  std::int32_t find(const Coord& c) const { return inside(c) ? index_.find(c) : -1; }

  // Row range [first, last) of frame t.
  std::pair<std::size_t, std::size_t> frame_range(int t) const;

  bool operator==(const CoordSet& other) const { return shape_ == other.shape_ && coords_ == other.coords_; }

 private:
  std::vector<Coord> coords_;
  Dims3 shape_;
  CoordIndex index_;
};

using CoordSetPtr = std::shared_ptr<const CoordSet>;

}  // namespace hieum::sparse
