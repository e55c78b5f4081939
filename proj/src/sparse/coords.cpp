#include "hieum/sparse/coords.hpp"

#include "hieum/error.hpp"

#include <algorithm>
#include <bit>

namespace hieum::sparse {

CoordIndex::CoordIndex(std::span<const Coord> coords) {
  const auto capacity = std::bit_ceil(std::max<std::size_t>(16, coords.size() * 2));
  keys_.assign(capacity, kEmpty);
  rows_.assign(capacity, -1);
  mask_ = capacity - 1;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto key = pack(coords[i]);
    auto slot = mix(key) & mask_;
    while (keys_[slot] != kEmpty) {
      if (keys_[slot] == key) throw Error(ErrorCode::InvalidArgument, "duplicate coordinate");
      slot = (slot + 1) & mask_;
    }
    keys_[slot] = key;
    rows_[slot] = static_cast<std::int32_t>(i);
  }
}

std::int32_t CoordIndex::find(const Coord& c) const {
  if (keys_.empty()) return -1;
  const auto key = pack(c);
  auto slot = mix(key) & mask_;
  while (true) {
    const auto k = keys_[slot];
    if (k == key) return rows_[slot];
    if (k == kEmpty) return -1;
    slot = (slot + 1) & mask_;
  }
}

CoordSet::CoordSet(std::vector<Coord> coords, Dims3 shape) : coords_(std::move(coords)), shape_(shape) {
  constexpr int kLimit = 1 << 21;
  if (shape_.t < 1 || shape_.y < 1 || shape_.x < 1 || shape_.t >= kLimit || shape_.y >= kLimit || shape_.x >= kLimit) {
    throw Error(ErrorCode::InvalidArgument, "coordinate extent out of range");
  }
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (!inside(coords_[i])) throw Error(ErrorCode::InvalidArgument, "coordinate outside extent");
    if (i > 0 && !(coords_[i - 1] < coords_[i])) {
      throw Error(ErrorCode::InvalidArgument, "coordinates must be sorted and unique");
    }
  }
  index_ = CoordIndex(coords_);
}

std::pair<std::size_t, std::size_t> CoordSet::frame_range(int t) const {
  const auto lo = std::lower_bound(coords_.begin(), coords_.end(), Coord{t, 0, 0});
  const auto hi = std::lower_bound(lo, coords_.end(), Coord{t + 1, 0, 0});
  return {static_cast<std::size_t>(lo - coords_.begin()), static_cast<std::size_t>(hi - coords_.begin())};
}

}  // namespace hieum::sparse
