#pragma once

#include <cstdint>

namespace hieum::sparse {

// Process-wide multiply-accumulate counter fed by every convolution forward pass.
void add_macs(std::uint64_t macs);
std::uint64_t mac_count();
void reset_macs();

// Counts the MACs issued while alive.
class MacScope {
 public:
  MacScope() : start_(mac_count()) {}
  std::uint64_t elapsed() const { return mac_count() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace hieum::sparse
