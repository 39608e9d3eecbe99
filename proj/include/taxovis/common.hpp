#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace taxovis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// FNV-1a over raw bytes; used for stable content hashes and RNG keying.
uint64_t fnv1a64(const void* data, size_t size);
uint64_t fnv1a64(std::string_view text);

// splitmix64 finalizer; decorrelates seeds derived from small integers.
uint64_t mix64(uint64_t x);

// Deterministic generator with explicit bit-to-double conversions so results
// do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // Box-Muller, mean 0, stddev 1
  int uniform_int(int n);                 // [0, n)

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// RNG whose stream depends only on (seed, key), not on call order elsewhere.
Rng keyed_rng(uint64_t seed, std::string_view key);

enum class Activation { kGelu, kSilu, kRelu };

Activation activation_from_string(const std::string& name);
std::string activation_name(Activation act);
double activation_value(Activation act, double x);
double activation_deriv(Activation act, double x);

}  // namespace taxovis
