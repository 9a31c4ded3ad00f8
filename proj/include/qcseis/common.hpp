#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qcseis {

// Network tensors are single precision. The f64 build of the library
// (QCSEIS_REAL_DOUBLE) exists for tight finite-difference gradient checks.
#ifdef QCSEIS_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer. Used to derive independent streams from a base seed
// and a key, so generators stay pure functions of (parameters, seed).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return mix64(seed ^ mix64(key + 0x632be59bd9b4e019ULL));
}

template <class... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key, Keys... rest) {
  return derive_seed(derive_seed(seed, key), static_cast<std::uint64_t>(rest)...);
}

}  // namespace qcseis
