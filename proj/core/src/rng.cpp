#include "coopcart/rng.hpp"

namespace coopcart {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
  std::uint64_t x = gen_();
  while (x > limit) x = gen_();
  return x % n;
}

namespace {

// splitmix64; mixes (seed, stream) into a well-spread 64-bit seed.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(stream * 0x2545f4914f6cdd1dULL + 1));
}

}  // namespace coopcart
