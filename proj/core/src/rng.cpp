#include "dais/rng.hpp"

namespace dais {

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng Rng::split(std::uint64_t index) const {
  // Two rounds so that neighbouring (key, index) pairs land far apart.
  return Rng(mix(mix(key_ ^ 0x6a09e667f3bcc909ULL) + kGolden * (index + 1)));
}

double Rng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

Vector Rng::normal_vector(Index d) {
  Vector out(d);
  for (Index i = 0; i < d; ++i) out[i] = normal();
  return out;
}

}  // namespace dais
