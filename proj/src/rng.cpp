#include "abxi/rng.hpp"

#include "abxi/error.hpp"
#include "abxi/types.hpp"

namespace abxi {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::kA: return "A";
    case Domain::kB: return "B";
    case Domain::kPad: return "PAD";
  }
  return "?";
}

Domain parse_domain(std::string_view s) {
  if (s == "A") return Domain::kA;
  if (s == "B") return Domain::kB;
  throw DataError("unknown domain label '" + std::string(s) + "'");
}

}  // namespace abxi
