#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace abxi {

// Row-major so that one row is one token representation.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class Domain : std::uint8_t { kA = 0, kB = 1, kPad = 2 };

inline constexpr int kPadItem = 0;

std::string_view domain_name(Domain d);
Domain parse_domain(std::string_view s);  // "A" | "B"; throws DataError otherwise

inline Domain other_domain(Domain d) { return d == Domain::kA ? Domain::kB : Domain::kA; }

struct Token {
  int item = kPadItem;
  Domain domain = Domain::kPad;

  bool is_pad() const { return item == kPadItem; }
  friend bool operator==(const Token&, const Token&) = default;
};

inline constexpr Token kPadToken{};

using TokenSeq = std::vector<Token>;

}  // namespace abxi
