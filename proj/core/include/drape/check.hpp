#pragma once

#include <sstream>
#include <utility>

#include "drape/common.hpp"

namespace drape::detail {

template <typename Error, typename... Parts>
[[noreturn]] void raise(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << std::forward<Parts>(parts));
  throw Error(os.str());
}

}  // namespace drape::detail

// Input validation; message should name the offending field/axis.
#define DRAPE_REQUIRE(cond, ...)                                        \
  do {                                                                  \
    if (!(cond)) ::drape::detail::raise<::drape::ValidationError>(__VA_ARGS__); \
  } while (0)

// Internal invariants.
#define DRAPE_ASSERT(cond, ...)                                         \
  do {                                                                  \
    if (!(cond)) ::drape::detail::raise<::drape::ContractError>(__VA_ARGS__); \
  } while (0)
