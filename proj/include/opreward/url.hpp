#pragma once

#include <string>
#include <string_view>
#include <utility>

namespace opreward {

// Splits "scheme://host:port/prefix" into ("scheme://host:port", "/prefix").
// Trailing slashes are dropped from the prefix. Throws Error(kInvalidArgument)
// when the scheme or host is missing.
std::pair<std::string, std::string> split_base_url(std::string_view url);

}  // namespace opreward
