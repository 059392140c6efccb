#include "opreward/url.hpp"

#include "opreward/error.hpp"

namespace opreward {

std::pair<std::string, std::string> split_base_url(std::string_view url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0 || url.size() == scheme_end + 3 ||
      url[scheme_end + 3] == '/') {
    fail(ErrorCode::kInvalidArgument, "URL must look like http://host:port, got \"" + std::string(url) + "\"");
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  std::string host(url.substr(0, path_start));
  std::string path;
  if (path_start != std::string_view::npos) {
    path = std::string(url.substr(path_start));
    while (!path.empty() && path.back() == '/') path.pop_back();
  }
  return {std::move(host), std::move(path)};
}

}  // namespace opreward
