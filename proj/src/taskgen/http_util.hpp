// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include <httplib.h>

namespace lift::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing '/', may be empty
};

inline SplitUrl split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  const auto path_begin =
      scheme_end == std::string_view::npos ? url.find('/') : url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = std::string(url.substr(0, path_begin));
  if (path_begin != std::string_view::npos) {
    auto prefix = url.substr(path_begin);
    while (!prefix.empty() && prefix.back() == '/') prefix.remove_suffix(1);
    out.prefix = std::string(prefix);
  }
  return out;
}

}  // namespace lift::detail
