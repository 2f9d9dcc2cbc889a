#pragma once

#include <string>
#include <string_view>

namespace fcm {

// Classic Porter (1980) suffix-stripping stemmer for lowercase ASCII words.
// Words of length <= 2 and words containing non-letters are returned as-is.
std::string porter_stem(std::string_view word);

}  // namespace fcm
