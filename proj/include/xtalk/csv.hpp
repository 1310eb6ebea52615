#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xtalk::csv {

std::vector<std::string> split(std::string_view line, char sep = ',');

// Throws InputError naming `where` on malformed input.
double parse_double(std::string_view text, const std::string& where);
long parse_long(std::string_view text, const std::string& where);

std::string join(const std::vector<std::string>& fields, char sep = ',');

}  // namespace xtalk::csv
