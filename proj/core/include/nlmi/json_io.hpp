#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

namespace nlmi {

using Json = nlohmann::json;

/// Throws ConfigError naming `context` if `obj` is not an object or has a key outside `allowed`.
void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& context);

/// Reads a whole file; throws FormatError if it cannot be opened.
std::string read_text_file(const std::string& path);
/// Writes a whole file; throws FormatError on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace nlmi
