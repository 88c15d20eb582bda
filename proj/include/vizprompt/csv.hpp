#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vizprompt::csv {

/// Splits RFC-4180 text into records. Quoted fields may contain commas,
/// doubled quotes and line breaks; CRLF and LF line endings are accepted.
/// A trailing newline does not produce an empty record.
/// Throws std::runtime_error on an unterminated quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

/// Quotes a field when it contains a comma, a double quote or a line break.
std::string escape(std::string_view field);

std::string join_line(const std::vector<std::string>& fields);

}  // namespace vizprompt::csv
