#pragma once

#include <string>
#include <vector>

namespace srl {

// Shortest decimal representation that round-trips the double exactly.
// Used for every float written to a CSV so reruns are byte-identical.
std::string format_double(double value);

// Joins cells with commas and terminates with '\n'.
std::string csv_row(const std::vector<std::string>& cells);

// Reads a whole file; throws DataError when the file cannot be opened.
std::string read_file(const std::string& path);

// Writes content, creating parent directories as needed.
void write_file(const std::string& path, const std::string& content);

}  // namespace srl
