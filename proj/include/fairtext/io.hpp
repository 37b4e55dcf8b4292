#pragma once

#include <string>

namespace fairtext {

// Whole-file read; throws ValidationError when the file cannot be opened.
std::string read_file(const std::string& path);

// Writes to a sibling temp file and renames it into place, so readers never
// observe a half-written artifact. Throws RuntimeFailure on I/O errors.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace fairtext
