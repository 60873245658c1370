#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace polarity {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads the whole file as bytes. Throws IoError naming the path when it is missing or unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace polarity
