#pragma once

#include <string>
#include <string_view>

namespace bridge {

// Writes to "<path>.tmp.<pid>" and renames over `path`.
void atomic_write_file(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

}  // namespace bridge
