#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace svs::cli {

// Runs the svsgan command line; returns the process exit code
// (0 success, 2 validation, 3 I/O, 4 numerical failure).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// SHA-256 over the sorted (relative path, file digest) pairs of a directory.
std::string directory_digest(const std::filesystem::path& dir);

}  // namespace svs::cli
