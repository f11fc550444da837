#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

namespace testing_paths {

inline std::filesystem::path source_dir() { return ONTORAG_SOURCE_DIR; }
inline std::filesystem::path fixture_dir() { return source_dir() / "data" / "fixture"; }
inline std::filesystem::path template_dir() { return source_dir() / "templates"; }

/// Fresh empty directory under the system temp dir, unique per process and tag.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("ontorag-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_paths
