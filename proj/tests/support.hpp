#pragma once

#include <filesystem>
#include <string>

#include "memsflow/config.hpp"

namespace testing {

inline memsflow::ValidatedConfig config(memsflow::RawConfig raw) { return memsflow::validate_config(raw); }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("memsflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
