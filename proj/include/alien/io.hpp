#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "alien/error.hpp"

namespace alien {

// All writers assemble their payload in memory and publish it with a
// temp-file + rename, so a failed command never leaves a partial output.
inline void atomic_write(const std::filesystem::path& path,
                         const std::string& payload) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for writing: " + tmp.string());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(Errc::io_failure, "short write: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(Errc::io_failure, "cannot rename into place: " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_failure, "cannot open: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace alien
