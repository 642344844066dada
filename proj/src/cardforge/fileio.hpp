#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cardforge/errors.hpp"

namespace cardforge {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << content;
  if (!out) throw Error(Errc::IoError, "short write to " + path);
}

}  // namespace cardforge
