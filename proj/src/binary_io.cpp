#include "binary_io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace resrag::io {

std::string read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw std::system_error(errno, std::generic_category(), "cannot open " + path.string()); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_atomic(std::filesystem::path const &path, std::string_view data)
{
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) { throw std::system_error(errno, std::generic_category(), "cannot write " + tmp.string()); }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) { throw std::system_error(errno, std::generic_category(), "short write to " + tmp.string()); }
  }
  std::filesystem::rename(tmp, path);
}

} // namespace resrag::io
