#include "svkit/binary_io.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace svkit::binio {

std::vector<char> read_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), std::string("cannot open file: ") + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const char* path, std::span<const char> bytes) {
  // Written beside the target and renamed into place so readers never see a
  // partial file.
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check(static_cast<bool>(out), "cannot write file: " + target.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    check(static_cast<bool>(out), "write failed: " + target.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace svkit::binio
