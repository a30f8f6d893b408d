#include "capsnet/ensemble.hpp"

#include <filesystem>
#include <fstream>

namespace capsnet {

std::vector<std::string> read_ensemble_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ensemble manifest " + path);
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto b = line.find_last_not_of(" \t\r");
    std::filesystem::path p = line.substr(a, b - a + 1);
    if (p.is_relative()) p = base / p;
    out.push_back(p.string());
  }
  if (out.empty()) throw FormatError("ensemble manifest " + path + " lists no checkpoints");
  return out;
}

}  // namespace capsnet
