#pragma once

// Helpers shared by the command-line tools.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "fedpredi/corpus.hpp"
#include "fedpredi/error.hpp"
#include "fedpredi/manifest_io.hpp"

namespace fedpredi::tools {

inline std::filesystem::path client_file(const std::filesystem::path& dir, std::size_t k) {
  return dir / ("client_" + std::to_string(k) + ".manifest");
}

// Loads client_0.manifest, client_1.manifest, ... until the first gap.
inline std::vector<CorpusManifest> load_client_dir(const std::filesystem::path& dir) {
  std::vector<CorpusManifest> out;
  for (std::size_t k = 0; std::filesystem::exists(client_file(dir, k)); ++k) out.push_back(load_manifest(client_file(dir, k)));
  if (out.empty()) throw Error("no client_<k>.manifest files in " + dir.string());
  return out;
}

inline void save_client_dir(const std::filesystem::path& dir, const std::vector<CorpusManifest>& clients) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < clients.size(); ++k) save_manifest(client_file(dir, k), clients[k]);
}

template <typename F>
int guarded_main(F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fedpredi::tools
