// Copyright (c) 2026 slidkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slidkit/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "slidkit/common.hpp"

namespace slidkit {

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open manifest " + path);
  Manifest manifest;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string rest;
    if (!std::getline(ss, e.utt_id, '\t') || !std::getline(ss, e.path, '\t') ||
        !std::getline(ss, e.language, '\t') ||
        !std::getline(ss, e.speaker, '\t')) {
      // speaker is the last field; re-read allowing it to end the line
      std::istringstream ss2(line);
      if (!std::getline(ss2, e.utt_id, '\t') ||
          !std::getline(ss2, e.path, '\t') ||
          !std::getline(ss2, e.language, '\t') ||
          !std::getline(ss2, e.speaker)) {
        throw UnsupportedFormat(path + ":" + std::to_string(lineno) +
                                ": expected 4 tab-separated fields");
      }
    }
    manifest.push_back(std::move(e));
  }
  return manifest;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& e : manifest) {
    out << e.utt_id << '\t' << e.path << '\t' << e.language << '\t'
        << e.speaker << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

std::string resolve_audio_path(const std::string& manifest_path,
                               const std::string& entry_path) {
  const std::filesystem::path p(entry_path);
  if (p.is_absolute()) return entry_path;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

std::vector<std::string> languages_of(const Manifest& manifest) {
  std::set<std::string> s;
  for (const auto& e : manifest) s.insert(e.language);
  return {s.begin(), s.end()};
}

std::vector<std::string> speakers_of(const Manifest& manifest) {
  std::set<std::string> s;
  for (const auto& e : manifest) s.insert(e.speaker);
  return {s.begin(), s.end()};
}

}  // namespace slidkit
