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

#ifndef SLIDKIT_MANIFEST_HPP_
#define SLIDKIT_MANIFEST_HPP_

#include <string>
#include <vector>

namespace slidkit {

// One corpus utterance. `path` is relative to the manifest file.
struct ManifestEntry {
  std::string utt_id;
  std::string path;
  std::string language;
  std::string speaker;
};

using Manifest = std::vector<ManifestEntry>;

// TSV, one line per utterance: utt_id<TAB>path<TAB>language<TAB>speaker.
Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& manifest);

// Joins an entry path against the directory of its manifest file.
std::string resolve_audio_path(const std::string& manifest_path,
                               const std::string& entry_path);

// Sorted unique languages / speakers.
std::vector<std::string> languages_of(const Manifest& manifest);
std::vector<std::string> speakers_of(const Manifest& manifest);

}  // namespace slidkit

#endif  // SLIDKIT_MANIFEST_HPP_
