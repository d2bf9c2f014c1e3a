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
//
// Deterministic synthetic speaker-controlled multilingual corpus. A
// language is a fixed set of resonant band-pass filters (its spectral
// envelope); a speaker is a fundamental-frequency offset and amplitude
// contour (its voice). Every utterance runs the speaker's excitation
// through the language's filters, so language and speaker cues are
// constructed orthogonally: a model that shortcuts on speaker identity
// fails on held-out speakers by design.

#ifndef SLIDKIT_SYNTHKIT_HPP_
#define SLIDKIT_SYNTHKIT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "slidkit/manifest.hpp"

namespace slidkit {

struct SynthSpec {
  int n_languages = 5;          // seen, labeled L00..
  int n_unseen_languages = 3;   // verification only, labeled U00..
  int n_speakers = 24;
  int utts_per_speaker_language = 3;
  int langs_per_speaker_lo = 2;  // seen languages per speaker
  int langs_per_speaker_hi = 10;
  double utterance_seconds = 4.0;
  uint64_t seed = 1;

  void validate() const;
};

struct SynthCorpus {
  Manifest manifest;
  std::vector<std::string> seen_languages;
  std::vector<std::string> unseen_languages;
};

// Writes wav/<utt_id>.wav files plus manifest.tsv under out_dir. Every
// speaker gets a seeded random subset of seen languages (subset size
// uniform in the configured range) and every unseen language; unseen
// filter sets are disjoint from seen ones. Byte-identical for equal specs.
SynthCorpus gen_corpus(const SynthSpec& spec, const std::string& out_dir);

struct CorpusSplit {
  Manifest train;        // seen languages, train speakers
  Manifest val;          // seen languages, val speakers
  Manifest test_seen;    // seen languages, held-out speakers
  Manifest test_unseen;  // unseen languages, held-out speakers
};

// Speaker-disjoint split; unseen-language utterances appear only in the
// verification part. Fractions apply to speakers and land within one
// speaker of the request.
CorpusSplit split_corpus(const Manifest& manifest,
                         const std::vector<std::string>& seen_languages,
                         uint64_t seed, double train_frac = 0.7,
                         double val_frac = 0.1);

struct TrialSet {
  // enroll_id -> enrollment utterance ids
  std::map<std::string, std::vector<std::string>> enroll_map;
  std::vector<std::pair<std::string, std::string>> trials;  // enroll, test
  std::vector<bool> is_target;  // aligned with trials
};

// Balanced target/nontarget trials over the manifest's languages, one
// enrollment group per language. Enrollment and test speakers are
// disjoint whenever a language has two or more speakers.
TrialSet gen_trials(const Manifest& test_manifest, int n_trials,
                    uint64_t seed, int n_enroll = 3);

void write_trials(const std::string& trials_path, const TrialSet& set);
void write_trial_key(const std::string& key_path, const TrialSet& set);
void write_enroll_map(const std::string& map_path, const TrialSet& set);
std::vector<std::pair<std::string, std::string>> read_trials(
    const std::string& trials_path);
std::map<std::string, std::vector<std::string>> read_enroll_map(
    const std::string& map_path);

}  // namespace slidkit

#endif  // SLIDKIT_SYNTHKIT_HPP_
