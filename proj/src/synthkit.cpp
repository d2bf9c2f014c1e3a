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

#include "slidkit/synthkit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "slidkit/common.hpp"
#include "slidkit/wav.hpp"

namespace slidkit {

namespace {

constexpr int kResonatorsPerLanguage = 3;
constexpr double kGridLoHz = 300.0;
constexpr double kGridHiHz = 7000.0;

struct LanguageVoiceprint {
  std::vector<double> center_hz;
  std::vector<double> bandwidth_hz;
};

struct SpeakerVoice {
  double f0_hz = 0.0;
  double lfo_rate_hz = 0.0;
  double lfo_depth = 0.0;
};

std::string lang_label(int idx, bool unseen) {
  std::ostringstream ss;
  ss << (unseen ? 'U' : 'L');
  ss << (idx < 10 ? "0" : "") << idx;
  return ss.str();
}

std::string speaker_label(int idx) {
  std::ostringstream ss;
  ss << 'S' << (idx < 10 ? "0" : "") << idx;
  return ss.str();
}

// Each language owns kResonatorsPerLanguage slots of a shared frequency
// grid, strided so its resonators spread over the band and no two
// languages (seen or unseen) share a slot.
LanguageVoiceprint make_language(int lang_index, int total_languages,
                                 uint64_t seed, const std::string& label) {
  Rng rng(Rng::derive_seed(seed, "lang:" + label));
  LanguageVoiceprint lp;
  const int slots = kResonatorsPerLanguage * total_languages;
  for (int j = 0; j < kResonatorsPerLanguage; ++j) {
    const int slot = lang_index + j * total_languages;
    const double frac = (slot + 0.5) / slots;
    lp.center_hz.push_back(kGridLoHz + (kGridHiHz - kGridLoHz) * frac);
    lp.bandwidth_hz.push_back(rng.uniform(40.0, 90.0));
  }
  return lp;
}

SpeakerVoice make_speaker(uint64_t seed, const std::string& label) {
  Rng rng(Rng::derive_seed(seed, "spk:" + label));
  SpeakerVoice v;
  v.f0_hz = rng.uniform(85.0, 255.0);
  v.lfo_rate_hz = rng.uniform(1.5, 4.0);
  v.lfo_depth = rng.uniform(0.2, 0.5);
  return v;
}

Waveform synth_utterance(const LanguageVoiceprint& lang,
                         const SpeakerVoice& voice, int n_samples,
                         uint64_t utt_seed) {
  Rng rng(utt_seed);
  const double sr = static_cast<double>(kSampleRateHz);
  const double f0 = voice.f0_hz * rng.uniform(0.96, 1.04);
  const int period = std::max(1, static_cast<int>(std::lround(sr / f0)));
  const double phase = rng.uniform(0.0, 2.0 * M_PI);

  // Voiced pulses plus an aspiration component; the noise part guarantees
  // every resonator sees energy no matter where the harmonics fall.
  std::vector<double> excitation(static_cast<size_t>(n_samples));
  for (int t = 0; t < n_samples; ++t) {
    excitation[t] = (t % period == 0 ? 1.0 : 0.0) + 0.25 * rng.gauss();
  }

  std::vector<double> mix(static_cast<size_t>(n_samples), 0.0);
  for (size_t j = 0; j < lang.center_hz.size(); ++j) {
    const double r = std::exp(-M_PI * lang.bandwidth_hz[j] / sr);
    const double c = 2.0 * r * std::cos(2.0 * M_PI * lang.center_hz[j] / sr);
    const double r2 = r * r;
    const double g = 1.0 - r;
    double y1 = 0.0, y2 = 0.0;
    for (int t = 0; t < n_samples; ++t) {
      const double y = c * y1 - r2 * y2 + g * excitation[t];
      mix[t] += y;
      y2 = y1;
      y1 = y;
    }
  }

  double peak = 0.0;
  for (int t = 0; t < n_samples; ++t) {
    mix[t] *= 1.0 + voice.lfo_depth *
                        std::sin(2.0 * M_PI * voice.lfo_rate_hz * t / sr + phase);
    peak = std::max(peak, std::abs(mix[t]));
  }
  const double norm = peak > 0.0 ? 0.45 / peak : 0.0;

  Waveform wave;
  wave.sample_rate_hz = kSampleRateHz;
  wave.samples.resize(static_cast<size_t>(n_samples));
  for (int t = 0; t < n_samples; ++t) {
    wave.samples[t] =
        std::clamp(mix[t] * norm + 0.003 * rng.gauss(), -1.0, 1.0);
  }
  return wave;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_languages < 2) throw InfeasibleSpec("need at least 2 seen languages");
  if (n_unseen_languages < 0) throw InfeasibleSpec("negative unseen count");
  if (n_speakers < 1) throw InfeasibleSpec("need at least one speaker");
  if (utts_per_speaker_language < 1) {
    throw InfeasibleSpec("need at least one utterance per speaker-language");
  }
  if (langs_per_speaker_lo < 2 || langs_per_speaker_lo > langs_per_speaker_hi) {
    throw InfeasibleSpec("languages-per-speaker range must start at >= 2");
  }
  if (langs_per_speaker_lo > n_languages) {
    throw InfeasibleSpec("languages-per-speaker exceeds the seen inventory");
  }
  if (utterance_seconds <= 0.0) throw InfeasibleSpec("nonpositive duration");
}

SynthCorpus gen_corpus(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wav", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const int total = spec.n_languages + spec.n_unseen_languages;
  SynthCorpus corpus;
  std::vector<LanguageVoiceprint> prints;
  for (int l = 0; l < total; ++l) {
    const bool unseen = l >= spec.n_languages;
    const std::string label =
        lang_label(unseen ? l - spec.n_languages : l, unseen);
    prints.push_back(make_language(l, total, spec.seed, label));
    (unseen ? corpus.unseen_languages : corpus.seen_languages).push_back(label);
  }

  const int n_samples =
      static_cast<int>(std::lround(spec.utterance_seconds * kSampleRateHz));
  // The upper end of the range is clamped to the seen inventory size.
  const int hi = std::min(spec.langs_per_speaker_hi, spec.n_languages);

  for (int s = 0; s < spec.n_speakers; ++s) {
    const std::string spk = speaker_label(s);
    const SpeakerVoice voice = make_speaker(spec.seed, spk);

    Rng assign(Rng::derive_seed(spec.seed, "assign:" + spk));
    const int count = spec.langs_per_speaker_lo +
                      assign.uniform_int(hi - spec.langs_per_speaker_lo + 1);
    std::vector<int> pool(static_cast<size_t>(spec.n_languages));
    for (int i = 0; i < spec.n_languages; ++i) pool[i] = i;
    for (int i = 0; i < count; ++i) {
      std::swap(pool[i], pool[i + assign.uniform_int(spec.n_languages - i)]);
    }
    std::vector<int> langs(pool.begin(), pool.begin() + count);
    std::sort(langs.begin(), langs.end());
    // every speaker also records each unseen language
    for (int u = 0; u < spec.n_unseen_languages; ++u) {
      langs.push_back(spec.n_languages + u);
    }

    for (int l : langs) {
      const bool unseen = l >= spec.n_languages;
      const std::string lang =
          lang_label(unseen ? l - spec.n_languages : l, unseen);
      for (int u = 0; u < spec.utts_per_speaker_language; ++u) {
        std::ostringstream id;
        id << spk << '-' << lang << '-' << (u < 10 ? "0" : "") << u;
        const std::string utt_id = id.str();
        const std::string rel = "wav/" + utt_id + ".wav";
        const Waveform wave =
            synth_utterance(prints[l], voice, n_samples,
                            Rng::derive_seed(spec.seed, "utt:" + utt_id));
        write_wav((fs::path(out_dir) / rel).string(), wave);
        corpus.manifest.push_back({utt_id, rel, lang, spk});
      }
    }
  }

  write_manifest((fs::path(out_dir) / "manifest.tsv").string(),
                 corpus.manifest);
  return corpus;
}

CorpusSplit split_corpus(const Manifest& manifest,
                         const std::vector<std::string>& seen_languages,
                         uint64_t seed, double train_frac, double val_frac) {
  if (manifest.empty()) throw InfeasibleSplit("empty manifest");
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac >= 1.0) {
    throw InfeasibleSplit("fractions must satisfy 0 < train, 0 <= val, "
                          "train + val < 1");
  }
  const std::set<std::string> seen(seen_languages.begin(),
                                   seen_languages.end());
  std::vector<std::string> speakers = speakers_of(manifest);
  const int s_total = static_cast<int>(speakers.size());

  Rng rng(Rng::derive_seed(seed, "split"));
  for (int i = s_total - 1; i > 0; --i) {
    std::swap(speakers[i], speakers[static_cast<size_t>(rng.uniform_int(i + 1))]);
  }
  int n_val = val_frac > 0.0
                  ? std::max(1, static_cast<int>(std::lround(val_frac * s_total)))
                  : 0;
  int n_test = std::max(
      1, static_cast<int>(std::lround((1.0 - train_frac - val_frac) * s_total)));
  const int n_train = s_total - n_val - n_test;
  if (n_train < 1) throw InfeasibleSplit("not enough speakers to split");

  std::set<std::string> train_spk(speakers.begin(), speakers.begin() + n_train);
  std::set<std::string> val_spk(speakers.begin() + n_train,
                                speakers.begin() + n_train + n_val);

  CorpusSplit split;
  for (const auto& e : manifest) {
    const bool is_seen = seen.count(e.language) > 0;
    if (train_spk.count(e.speaker) > 0) {
      if (is_seen) split.train.push_back(e);
      // a train speaker's unseen-language utterances are dropped entirely
    } else if (val_spk.count(e.speaker) > 0) {
      if (is_seen) split.val.push_back(e);
    } else {
      (is_seen ? split.test_seen : split.test_unseen).push_back(e);
    }
  }
  if (split.train.empty() || split.test_seen.empty()) {
    throw InfeasibleSplit("a split ended up empty");
  }
  const auto train_langs = languages_of(split.train);
  for (const auto& lang : seen_languages) {
    if (std::find(train_langs.begin(), train_langs.end(), lang) ==
        train_langs.end()) {
      throw InfeasibleSplit("seen language " + lang +
                            " has no training utterances; reseed the split");
    }
  }
  return split;
}

TrialSet gen_trials(const Manifest& test_manifest, int n_trials, uint64_t seed,
                    int n_enroll) {
  if (n_trials < 1) throw InfeasibleTrials("need at least one trial");
  if (n_enroll < 1) throw InfeasibleTrials("need at least one enrollment utt");

  // language -> speaker -> utts, in manifest order
  std::map<std::string, std::map<std::string, std::vector<std::string>>> by_lang;
  for (const auto& e : test_manifest) {
    by_lang[e.language][e.speaker].push_back(e.utt_id);
  }
  if (by_lang.size() < 2) {
    throw InfeasibleTrials("need at least 2 languages in the test manifest");
  }

  TrialSet set;
  std::vector<std::string> langs;
  std::map<std::string, std::vector<std::string>> test_pool;
  for (const auto& [lang, spk_map] : by_lang) {
    std::vector<std::string> enroll, test;
    if (spk_map.size() >= 2) {
      // whole speakers go to enrollment until the quota is met, the rest
      // of the speakers supply test utterances
      size_t spk_seen = 0;
      for (const auto& [spk, utts] : spk_map) {
        ++spk_seen;
        const bool need_more = static_cast<int>(enroll.size()) < n_enroll;
        const bool can_take = spk_seen < spk_map.size();  // keep >= 1 test spk
        if (need_more && can_take) {
          enroll.insert(enroll.end(), utts.begin(), utts.end());
        } else {
          test.insert(test.end(), utts.begin(), utts.end());
        }
      }
    } else {
      const auto& utts = spk_map.begin()->second;
      if (static_cast<int>(utts.size()) < 2) {
        throw InfeasibleTrials(lang + " has a single utterance");
      }
      const int take = std::min(n_enroll, static_cast<int>(utts.size()) - 1);
      enroll.assign(utts.begin(), utts.begin() + take);
      test.assign(utts.begin() + take, utts.end());
    }
    if (enroll.empty() || test.empty()) {
      throw InfeasibleTrials(lang + " cannot supply both enrollment and test");
    }
    if (static_cast<int>(enroll.size()) > n_enroll) enroll.resize(n_enroll);
    const std::string enroll_id = "enroll_" + lang;
    set.enroll_map[enroll_id] = enroll;
    test_pool[lang] = test;
    langs.push_back(lang);
  }

  Rng rng(Rng::derive_seed(seed, "trials"));
  const int n_langs = static_cast<int>(langs.size());
  for (int i = 0; i < n_trials; ++i) {
    const int li = rng.uniform_int(n_langs);
    const std::string& lang = langs[li];
    std::string test_lang;
    if (i % 2 == 0) {
      test_lang = lang;  // target
    } else {
      const int lo = rng.uniform_int(n_langs - 1);
      test_lang = langs[lo >= li ? lo + 1 : lo];
    }
    const auto& pool = test_pool[test_lang];
    const std::string& utt = pool[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(pool.size())))];
    set.trials.emplace_back("enroll_" + lang, utt);
    set.is_target.push_back(i % 2 == 0);
  }
  return set;
}

void write_trials(const std::string& trials_path, const TrialSet& set) {
  std::ofstream out(trials_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + trials_path);
  for (const auto& [enroll_id, test_id] : set.trials) {
    out << enroll_id << ' ' << test_id << '\n';
  }
}

void write_trial_key(const std::string& key_path, const TrialSet& set) {
  std::ofstream out(key_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + key_path);
  for (size_t i = 0; i < set.trials.size(); ++i) {
    out << set.trials[i].first << ' ' << set.trials[i].second << ' '
        << (set.is_target[i] ? "target" : "nontarget") << '\n';
  }
}

void write_enroll_map(const std::string& map_path, const TrialSet& set) {
  std::ofstream out(map_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + map_path);
  for (const auto& [enroll_id, utts] : set.enroll_map) {
    out << enroll_id;
    for (const auto& u : utts) out << ' ' << u;
    out << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> read_trials(
    const std::string& trials_path) {
  std::ifstream in(trials_path);
  if (!in) throw NotFound("cannot open " + trials_path);
  std::vector<std::pair<std::string, std::string>> trials;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string e, t;
    if (!(ss >> e >> t)) {
      throw UnsupportedFormat(trials_path + ": bad trial line '" + line + "'");
    }
    trials.emplace_back(std::move(e), std::move(t));
  }
  return trials;
}

std::map<std::string, std::vector<std::string>> read_enroll_map(
    const std::string& map_path) {
  std::ifstream in(map_path);
  if (!in) throw NotFound("cannot open " + map_path);
  std::map<std::string, std::vector<std::string>> m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id;
    ss >> id;
    std::vector<std::string> utts;
    std::string u;
    while (ss >> u) utts.push_back(u);
    if (id.empty() || utts.empty()) {
      throw UnsupportedFormat(map_path + ": bad enroll line '" + line + "'");
    }
    m[id] = std::move(utts);
  }
  return m;
}

}  // namespace slidkit
