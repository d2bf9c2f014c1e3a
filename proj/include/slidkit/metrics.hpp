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

#ifndef SLIDKIT_METRICS_HPP_
#define SLIDKIT_METRICS_HPP_

#include <string>
#include <vector>

namespace slidkit {

struct Prediction {
  std::string utt_id;
  std::string true_label;
  std::string predicted_label;
};

enum class TrialLabel { kTarget, kNontarget, kUnknown };

struct ScoreRecord {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  TrialLabel label = TrialLabel::kUnknown;
};

// Fraction of items predicted correctly.
double micro_accuracy(const std::vector<Prediction>& preds);

// Unweighted mean of per-class recall. The class inventory is the set of
// true labels when `inventory` is empty; a declared class with zero true
// items raises EmptyClass.
double macro_accuracy(const std::vector<Prediction>& preds,
                      const std::vector<std::string>& inventory = {});

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Sweeps thresholds over the sorted unique scores (accept when
// score >= threshold), FAR = nontargets accepted / nontargets,
// FRR = targets rejected / targets, and interpolates linearly between the
// adjacent operating points where FAR - FRR changes sign.
EerResult compute_eer(const std::vector<ScoreRecord>& records);

// File formats, one record per line, space separated.
//   scores:      enroll_id test_id score
//   trial key:   enroll_id test_id target|nontarget
//   predictions: utt_id predicted_label
void write_scores(const std::string& path,
                  const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores(const std::string& path);
void apply_trial_key(const std::string& key_path,
                     std::vector<ScoreRecord>* records);
void write_predictions(const std::string& path,
                       const std::vector<Prediction>& preds);

}  // namespace slidkit

#endif  // SLIDKIT_METRICS_HPP_
