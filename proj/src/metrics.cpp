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

#include "slidkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "slidkit/common.hpp"

namespace slidkit {

double micro_accuracy(const std::vector<Prediction>& preds) {
  if (preds.empty()) throw EmptySet("no predictions");
  int correct = 0;
  for (const auto& p : preds) {
    if (p.predicted_label == p.true_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double macro_accuracy(const std::vector<Prediction>& preds,
                      const std::vector<std::string>& inventory) {
  if (preds.empty()) throw EmptySet("no predictions");
  std::map<std::string, std::pair<int, int>> per_class;  // label -> (true, correct)
  for (const auto& label : inventory) per_class.emplace(label, std::make_pair(0, 0));
  for (const auto& p : preds) {
    if (!inventory.empty() && per_class.find(p.true_label) == per_class.end()) {
      throw UnknownLabel(p.true_label + " not in declared inventory");
    }
    auto& counts = per_class[p.true_label];
    counts.first += 1;
    if (p.predicted_label == p.true_label) counts.second += 1;
  }
  double sum = 0.0;
  for (const auto& [label, counts] : per_class) {
    if (counts.first == 0) {
      throw EmptyClass(label + " has no true items");
    }
    sum += static_cast<double>(counts.second) / counts.first;
  }
  return sum / static_cast<double>(per_class.size());
}

EerResult compute_eer(const std::vector<ScoreRecord>& records) {
  std::vector<double> targets, nontargets;
  for (const auto& r : records) {
    if (!std::isfinite(r.score)) throw NonFiniteScore(r.enroll_id + " " + r.test_id);
    if (r.label == TrialLabel::kTarget) {
      targets.push_back(r.score);
    } else if (r.label == TrialLabel::kNontarget) {
      nontargets.push_back(r.score);
    }
  }
  if (targets.empty() || nontargets.empty()) {
    throw DegenerateLabels("need at least one target and one nontarget trial");
  }

  std::vector<double> thresholds;
  thresholds.reserve(records.size());
  for (double s : targets) thresholds.push_back(s);
  for (double s : nontargets) thresholds.push_back(s);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  const double nt = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());

  auto far_at = [&](double t) {
    // nontargets with score >= t
    const auto it = std::lower_bound(nontargets.begin(), nontargets.end(), t);
    return static_cast<double>(nontargets.end() - it) / nn;
  };
  auto frr_at = [&](double t) {
    // targets with score < t
    const auto it = std::lower_bound(targets.begin(), targets.end(), t);
    return static_cast<double>(it - targets.begin()) / nt;
  };

  // Operating points at every unique score plus an accept-nothing sentinel,
  // so the FAR-FRR sign change always exists.
  std::vector<double> fars, frrs;
  fars.reserve(thresholds.size() + 1);
  frrs.reserve(thresholds.size() + 1);
  for (double t : thresholds) {
    fars.push_back(far_at(t));
    frrs.push_back(frr_at(t));
  }
  fars.push_back(0.0);
  frrs.push_back(1.0);
  thresholds.push_back(thresholds.back());

  for (size_t k = 0; k + 1 < fars.size(); ++k) {
    const double d0 = fars[k] - frrs[k];
    const double d1 = fars[k + 1] - frrs[k + 1];
    if (d0 == 0.0) return {fars[k], thresholds[k]};
    if (d0 > 0.0 && d1 <= 0.0) {
      const double lambda = d0 / (d0 - d1);
      const double eer = fars[k] + lambda * (fars[k + 1] - fars[k]);
      const double thr =
          thresholds[k] + lambda * (thresholds[k + 1] - thresholds[k]);
      return {eer, thr};
    }
  }
  // FAR starts at FRR = 0 and the sentinel forces a crossing; unreachable.
  throw StateError("no FAR/FRR crossing found");
}

void write_scores(const std::string& path,
                  const std::vector<ScoreRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (const auto& r : records) {
    out << r.enroll_id << ' ' << r.test_id << ' ' << r.score << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

std::vector<ScoreRecord> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path);
  std::vector<ScoreRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ScoreRecord r;
    if (!(ss >> r.enroll_id >> r.test_id >> r.score)) {
      throw UnsupportedFormat(path + ": bad score line '" + line + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void apply_trial_key(const std::string& key_path,
                     std::vector<ScoreRecord>* records) {
  std::ifstream in(key_path);
  if (!in) throw NotFound("cannot open " + key_path);
  std::map<std::pair<std::string, std::string>, TrialLabel> key;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string e, t, lab;
    if (!(ss >> e >> t >> lab) || (lab != "target" && lab != "nontarget")) {
      throw UnsupportedFormat(key_path + ": bad key line '" + line + "'");
    }
    key[{e, t}] = lab == "target" ? TrialLabel::kTarget : TrialLabel::kNontarget;
  }
  for (auto& r : *records) {
    const auto it = key.find({r.enroll_id, r.test_id});
    if (it == key.end()) {
      throw MissingUtterance("trial " + r.enroll_id + " " + r.test_id +
                             " absent from key");
    }
    r.label = it->second;
  }
}

void write_predictions(const std::string& path,
                       const std::vector<Prediction>& preds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& p : preds) {
    out << p.utt_id << ' ' << p.predicted_label << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace slidkit
