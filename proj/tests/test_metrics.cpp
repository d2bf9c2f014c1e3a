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
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "slidkit/common.hpp"
#include "testing.hpp"

using namespace slidkit;

namespace {

std::vector<Prediction> make_preds(int correct_a, int wrong_a, int correct_b,
                                   int wrong_b) {
  std::vector<Prediction> p;
  int id = 0;
  auto add = [&](const std::string& truth, const std::string& pred, int n) {
    for (int i = 0; i < n; ++i) {
      p.push_back({"u" + std::to_string(id++), truth, pred});
    }
  };
  add("A", "A", correct_a);
  add("A", "B", wrong_a);
  add("B", "B", correct_b);
  add("B", "A", wrong_b);
  return p;
}

std::vector<ScoreRecord> random_records(int n, Rng* rng) {
  std::vector<ScoreRecord> recs;
  for (int i = 0; i < n; ++i) {
    ScoreRecord r;
    r.enroll_id = "e" + std::to_string(i);
    r.test_id = "t" + std::to_string(i);
    r.score = rng->uniform(-1.0, 1.0);
    r.label = rng->uniform() < 0.5 ? TrialLabel::kTarget : TrialLabel::kNontarget;
    recs.push_back(r);
  }
  // guarantee both classes exist
  recs[0].label = TrialLabel::kTarget;
  recs[1].label = TrialLabel::kNontarget;
  return recs;
}

void test_micro_accuracy() {
  CHECK_CLOSE(micro_accuracy(make_preds(10, 0, 5, 0)), 1.0, 0.0);
  CHECK_CLOSE(micro_accuracy(make_preds(90, 0, 0, 10)), 0.9, 1e-15);
  CHECK_CLOSE(micro_accuracy(make_preds(3, 2, 2, 3)), 0.5, 1e-15);
  CHECK_THROWS(EmptySet, micro_accuracy({}));
}

void test_macro_accuracy() {
  // balanced classes: macro == micro exactly
  const auto balanced = make_preds(7, 3, 6, 4);
  CHECK_CLOSE(macro_accuracy(balanced), micro_accuracy(balanced), 0.0);
  // skewed: 90/90 correct in A, 0/10 in B
  const auto skewed = make_preds(90, 0, 0, 10);
  CHECK_CLOSE(macro_accuracy(skewed), 0.5, 1e-15);
  CHECK_CLOSE(micro_accuracy(skewed), 0.9, 1e-15);
  CHECK_CLOSE(macro_accuracy(make_preds(4, 0, 9, 0)), 1.0, 0.0);
}

void test_macro_inventory_errors() {
  const auto preds = make_preds(2, 0, 2, 0);
  CHECK_THROWS(EmptyClass, macro_accuracy(preds, {"A", "B", "C"}));
  CHECK_THROWS(UnknownLabel, macro_accuracy(preds, {"A"}));
  CHECK_CLOSE(macro_accuracy(preds, {"A", "B"}), 1.0, 0.0);
}

void test_accuracy_order_invariant() {
  auto preds = make_preds(5, 2, 1, 4);
  const double micro = micro_accuracy(preds);
  const double macro = macro_accuracy(preds);
  std::reverse(preds.begin(), preds.end());
  CHECK_CLOSE(micro_accuracy(preds), micro, 0.0);
  CHECK_CLOSE(macro_accuracy(preds), macro, 0.0);
}

void test_eer_perfect_and_inverted() {
  std::vector<ScoreRecord> recs;
  for (int i = 0; i < 10; ++i) {
    recs.push_back({"e", "t" + std::to_string(i), 0.5 + 0.01 * i,
                    TrialLabel::kTarget});
    recs.push_back({"e", "n" + std::to_string(i), -0.5 + 0.01 * i,
                    TrialLabel::kNontarget});
  }
  CHECK_CLOSE(compute_eer(recs).eer, 0.0, 1e-12);
  for (auto& r : recs) {
    r.label = r.label == TrialLabel::kTarget ? TrialLabel::kNontarget
                                             : TrialLabel::kTarget;
  }
  CHECK_CLOSE(compute_eer(recs).eer, 1.0, 1e-12);
}

void test_eer_against_brute_force() {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const auto recs = random_records(200, &rng);
    const double fast = compute_eer(recs).eer;
    const double brute = oracles::brute_force_eer(recs);
    CHECK_CLOSE(fast, brute, 1e-9);
    CHECK(fast >= 0.0 && fast <= 1.0);
  }
}

void test_eer_with_score_ties() {
  Rng rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    // quantized scores force many exact ties
    auto recs = random_records(120, &rng);
    for (auto& r : recs) r.score = std::round(r.score * 4.0) / 4.0;
    CHECK_CLOSE(compute_eer(recs).eer, oracles::brute_force_eer(recs), 1e-9);
  }
}

void test_eer_rank_invariance() {
  Rng rng(107);
  auto recs = random_records(150, &rng);
  const double base = compute_eer(recs).eer;
  auto warped = recs;
  for (auto& r : warped) r.score = std::exp(3.0 * r.score) + 7.0;
  CHECK_CLOSE(compute_eer(warped).eer, base, 1e-12);
}

void test_eer_label_swap_symmetry() {
  Rng rng(109);
  for (int trial = 0; trial < 10; ++trial) {
    auto recs = random_records(80, &rng);
    const double e = compute_eer(recs).eer;
    for (auto& r : recs) {
      r.label = r.label == TrialLabel::kTarget ? TrialLabel::kNontarget
                                               : TrialLabel::kTarget;
    }
    CHECK_CLOSE(compute_eer(recs).eer, 1.0 - e, 1e-9);
  }
}

void test_eer_degenerate_labels() {
  std::vector<ScoreRecord> recs = {{"e", "t", 0.5, TrialLabel::kTarget}};
  CHECK_THROWS(DegenerateLabels, compute_eer(recs));
  recs[0].label = TrialLabel::kUnknown;
  CHECK_THROWS(DegenerateLabels, compute_eer(recs));
}

void test_score_file_round_trip() {
  const auto dir = std::filesystem::temp_directory_path() / "slidkit_metrics";
  std::filesystem::create_directories(dir);
  Rng rng(113);
  auto recs = random_records(25, &rng);
  const std::string scores = (dir / "scores.txt").string();
  const std::string key = (dir / "key.txt").string();
  write_scores(scores, recs);
  {
    std::ofstream out(key);
    for (const auto& r : recs) {
      out << r.enroll_id << ' ' << r.test_id << ' '
          << (r.label == TrialLabel::kTarget ? "target" : "nontarget") << '\n';
    }
  }
  auto loaded = read_scores(scores);
  CHECK(loaded.size() == recs.size());
  apply_trial_key(key, &loaded);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK_CLOSE(loaded[i].score, recs[i].score, 1e-15);
    CHECK(loaded[i].label == recs[i].label);
  }
  CHECK_CLOSE(compute_eer(loaded).eer, compute_eer(recs).eer, 1e-12);
}

}  // namespace

int main() {
  RUN_TEST(test_micro_accuracy);
  RUN_TEST(test_macro_accuracy);
  RUN_TEST(test_macro_inventory_errors);
  RUN_TEST(test_accuracy_order_invariant);
  RUN_TEST(test_eer_perfect_and_inverted);
  RUN_TEST(test_eer_against_brute_force);
  RUN_TEST(test_eer_with_score_ties);
  RUN_TEST(test_eer_rank_invariance);
  RUN_TEST(test_eer_label_swap_symmetry);
  RUN_TEST(test_eer_degenerate_labels);
  RUN_TEST(test_score_file_round_trip);
  return testutil::finish();
}
