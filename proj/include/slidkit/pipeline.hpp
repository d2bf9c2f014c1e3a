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

#ifndef SLIDKIT_PIPELINE_HPP_
#define SLIDKIT_PIPELINE_HPP_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slidkit/augment.hpp"
#include "slidkit/encoder.hpp"
#include "slidkit/features.hpp"
#include "slidkit/heads.hpp"
#include "slidkit/manifest.hpp"
#include "slidkit/metrics.hpp"
#include "slidkit/optim.hpp"

namespace slidkit {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  std::string head = "aam";  // ce | aam | ram
  MarginConfig margin;
  OptimConfig optim;  // total_steps is derived from the data
  AugmentConfig augment;
  uint64_t seed = 1;
  double crop_seconds = 4.0;
  FeatureConfig features;
  EncoderConfig encoder;
  // name prefixes of tensors excluded from updates ("entry.", "block1.se.")
  std::vector<std::string> freeze;

  void validate() const;
};

struct Checkpoint {
  EncoderParams params;
  ClassPrototypes prototypes;
  std::vector<std::string> labels;  // class index -> language
  FeatureConfig features;
  double crop_seconds = 4.0;
  // training metadata
  int epoch = 0;
  uint64_t seed = 0;
  std::string head = "aam";
};

// Binary format: magic "LIDC", version u32, length-prefixed UTF-8
// key=value config block, then named tensors as (name length u32, name
// bytes, rank u32, dims u32 x rank, little-endian 32-bit floats).
// save -> load -> save reproduces the file byte for byte.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_micro = -1.0;  // -1 when no validation manifest
  double lr_first = 0.0;
  int skipped = 0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

// Per epoch: seeded shuffle, random crop/pad to crop_seconds, stochastic
// augmentation, log-mel + mean normalization, train-mode forward, head
// loss, exact backward, AdamW with the cosine schedule, running-stat
// update. The best-validation-accuracy checkpoint wins (final epoch when
// no validation set is given). Deterministic for a fixed seed; worker
// parallelism never changes results because every utterance owns its rng
// stream.
TrainResult train(const std::string& train_manifest_path,
                  const std::string& val_manifest_path, const TrainConfig& cfg,
                  const Checkpoint* init = nullptr,
                  std::ostream* log_stream = nullptr);

using EmbeddingTable = std::map<std::string, std::vector<double>>;

// Eval-mode embeddings for every manifest utterance (center crop/pad to
// the checkpoint's crop_seconds).
EmbeddingTable extract_embeddings(const std::string& manifest_path,
                                  const Checkpoint& ckpt);

void write_embedding_table(const std::string& path, const EmbeddingTable& table);
EmbeddingTable read_embedding_table(const std::string& path);

struct Task1Report {
  double macro = 0.0;
  double micro = 0.0;
  std::vector<Prediction> predictions;
};

// Closed-set classification of every utterance against the checkpoint's
// class inventory; labels outside it raise UnknownLabel.
Task1Report run_task1(const std::string& test_manifest_path,
                      const Checkpoint& ckpt, const std::string& out_pred_path);

struct Task2Report {
  std::vector<ScoreRecord> scores;
  std::optional<EerResult> eer;  // present when a key was supplied
};

// Cosine scoring of enrollment models against test utterances. EER is
// computed iff key_path is nonempty.
Task2Report run_task2(const std::string& trials_path,
                      const std::string& enroll_map_path,
                      const std::string& manifest_path, const Checkpoint& ckpt,
                      const std::string& out_scores_path,
                      const std::string& key_path = "");

// key=value file, '#' comments; unknown keys raise ConfigError.
void load_train_config_file(const std::string& path, TrainConfig* cfg);

}  // namespace slidkit

#endif  // SLIDKIT_PIPELINE_HPP_
