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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slidkit/common.hpp"
#include "slidkit/features.hpp"
#include "slidkit/metrics.hpp"
#include "slidkit/pipeline.hpp"
#include "slidkit/synthkit.hpp"

namespace {

namespace fs = std::filesystem;
using namespace slidkit;

int cmd_synth(const SynthSpec& spec, const std::string& out_dir, int n_trials,
              double train_frac, double val_frac) {
  const SynthCorpus corpus = gen_corpus(spec, out_dir);
  std::cout << "generated " << corpus.manifest.size() << " utterances under "
            << out_dir << '\n';
  const CorpusSplit split =
      split_corpus(corpus.manifest, corpus.seen_languages, spec.seed,
                   train_frac, val_frac);
  write_manifest((fs::path(out_dir) / "train.tsv").string(), split.train);
  write_manifest((fs::path(out_dir) / "val.tsv").string(), split.val);
  write_manifest((fs::path(out_dir) / "test_seen.tsv").string(),
                 split.test_seen);
  write_manifest((fs::path(out_dir) / "test_unseen.tsv").string(),
                 split.test_unseen);
  std::cout << "split: train " << split.train.size() << ", val "
            << split.val.size() << ", test_seen " << split.test_seen.size()
            << ", test_unseen " << split.test_unseen.size() << '\n';
  if (n_trials > 0 && !split.test_unseen.empty()) {
    const TrialSet trials = gen_trials(split.test_unseen, n_trials, spec.seed);
    write_trials((fs::path(out_dir) / "trials.txt").string(), trials);
    write_trial_key((fs::path(out_dir) / "trials.key").string(), trials);
    write_enroll_map((fs::path(out_dir) / "enroll.map").string(), trials);
    std::cout << "trials: " << trials.trials.size() << " over "
              << trials.enroll_map.size() << " enrollment models\n";
  }
  return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& train_manifest,
              const std::string& val_manifest, const std::string& out_path,
              const std::string& init_path) {
  Checkpoint init;
  const bool have_init = !init_path.empty();
  if (have_init) init = load_checkpoint(init_path);
  const TrainResult result = train(train_manifest, val_manifest, cfg,
                                   have_init ? &init : nullptr, &std::cout);
  save_checkpoint(out_path, result.best);
  std::cout << "saved " << out_path << " (epoch " << result.best_epoch << ")\n";
  return 0;
}

int cmd_embed(const std::string& manifest, const std::string& ckpt_path,
              const std::string& out_path, const std::string& dump_dir) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const EmbeddingTable table = extract_embeddings(manifest, ckpt);
  write_embedding_table(out_path, table);
  std::cout << "wrote " << table.size() << " embeddings to " << out_path << '\n';
  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    for (const auto& e : read_manifest(manifest)) {
      Waveform wave = load_wav(resolve_audio_path(manifest, e.path));
      const FeatureMatrix feats = cmvn(log_mel(wave, ckpt.features));
      write_feature_dump((fs::path(dump_dir) / (e.utt_id + ".lmel")).string(),
                         feats);
    }
    std::cout << "dumped features to " << dump_dir << '\n';
  }
  return 0;
}

int cmd_task1(const std::string& manifest, const std::string& ckpt_path,
              const std::string& out_pred) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Task1Report report = run_task1(manifest, ckpt, out_pred);
  std::printf("macro_accuracy %.4f\n", report.macro);
  std::printf("micro_accuracy %.4f\n", report.micro);
  return 0;
}

int cmd_task2(const std::string& trials, const std::string& enroll_map,
              const std::string& manifest, const std::string& ckpt_path,
              const std::string& out_scores, const std::string& key) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Task2Report report =
      run_task2(trials, enroll_map, manifest, ckpt, out_scores, key);
  std::cout << "wrote " << report.scores.size() << " scores to " << out_scores
            << '\n';
  if (report.eer.has_value()) {
    std::printf("eer %.4f at threshold %.4f\n", report.eer->eer,
                report.eer->threshold);
  }
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& ref_manifest,
             const std::string& scores_path, const std::string& key_path) {
  if (!pred_path.empty()) {
    const Manifest ref = read_manifest(ref_manifest);
    std::map<std::string, std::string> truth;
    for (const auto& e : ref) truth[e.utt_id] = e.language;
    std::ifstream in(pred_path);
    if (!in) throw NotFound("cannot open " + pred_path);
    std::vector<Prediction> preds;
    std::string utt, lab;
    while (in >> utt >> lab) {
      const auto it = truth.find(utt);
      if (it == truth.end()) throw MissingUtterance(utt + " not in reference");
      preds.push_back({utt, it->second, lab});
    }
    std::printf("macro_accuracy %.4f\n", macro_accuracy(preds));
    std::printf("micro_accuracy %.4f\n", micro_accuracy(preds));
  }
  if (!scores_path.empty()) {
    std::vector<ScoreRecord> records = read_scores(scores_path);
    apply_trial_key(key_path, &records);
    const EerResult eer = compute_eer(records);
    std::printf("eer %.4f at threshold %.4f\n", eer.eer, eer.threshold);
  }
  return 0;
}

void add_train_flags(CLI::App* app, TrainConfig* cfg) {
  app->add_option("--head", cfg->head, "classification head: ce|aam|ram");
  app->add_option("--margin", cfg->margin.margin_m, "additive margin m");
  app->add_option("--scale", cfg->margin.scale_s, "logit scale s");
  app->add_option("--epochs", cfg->epochs, "training epochs");
  app->add_option("--batch-size", cfg->batch_size, "batch size");
  app->add_option("--lr", cfg->optim.lr0, "initial learning rate");
  app->add_option("--weight-decay", cfg->optim.weight_decay, "AdamW decay");
  app->add_option("--seed", cfg->seed, "global seed");
  app->add_option("--crop-seconds", cfg->crop_seconds, "training crop length");
  app->add_option("--augment-prob", cfg->augment.apply_probability,
                  "augmentation probability");
  app->add_option("--snr-lo", cfg->augment.snr_db_lo, "lowest mixing SNR (dB)");
  app->add_option("--snr-hi", cfg->augment.snr_db_hi, "highest mixing SNR (dB)");
  app->add_option("--noise-dir", cfg->augment.noise_dir, "noise wav pool");
  app->add_option("--rir-dir", cfg->augment.rir_dir, "impulse response pool");
  app->add_option("--mel-bands", cfg->features.mel_bands, "mel bands");
  app->add_option("--layer-channels", cfg->encoder.layer_channels,
                  "encoder channels per block")->delimiter(',');
  app->add_option("--kernel-sizes", cfg->encoder.kernel_sizes,
                  "encoder kernels per block")->delimiter(',');
  app->add_option("--dilations", cfg->encoder.dilations,
                  "encoder dilations per block")->delimiter(',');
  app->add_option("--res2-scale", cfg->encoder.res2_scale, "res2 split count");
  app->add_option("--se-bottleneck", cfg->encoder.se_bottleneck,
                  "SE bottleneck width");
  app->add_option("--attention-hidden", cfg->encoder.attention_hidden,
                  "pooling attention width");
  app->add_option("--embedding-dim", cfg->encoder.embedding_dim,
                  "embedding dimension");
  app->add_option("--freeze", cfg->freeze,
                  "tensor name prefixes to exclude from updates")
      ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slidkit: spoken language identification toolkit"};
  app.require_subcommand(1);

  // synth
  SynthSpec spec;
  std::string synth_out = "corpus";
  int n_trials = 200;
  double train_frac = 0.7, val_frac = 0.1;
  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic speaker-controlled corpus with splits "
               "and verification trials");
  synth->add_option("--out-dir", synth_out, "output directory");
  synth->add_option("--languages", spec.n_languages, "seen languages");
  synth->add_option("--unseen", spec.n_unseen_languages, "unseen languages");
  synth->add_option("--speakers", spec.n_speakers, "speakers");
  synth->add_option("--utts-per", spec.utts_per_speaker_language,
                    "utterances per speaker-language pair");
  synth->add_option("--langs-per-speaker-lo", spec.langs_per_speaker_lo,
                    "min seen languages per speaker");
  synth->add_option("--langs-per-speaker-hi", spec.langs_per_speaker_hi,
                    "max seen languages per speaker");
  synth->add_option("--seconds", spec.utterance_seconds, "utterance length");
  synth->add_option("--seed", spec.seed, "corpus seed");
  synth->add_option("--trials", n_trials, "verification trials to generate");
  synth->add_option("--train-frac", train_frac, "speaker fraction for train");
  synth->add_option("--val-frac", val_frac, "speaker fraction for validation");

  // train
  TrainConfig cfg;
  std::string train_manifest, val_manifest, out_ckpt = "model.ckpt", init_ckpt;
  auto* tr = app.add_subcommand("train", "train the encoder and head");
  tr->add_option("--train-manifest", train_manifest, "training manifest")
      ->required();
  tr->add_option("--val-manifest", val_manifest,
                 "validation manifest (best-checkpoint selection)");
  tr->add_option("--out", out_ckpt, "output checkpoint path");
  tr->add_option("--init", init_ckpt, "initialize from this checkpoint");
  add_train_flags(tr, &cfg);
  tr->set_config("--config", "", "key=value config file; flags override");

  // embed
  std::string em_manifest, em_ckpt, em_out = "embeddings.txt", em_dump;
  auto* em = app.add_subcommand("embed", "extract utterance embeddings");
  em->add_option("--manifest", em_manifest, "manifest")->required();
  em->add_option("--ckpt", em_ckpt, "checkpoint")->required();
  em->add_option("--out", em_out, "embedding table output");
  em->add_option("--dump-features", em_dump,
                 "also dump per-utterance log-mel matrices here");

  // task1
  std::string t1_manifest, t1_ckpt, t1_pred = "predictions.txt";
  auto* t1 = app.add_subcommand(
      "task1", "closed-set classification with accuracy report");
  t1->add_option("--manifest", t1_manifest, "labeled test manifest")->required();
  t1->add_option("--ckpt", t1_ckpt, "checkpoint")->required();
  t1->add_option("--out-pred", t1_pred, "prediction file output");

  // task2
  std::string t2_trials, t2_map, t2_manifest, t2_ckpt,
      t2_scores = "scores.txt", t2_key;
  auto* t2 = app.add_subcommand(
      "task2", "enrollment/test verification scoring (EER with a key)");
  t2->add_option("--trials", t2_trials, "trial list")->required();
  t2->add_option("--enroll-map", t2_map, "enrollment map")->required();
  t2->add_option("--manifest", t2_manifest,
                 "manifest resolving every referenced utterance")->required();
  t2->add_option("--ckpt", t2_ckpt, "checkpoint")->required();
  t2->add_option("--out-scores", t2_scores, "score file output");
  t2->add_option("--key", t2_key, "trial key for EER");

  // eval
  std::string ev_pred, ev_ref, ev_scores, ev_key;
  auto* ev = app.add_subcommand(
      "eval", "standalone metrics from prediction/score files");
  ev->add_option("--pred", ev_pred, "prediction file");
  ev->add_option("--ref", ev_ref, "reference manifest for --pred");
  ev->add_option("--scores", ev_scores, "score file");
  ev->add_option("--key", ev_key, "trial key for --scores");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(spec, synth_out, n_trials, train_frac, val_frac);
    }
    if (tr->parsed()) {
      return cmd_train(cfg, train_manifest, val_manifest, out_ckpt, init_ckpt);
    }
    if (em->parsed()) return cmd_embed(em_manifest, em_ckpt, em_out, em_dump);
    if (t1->parsed()) return cmd_task1(t1_manifest, t1_ckpt, t1_pred);
    if (t2->parsed()) {
      return cmd_task2(t2_trials, t2_map, t2_manifest, t2_ckpt, t2_scores,
                       t2_key);
    }
    if (ev->parsed()) {
      if (ev_pred.empty() && ev_scores.empty()) {
        std::cerr << "eval: give --pred/--ref and/or --scores/--key\n";
        return 2;
      }
      if (!ev_pred.empty() && ev_ref.empty()) {
        std::cerr << "eval: --pred needs --ref\n";
        return 2;
      }
      if (!ev_scores.empty() && ev_key.empty()) {
        std::cerr << "eval: --scores needs --key\n";
        return 2;
      }
      return cmd_eval(ev_pred, ev_ref, ev_scores, ev_key);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
