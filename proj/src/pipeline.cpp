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

#include "slidkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "slidkit/scoring.hpp"

namespace slidkit {

namespace {

constexpr char kCkptMagic[4] = {'L', 'I', 'D', 'C'};
constexpr uint32_t kCkptVersion = 1;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<std::string> split_strings(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void put_u32le(std::string* out, uint32_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
  out->push_back(static_cast<char>((v >> 16) & 0xff));
  out->push_back(static_cast<char>((v >> 24) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  uint32_t u32() {
    need(4);
    const unsigned char* p =
        reinterpret_cast<const unsigned char*>(bytes_.data()) + off_;
    off_ += 4;
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) |
           (static_cast<uint32_t>(p[3]) << 24);
  }

  std::string raw(size_t n) {
    need(n);
    std::string s = bytes_.substr(off_, n);
    off_ += n;
    return s;
  }

  bool done() const { return off_ == bytes_.size(); }
  size_t remaining() const { return bytes_.size() - off_; }

 private:
  void need(size_t n) {
    if (off_ + n > bytes_.size()) {
      throw CorruptCheckpoint(path_ + ": truncated");
    }
  }
  const std::string& bytes_;
  std::string path_;
  size_t off_ = 0;
};

std::string encode_config_block(const Checkpoint& ckpt) {
  std::ostringstream ss;
  ss << "head=" << ckpt.head << '\n';
  ss << "epoch=" << ckpt.epoch << '\n';
  ss << "seed=" << ckpt.seed << '\n';
  ss << "crop_seconds=" << fmt_double(ckpt.crop_seconds) << '\n';
  ss << "labels=";
  for (size_t i = 0; i < ckpt.labels.size(); ++i) {
    if (i > 0) ss << ',';
    ss << ckpt.labels[i];
  }
  ss << '\n';
  const FeatureConfig& f = ckpt.features;
  ss << "features.frame_length_ms=" << fmt_double(f.frame_length_ms) << '\n';
  ss << "features.frame_shift_ms=" << fmt_double(f.frame_shift_ms) << '\n';
  ss << "features.fft_size=" << f.fft_size << '\n';
  ss << "features.mel_bands=" << f.mel_bands << '\n';
  ss << "features.fmin_hz=" << fmt_double(f.fmin_hz) << '\n';
  ss << "features.fmax_hz=" << fmt_double(f.fmax_hz) << '\n';
  ss << "features.log_floor=" << fmt_double(f.log_floor) << '\n';
  const EncoderConfig& e = ckpt.params.cfg;
  ss << "encoder.input_dim=" << e.input_dim << '\n';
  ss << "encoder.layer_channels=" << join_ints(e.layer_channels) << '\n';
  ss << "encoder.kernel_sizes=" << join_ints(e.kernel_sizes) << '\n';
  ss << "encoder.dilations=" << join_ints(e.dilations) << '\n';
  ss << "encoder.res2_scale=" << e.res2_scale << '\n';
  ss << "encoder.se_bottleneck=" << e.se_bottleneck << '\n';
  ss << "encoder.attention_hidden=" << e.attention_hidden << '\n';
  ss << "encoder.embedding_dim=" << e.embedding_dim << '\n';
  return ss.str();
}

void parse_config_block(const std::string& text, const std::string& path,
                        Checkpoint* ckpt) {
  EncoderConfig enc;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw CorruptCheckpoint(path + ": malformed config line '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "head") ckpt->head = val;
    else if (key == "epoch") ckpt->epoch = std::stoi(val);
    else if (key == "seed") ckpt->seed = std::stoull(val);
    else if (key == "crop_seconds") ckpt->crop_seconds = std::stod(val);
    else if (key == "labels") ckpt->labels = split_strings(val);
    else if (key == "features.frame_length_ms") ckpt->features.frame_length_ms = std::stod(val);
    else if (key == "features.frame_shift_ms") ckpt->features.frame_shift_ms = std::stod(val);
    else if (key == "features.fft_size") ckpt->features.fft_size = std::stoi(val);
    else if (key == "features.mel_bands") ckpt->features.mel_bands = std::stoi(val);
    else if (key == "features.fmin_hz") ckpt->features.fmin_hz = std::stod(val);
    else if (key == "features.fmax_hz") ckpt->features.fmax_hz = std::stod(val);
    else if (key == "features.log_floor") ckpt->features.log_floor = std::stod(val);
    else if (key == "encoder.input_dim") enc.input_dim = std::stoi(val);
    else if (key == "encoder.layer_channels") enc.layer_channels = split_ints(val);
    else if (key == "encoder.kernel_sizes") enc.kernel_sizes = split_ints(val);
    else if (key == "encoder.dilations") enc.dilations = split_ints(val);
    else if (key == "encoder.res2_scale") enc.res2_scale = std::stoi(val);
    else if (key == "encoder.se_bottleneck") enc.se_bottleneck = std::stoi(val);
    else if (key == "encoder.attention_hidden") enc.attention_hidden = std::stoi(val);
    else if (key == "encoder.embedding_dim") enc.embedding_dim = std::stoi(val);
    else throw CorruptCheckpoint(path + ": unknown config key '" + key + "'");
  }
  try {
    ckpt->params = EncoderParams::make(enc);
  } catch (const ConfigError& e) {
    throw CorruptCheckpoint(path + ": " + e.what());
  }
}

void append_tensor(std::string* out, const std::string& name, const Tensor& t) {
  put_u32le(out, static_cast<uint32_t>(name.size()));
  out->append(name);
  put_u32le(out, static_cast<uint32_t>(t.rank()));
  for (int d : t.shape) put_u32le(out, static_cast<uint32_t>(d));
  for (double v : t.data) {
    const float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kCkptMagic, 4);
  put_u32le(&out, kCkptVersion);
  const std::string cfg = encode_config_block(ckpt);
  put_u32le(&out, static_cast<uint32_t>(cfg.size()));
  out.append(cfg);

  ckpt.params.visit([&](const std::string& name, const Tensor* t, bool) {
    append_tensor(&out, name, *t);
  });
  append_tensor(&out, "prototypes", ckpt.prototypes.weights);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  ByteReader r(bytes, path);
  if (r.raw(4) != std::string(kCkptMagic, 4)) {
    throw CorruptCheckpoint(path + ": bad magic");
  }
  const uint32_t version = r.u32();
  if (version != kCkptVersion) {
    throw VersionMismatch(path + ": checkpoint version " +
                          std::to_string(version) + ", expected " +
                          std::to_string(kCkptVersion));
  }
  Checkpoint ckpt;
  const uint32_t cfg_len = r.u32();
  parse_config_block(r.raw(cfg_len), path, &ckpt);

  std::map<std::string, Tensor*> slots;
  ckpt.params.visit([&](const std::string& name, Tensor* t, bool) {
    slots[name] = t;
  });
  ckpt.prototypes.weights = Tensor();  // shape comes from the file
  std::set<std::string> filled;
  while (!r.done()) {
    const uint32_t name_len = r.u32();
    const std::string name = r.raw(name_len);
    const uint32_t rank = r.u32();
    if (rank == 0 || rank > 3) {
      throw CorruptCheckpoint(path + ": tensor '" + name + "' has rank " +
                              std::to_string(rank));
    }
    std::vector<int> dims;
    int64_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      const uint32_t d = r.u32();
      if (d == 0) throw CorruptCheckpoint(path + ": zero dimension");
      dims.push_back(static_cast<int>(d));
      numel *= d;
    }
    std::string payload = r.raw(static_cast<size_t>(numel) * 4);
    Tensor* dst = nullptr;
    if (name == "prototypes") {
      ckpt.prototypes.weights = Tensor::zeros(dims);
      dst = &ckpt.prototypes.weights;
    } else {
      const auto it = slots.find(name);
      if (it == slots.end()) {
        throw CorruptCheckpoint(path + ": unexpected tensor '" + name + "'");
      }
      if (it->second->shape != dims) {
        throw CorruptCheckpoint(path + ": tensor '" + name +
                                "' shape disagrees with the config block");
      }
      dst = it->second;
    }
    const unsigned char* p =
        reinterpret_cast<const unsigned char*>(payload.data());
    for (int64_t i = 0; i < numel; ++i) {
      const uint32_t bits = static_cast<uint32_t>(p[4 * i]) |
                            (static_cast<uint32_t>(p[4 * i + 1]) << 8) |
                            (static_cast<uint32_t>(p[4 * i + 2]) << 16) |
                            (static_cast<uint32_t>(p[4 * i + 3]) << 24);
      float f;
      std::memcpy(&f, &bits, 4);
      dst->data[static_cast<size_t>(i)] = static_cast<double>(f);
    }
    if (!filled.insert(name).second) {
      throw CorruptCheckpoint(path + ": duplicate tensor '" + name + "'");
    }
  }
  for (const auto& [name, t] : slots) {
    if (filled.count(name) == 0) {
      throw CorruptCheckpoint(path + ": missing tensor '" + name + "'");
    }
  }
  if (filled.count("prototypes") == 0) {
    throw CorruptCheckpoint(path + ": missing tensor 'prototypes'");
  }
  if (ckpt.prototypes.weights.rank() != 2 ||
      ckpt.prototypes.weights.dim(0) !=
          static_cast<int>(ckpt.labels.size()) ||
      ckpt.prototypes.weights.dim(1) != ckpt.params.cfg.embedding_dim) {
    throw CorruptCheckpoint(path + ": prototype shape disagrees with labels");
  }
  return ckpt;
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (head != "ce" && head != "aam" && head != "ram") {
    throw ConfigError("head must be one of ce|aam|ram");
  }
  if (crop_seconds <= 0.0) throw ConfigError("crop_seconds must be positive");
  encoder.validate();
}

namespace {

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

bool frozen(const std::string& name, const std::vector<std::string>& freeze) {
  for (const auto& prefix : freeze) {
    if (name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

std::vector<NamedTensor> collect_trainable(
    EncoderParams* enc, Matrix* protos,
    const std::vector<std::string>& freeze) {
  std::vector<NamedTensor> out;
  enc->visit([&](const std::string& name, Tensor* t, bool trainable) {
    if (trainable && !frozen(name, freeze)) out.push_back({name, t});
  });
  if (protos != nullptr && !frozen("prototypes", freeze)) {
    out.push_back({"prototypes", protos});
  }
  return out;
}

Waveform crop_or_pad(const Waveform& wave, int want, bool train_mode,
                     Rng* rng) {
  Waveform out;
  out.sample_rate_hz = wave.sample_rate_hz;
  const int n = wave.num_samples();
  out.samples.assign(static_cast<size_t>(want), 0.0);
  if (n >= want) {
    const int slack = n - want;
    const int offset =
        train_mode ? (slack > 0 ? rng->uniform_int(slack + 1) : 0) : slack / 2;
    std::copy(wave.samples.begin() + offset,
              wave.samples.begin() + offset + want, out.samples.begin());
  } else {
    std::copy(wave.samples.begin(), wave.samples.end(), out.samples.begin());
  }
  return out;
}

bool is_data_error(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const NotFound&) {
    return true;
  } catch (const UnsupportedFormat&) {
    return true;
  } catch (const TooShort&) {
    return true;
  } catch (const IoError&) {
    return true;
  } catch (const DataError&) {
    return true;
  } catch (...) {
    return false;
  }
}

std::string describe(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

struct UttSlot {
  FeatureMatrix feats;
  bool ok = false;
  std::exception_ptr error;
};

// Load -> crop/pad -> (train only) augment -> log-mel -> mean norm.
void prepare_utterance(const ManifestEntry& entry,
                       const std::string& manifest_path,
                       const TrainConfig& cfg, const WavPool& noise_pool,
                       const WavPool& rir_pool, bool train_mode, uint64_t salt,
                       UttSlot* slot) {
  try {
    const std::string path = resolve_audio_path(manifest_path, entry.path);
    Waveform wave = load_wav(path);
    const int want =
        static_cast<int>(std::lround(cfg.crop_seconds * kSampleRateHz));
    Rng rng(Rng::derive_seed(cfg.seed, "utt:" + entry.utt_id, salt));
    wave = crop_or_pad(wave, want, train_mode, &rng);
    if (train_mode && cfg.augment.apply_probability > 0.0) {
      wave = maybe_augment(wave, cfg.augment, noise_pool, rir_pool, &rng).wave;
    }
    slot->feats = cmvn(log_mel(wave, cfg.features));
    slot->ok = true;
  } catch (...) {
    slot->error = std::current_exception();
  }
}

std::map<std::string, int> label_index(const std::vector<std::string>& labels) {
  std::map<std::string, int> idx;
  for (size_t i = 0; i < labels.size(); ++i) {
    idx[labels[i]] = static_cast<int>(i);
  }
  return idx;
}

double validation_micro(const Manifest& manifest,
                        const std::string& manifest_path,
                        const EncoderParams& params, const Matrix& protos,
                        const std::vector<std::string>& labels,
                        const FeatureConfig& feat_cfg, double crop_seconds) {
  if (manifest.empty()) throw EmptySet("validation manifest is empty");
  const auto idx = label_index(labels);
  const int n = static_cast<int>(manifest.size());
  std::vector<int> pred(static_cast<size_t>(n), -1);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  parallel_for(n, worker_count(), [&](int i) {
    try {
      const std::string path =
          resolve_audio_path(manifest_path, manifest[i].path);
      Waveform wave = load_wav(path);
      const int want =
          static_cast<int>(std::lround(crop_seconds * kSampleRateHz));
      Rng rng(0);
      wave = crop_or_pad(wave, want, false, &rng);
      const FeatureMatrix feats = cmvn(log_mel(wave, feat_cfg));
      const std::vector<double> e = embed(feats, params);
      Matrix emb = make_matrix(1, static_cast<int>(e.size()));
      for (size_t k = 0; k < e.size(); ++k) emb.at(0, static_cast<int>(k)) = e[k];
      ClassPrototypes p;
      p.weights = protos;
      const Matrix cos = cosine_logits(emb, p);
      std::vector<double> row(static_cast<size_t>(cos.dim(1)));
      for (int j = 0; j < cos.dim(1); ++j) row[j] = cos.at(0, j);
      pred[i] = classify(row);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    if (errors[i]) {
      throw DataError("validation utterance " + manifest[i].utt_id + ": " +
                      describe(errors[i]));
    }
    const auto it = idx.find(manifest[i].language);
    if (it == idx.end()) {
      throw UnknownLabel("validation label " + manifest[i].language);
    }
    if (pred[i] == it->second) ++correct;
  }
  return static_cast<double>(correct) / n;
}

}  // namespace

TrainResult train(const std::string& train_manifest_path,
                  const std::string& val_manifest_path, const TrainConfig& cfg,
                  const Checkpoint* init, std::ostream* log_stream) {
  cfg.validate();
  const Manifest train_manifest = read_manifest(train_manifest_path);
  if (train_manifest.empty()) throw DataError("empty training manifest");
  Manifest val_manifest;
  if (!val_manifest_path.empty()) val_manifest = read_manifest(val_manifest_path);

  // Class inventory: the init checkpoint's when fine-tuning, otherwise the
  // sorted training languages.
  std::vector<std::string> labels =
      init != nullptr ? init->labels : languages_of(train_manifest);
  if (labels.size() < 2) throw DataError("need at least 2 classes");
  const auto idx = label_index(labels);
  for (const auto& e : train_manifest) {
    if (idx.find(e.language) == idx.end()) {
      throw UnknownLabel("training label " + e.language);
    }
  }
  for (const auto& e : val_manifest) {
    if (idx.find(e.language) == idx.end()) {
      throw UnknownLabel("validation label " + e.language);
    }
  }

  Rng init_rng(Rng::derive_seed(cfg.seed, "init"));
  EncoderParams params = init != nullptr
                             ? init->params
                             : EncoderParams::init(cfg.encoder, &init_rng);
  ClassPrototypes protos =
      init != nullptr
          ? init->prototypes
          : ClassPrototypes::init(static_cast<int>(labels.size()),
                                  params.cfg.embedding_dim, &init_rng);
  const FeatureConfig feat_cfg = init != nullptr ? init->features : cfg.features;
  const double crop_seconds = init != nullptr ? init->crop_seconds : cfg.crop_seconds;
  if (feat_cfg.mel_bands != params.cfg.input_dim) {
    throw ConfigError("mel_bands must equal encoder input_dim");
  }
  TrainConfig run_cfg = cfg;
  run_cfg.features = feat_cfg;
  run_cfg.crop_seconds = crop_seconds;

  WavPool noise_pool, rir_pool;
  if (cfg.epochs > 0 && cfg.augment.apply_probability > 0.0) {
    if (!cfg.augment.noise_dir.empty()) noise_pool = WavPool(cfg.augment.noise_dir);
    if (!cfg.augment.rir_dir.empty()) rir_pool = WavPool(cfg.augment.rir_dir);
    if (noise_pool.empty() && rir_pool.empty()) {
      throw EmptyPool("augmentation enabled but no noise/rir pool given");
    }
  }

  const int n_train = static_cast<int>(train_manifest.size());
  const int batches_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  OptimConfig optim_cfg = cfg.optim;
  optim_cfg.total_steps = std::max(1, cfg.epochs * batches_per_epoch);

  std::vector<NamedTensor> trainable =
      collect_trainable(&params, &protos.weights, cfg.freeze);
  std::vector<Tensor*> param_ptrs;
  for (auto& nt : trainable) param_ptrs.push_back(nt.tensor);
  OptimState opt_state = OptimState::init(param_ptrs);

  TrainResult result;
  auto snapshot = [&](int epoch) {
    Checkpoint c;
    c.params = params;
    c.prototypes = protos;
    c.labels = labels;
    c.features = feat_cfg;
    c.crop_seconds = crop_seconds;
    c.epoch = epoch;
    c.seed = cfg.seed;
    c.head = cfg.head;
    return c;
  };

  double best_val = -2.0;
  result.best = snapshot(0);
  result.best_epoch = 0;

  int64_t attempted = 0, skipped_total = 0;
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[i] = i;
    Rng shuffle_rng(Rng::derive_seed(cfg.seed, "shuffle", epoch));
    for (int i = n_train - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }

    double epoch_loss = 0.0;
    int epoch_samples = 0;
    int epoch_skipped = 0;
    const double lr_first = cosine_lr(step, optim_cfg);

    for (int b = 0; b < batches_per_epoch; ++b) {
      const int lo = b * cfg.batch_size;
      const int hi = std::min(n_train, lo + cfg.batch_size);
      std::vector<UttSlot> slots(static_cast<size_t>(hi - lo));
      parallel_for(hi - lo, worker_count(), [&](int i) {
        prepare_utterance(train_manifest[order[lo + i]], train_manifest_path,
                          run_cfg, noise_pool, rir_pool, true,
                          static_cast<uint64_t>(epoch), &slots[i]);
      });

      std::vector<const FeatureMatrix*> batch;
      std::vector<int> batch_labels;
      for (int i = 0; i < hi - lo; ++i) {
        ++attempted;
        if (slots[i].ok) {
          batch.push_back(&slots[i].feats);
          batch_labels.push_back(
              idx.at(train_manifest[order[lo + i]].language));
        } else if (is_data_error(slots[i].error)) {
          ++skipped_total;
          ++epoch_skipped;
          if (log_stream != nullptr) {
            *log_stream << "warning: skipping "
                        << train_manifest[order[lo + i]].utt_id << ": "
                        << describe(slots[i].error) << '\n';
          }
        } else {
          std::rethrow_exception(slots[i].error);
        }
      }
      if (batch.empty()) {
        ++step;
        continue;
      }

      EncoderCache cache;
      const Matrix emb = encoder_forward(params, batch, Mode::kTrain, &cache);
      const Matrix cos = cosine_logits(emb, protos);
      LossResult loss_res;
      if (cfg.head == "ce") {
        loss_res = ce_loss(cos, batch_labels, cfg.margin.scale_s);
      } else if (cfg.head == "aam") {
        loss_res = aam_loss(cos, batch_labels, cfg.margin);
      } else {
        loss_res = ram_loss(cos, batch_labels, cfg.margin);
      }
      if (!std::isfinite(loss_res.loss)) {
        throw DivergenceError("non-finite loss at epoch " +
                              std::to_string(epoch));
      }
      epoch_loss += loss_res.loss * static_cast<double>(batch.size());
      epoch_samples += static_cast<int>(batch.size());

      const HeadGrads head_grads =
          head_backward_to_embeddings(loss_res.grad_cos, emb, protos);
      EncoderParams enc_grads =
          encoder_backward(params, cache, head_grads.d_embeddings);

      Matrix proto_grad = head_grads.d_prototypes;
      std::vector<NamedTensor> grad_list =
          collect_trainable(&enc_grads, &proto_grad, cfg.freeze);
      std::vector<const Tensor*> grad_ptrs;
      for (auto& nt : grad_list) grad_ptrs.push_back(nt.tensor);

      const double lr = cosine_lr(step, optim_cfg);
      adamw_step(param_ptrs, grad_ptrs, &opt_state, optim_cfg, lr);
      encoder_update_running_stats(&params, cache);
      ++step;
    }
    if (skipped_total * 10 > attempted) {
      throw DataError("more than 10% of utterances were unreadable");
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_samples > 0 ? epoch_loss / epoch_samples : 0.0;
    log.lr_first = lr_first;
    log.skipped = epoch_skipped;
    if (!val_manifest.empty()) {
      log.val_micro = validation_micro(val_manifest, val_manifest_path, params,
                                       protos.weights, labels, feat_cfg,
                                       crop_seconds);
      if (log.val_micro > best_val) {
        best_val = log.val_micro;
        result.best = snapshot(epoch);
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(log);
    if (log_stream != nullptr) {
      char buf[160];
      if (log.val_micro >= 0.0) {
        std::snprintf(buf, sizeof(buf),
                      "epoch %d/%d loss %.6f val_micro %.4f lr %.6g skipped %d",
                      epoch, cfg.epochs, log.train_loss, log.val_micro,
                      log.lr_first, log.skipped);
      } else {
        std::snprintf(buf, sizeof(buf),
                      "epoch %d/%d loss %.6f lr %.6g skipped %d", epoch,
                      cfg.epochs, log.train_loss, log.lr_first, log.skipped);
      }
      *log_stream << buf << '\n';
    }
  }

  if (val_manifest.empty() && cfg.epochs > 0) {
    result.best = snapshot(cfg.epochs);
    result.best_epoch = cfg.epochs;
  }
  return result;
}

// -------------------------------------------------------------- extraction

EmbeddingTable extract_embeddings(const std::string& manifest_path,
                                  const Checkpoint& ckpt) {
  const Manifest manifest = read_manifest(manifest_path);
  EmbeddingTable table;
  const int n = static_cast<int>(manifest.size());
  std::vector<std::vector<double>> rows(static_cast<size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  parallel_for(n, worker_count(), [&](int i) {
    try {
      const std::string path =
          resolve_audio_path(manifest_path, manifest[i].path);
      Waveform wave = load_wav(path);
      const int want =
          static_cast<int>(std::lround(ckpt.crop_seconds * kSampleRateHz));
      Rng rng(0);
      wave = crop_or_pad(wave, want, false, &rng);
      rows[i] = embed(cmvn(log_mel(wave, ckpt.features)), ckpt.params);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (int i = 0; i < n; ++i) {
    if (errors[i]) {
      if (is_data_error(errors[i])) {
        throw DataError(manifest[i].utt_id + ": " + describe(errors[i]));
      }
      std::rethrow_exception(errors[i]);
    }
    table[manifest[i].utt_id] = std::move(rows[i]);
  }
  return table;
}

void write_embedding_table(const std::string& path,
                           const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (const auto& [utt_id, values] : table) {
    out << utt_id;
    for (double v : values) out << ' ' << v;
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

EmbeddingTable read_embedding_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path);
  EmbeddingTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string utt_id;
    ss >> utt_id;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (utt_id.empty() || values.empty()) {
      throw UnsupportedFormat(path + ": bad embedding line");
    }
    table[utt_id] = std::move(values);
  }
  return table;
}

// -------------------------------------------------------------------- tasks

Task1Report run_task1(const std::string& test_manifest_path,
                      const Checkpoint& ckpt,
                      const std::string& out_pred_path) {
  const Manifest manifest = read_manifest(test_manifest_path);
  if (manifest.empty()) throw EmptySet("empty test manifest");
  const auto idx = label_index(ckpt.labels);
  for (const auto& e : manifest) {
    if (idx.find(e.language) == idx.end()) {
      throw UnknownLabel("test label " + e.language +
                         " outside the checkpoint inventory");
    }
  }
  const EmbeddingTable table = extract_embeddings(test_manifest_path, ckpt);

  Task1Report report;
  for (const auto& e : manifest) {
    const auto& emb_values = table.at(e.utt_id);
    Matrix emb = make_matrix(1, static_cast<int>(emb_values.size()));
    for (size_t k = 0; k < emb_values.size(); ++k) {
      emb.at(0, static_cast<int>(k)) = emb_values[k];
    }
    const Matrix cos = cosine_logits(emb, ckpt.prototypes);
    std::vector<double> row(static_cast<size_t>(cos.dim(1)));
    for (int j = 0; j < cos.dim(1); ++j) row[j] = cos.at(0, j);
    const int pred = classify(row);
    report.predictions.push_back(
        {e.utt_id, e.language, ckpt.labels[static_cast<size_t>(pred)]});
  }
  if (!out_pred_path.empty()) {
    write_predictions(out_pred_path, report.predictions);
  }
  report.micro = micro_accuracy(report.predictions);
  report.macro = macro_accuracy(report.predictions, ckpt.labels);
  return report;
}

Task2Report run_task2(const std::string& trials_path,
                      const std::string& enroll_map_path,
                      const std::string& manifest_path, const Checkpoint& ckpt,
                      const std::string& out_scores_path,
                      const std::string& key_path) {
  const auto trials = read_trials(trials_path);
  const auto enroll_map = read_enroll_map(enroll_map_path);
  const EmbeddingTable table = extract_embeddings(manifest_path, ckpt);

  std::map<std::string, std::vector<double>> models;
  for (const auto& [enroll_id, utts] : enroll_map) {
    std::vector<std::vector<double>> embs;
    for (const auto& u : utts) {
      const auto it = table.find(u);
      if (it == table.end()) {
        throw MissingUtterance("enrollment utterance " + u);
      }
      embs.push_back(it->second);
    }
    models[enroll_id] = enroll_model(embs);
  }

  Task2Report report;
  for (const auto& [enroll_id, test_id] : trials) {
    const auto mit = models.find(enroll_id);
    if (mit == models.end()) {
      throw MissingUtterance("enrollment model " + enroll_id);
    }
    const auto tit = table.find(test_id);
    if (tit == table.end()) {
      throw MissingUtterance("test utterance " + test_id);
    }
    ScoreRecord r;
    r.enroll_id = enroll_id;
    r.test_id = test_id;
    r.score = cosine_score(mit->second, tit->second);
    report.scores.push_back(std::move(r));
  }
  if (!out_scores_path.empty()) write_scores(out_scores_path, report.scores);
  if (!key_path.empty()) {
    apply_trial_key(key_path, &report.scores);
    report.eer = compute_eer(report.scores);
  }
  return report;
}

// ------------------------------------------------------------- config file

void load_train_config_file(const std::string& path, TrainConfig* cfg) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open config " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "epochs") cfg->epochs = std::stoi(val);
      else if (key == "batch_size") cfg->batch_size = std::stoi(val);
      else if (key == "head") cfg->head = val;
      else if (key == "margin") cfg->margin.margin_m = std::stod(val);
      else if (key == "scale") cfg->margin.scale_s = std::stod(val);
      else if (key == "lr") cfg->optim.lr0 = std::stod(val);
      else if (key == "weight_decay") cfg->optim.weight_decay = std::stod(val);
      else if (key == "beta1") cfg->optim.beta1 = std::stod(val);
      else if (key == "beta2") cfg->optim.beta2 = std::stod(val);
      else if (key == "adam_eps") cfg->optim.eps = std::stod(val);
      else if (key == "seed") cfg->seed = std::stoull(val);
      else if (key == "crop_seconds") cfg->crop_seconds = std::stod(val);
      else if (key == "augment_prob") cfg->augment.apply_probability = std::stod(val);
      else if (key == "snr_lo") cfg->augment.snr_db_lo = std::stod(val);
      else if (key == "snr_hi") cfg->augment.snr_db_hi = std::stod(val);
      else if (key == "noise_dir") cfg->augment.noise_dir = val;
      else if (key == "rir_dir") cfg->augment.rir_dir = val;
      else if (key == "freeze") cfg->freeze = split_strings(val);
      else if (key == "mel_bands") cfg->features.mel_bands = std::stoi(val);
      else if (key == "frame_length_ms") cfg->features.frame_length_ms = std::stod(val);
      else if (key == "frame_shift_ms") cfg->features.frame_shift_ms = std::stod(val);
      else if (key == "fft_size") cfg->features.fft_size = std::stoi(val);
      else if (key == "fmin_hz") cfg->features.fmin_hz = std::stod(val);
      else if (key == "fmax_hz") cfg->features.fmax_hz = std::stod(val);
      else if (key == "input_dim") cfg->encoder.input_dim = std::stoi(val);
      else if (key == "layer_channels") cfg->encoder.layer_channels = split_ints(val);
      else if (key == "kernel_sizes") cfg->encoder.kernel_sizes = split_ints(val);
      else if (key == "dilations") cfg->encoder.dilations = split_ints(val);
      else if (key == "res2_scale") cfg->encoder.res2_scale = std::stoi(val);
      else if (key == "se_bottleneck") cfg->encoder.se_bottleneck = std::stoi(val);
      else if (key == "attention_hidden") cfg->encoder.attention_hidden = std::stoi(val);
      else if (key == "embedding_dim") cfg->encoder.embedding_dim = std::stoi(val);
      else throw ConfigError(path + ":" + std::to_string(lineno) +
                             ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": bad value for '" + key + "'");
    }
  }
}

}  // namespace slidkit
