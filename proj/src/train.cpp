#include "vdet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>

#include "vdet/metrics.hpp"
#include "vdet/rng.hpp"

namespace vdet {

using nlohmann::json;

std::string_view to_string(ClassWeightMode mode) {
  return mode == ClassWeightMode::none ? "none" : "inverse_freq";
}

std::string_view to_string(InputView view) {
  return view == InputView::plain ? "plain" : "structure";
}

ClassWeightMode parse_class_weight_mode(std::string_view name) {
  if (name == "none") return ClassWeightMode::none;
  if (name == "inverse_freq") return ClassWeightMode::inverse_freq;
  throw Error("unknown class_weight_mode '" + std::string(name) + "'");
}

InputView parse_input_view(std::string_view name) {
  if (name == "plain") return InputView::plain;
  if (name == "structure") return InputView::structure;
  throw Error("unknown input view '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error("lr must be positive");
  if (epochs < 1) throw Error("epochs must be at least 1");
  if (early_stop_patience < 0) throw Error("early_stop_patience must be non-negative");
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw Error("label_smoothing must lie in [0, 1)");
  if (!(grad_clip_norm > 0.0)) throw Error("grad_clip_norm must be positive");
}

json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"grad_clip_norm", grad_clip_norm},
          {"label_smoothing", label_smoothing},
          {"class_weight_mode", std::string(to_string(class_weight_mode))},
          {"oversample", oversample},
          {"seed", seed},
          {"early_stop_patience", early_stop_patience},
          {"view", std::string(to_string(view))}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.label_smoothing = j.at("label_smoothing").get<double>();
  c.class_weight_mode = parse_class_weight_mode(j.at("class_weight_mode").get<std::string>());
  c.oversample = j.at("oversample").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<int>();
  c.view = parse_input_view(j.at("view").get<std::string>());
  return c;
}

EncodeResult encode_sample(const CodeSample& sample, const BpeModel& bpe, InputView view,
                           int max_len) {
  auto unit = normalize(sample.code, sample.language);
  if (view == InputView::structure) unit = structure_view(unit);
  return encode(bpe, unit, sample.language, max_len);
}

std::array<double, 2> compute_class_weights(std::array<std::size_t, 2> counts,
                                            ClassWeightMode mode) {
  if (mode == ClassWeightMode::none) return {1.0, 1.0};
  if (counts[0] == 0 || counts[1] == 0)
    throw Error("inverse-frequency class weights need samples of both classes");
  const double n = static_cast<double>(counts[0] + counts[1]);
  return {n / (2.0 * static_cast<double>(counts[0])), n / (2.0 * static_cast<double>(counts[1]))};
}

std::vector<std::size_t> oversample_indices(const std::vector<int>& labels, std::uint64_t seed) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1 ? 1 : 0].push_back(i);
  if (by_class[0].empty() || by_class[1].empty())
    throw Error("oversampling needs samples of both classes");

  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(2 * std::max(by_class[0].size(), by_class[1].size()));
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back(i);

  // Normally the vulnerable class is the minority; the rule is symmetric.
  const int minority = by_class[1].size() <= by_class[0].size() ? 1 : 0;
  const auto& small = by_class[minority];
  const auto& large = by_class[1 - minority];
  const std::size_t factor = large.size() / small.size();
  for (std::size_t rep = 1; rep < factor; ++rep) out.insert(out.end(), small.begin(), small.end());
  const std::size_t remainder = large.size() - factor * small.size();
  if (remainder > 0) {
    auto pool = small;
    rng.shuffle(pool);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(remainder));
  }
  rng.shuffle(out);
  return out;
}

std::vector<CodeSample> oversample(const std::vector<CodeSample>& samples, std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  std::vector<CodeSample> out;
  for (auto i : oversample_indices(labels, seed)) out.push_back(samples[i]);
  return out;
}

std::vector<double> predict_sequences(const Parameters& params,
                                      const std::vector<std::vector<int>>& sequences,
                                      std::size_t batch_size) {
  // Padding cannot change logits, so sequences are grouped by length to keep
  // batches tight; outputs are written back in input order.
  std::vector<std::size_t> order(sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sequences[a].size() < sequences[b].size();
  });
  std::vector<double> out(sequences.size());
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<std::vector<int>> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(sequences[order[i]]);
    auto result = forward(params, Batch::from_sequences(chunk, special::pad));
    for (std::size_t i = start; i < end; ++i) {
      const float* z = result.logits.row(i - start);
      out[order[i]] = positive_probability(z[0], z[1]);
    }
  }
  return out;
}

namespace {

struct Example {
  std::vector<int> ids;
  int label;
};

std::vector<Example> encode_all(const std::vector<CodeSample>& samples, const BpeModel& bpe,
                                InputView view, int max_len) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({encode_sample(s, bpe, view, max_len).ids, s.label});
  return out;
}

double validation_f1(const Parameters& params, const std::vector<Example>& val) {
  std::vector<std::vector<int>> seqs;
  std::vector<int> labels;
  for (const auto& e : val) {
    seqs.push_back(e.ids);
    labels.push_back(e.label);
  }
  const auto probs = predict_sequences(params, seqs);
  std::vector<int> predicted;
  for (double p : probs) predicted.push_back(p >= 0.5 ? 1 : 0);
  return metrics(confusion(predicted, labels)).f1;
}

class Adam {
 public:
  Adam(const Parameters& params, const TrainConfig& cfg) : cfg_(cfg) {
    params.visit([&](const std::string&, const Tensor& t) {
      m_.emplace_back(t.size(), 0.0f);
      v_.emplace_back(t.size(), 0.0f);
    });
  }

  void step(Parameters& params, const Parameters& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::vector<const Tensor*> g;
    grads.visit([&](const std::string&, const Tensor& t) { g.push_back(&t); });
    const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    const float lr = static_cast<float>(cfg_.lr), eps = static_cast<float>(cfg_.adam_eps);
    const float inv_bc1 = static_cast<float>(1.0 / bc1), inv_bc2 = static_cast<float>(1.0 / bc2);
    std::size_t k = 0;
    params.visit([&](const std::string&, Tensor& p) {
      auto& m = m_[k];
      auto& v = v_[k];
      const auto& gd = g[k]->data;
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * gd[i];
        v[i] = b2 * v[i] + (1.0f - b2) * gd[i] * gd[i];
        const float mhat = m[i] * inv_bc1;
        const float vhat = v[i] * inv_bc2;
        p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      ++k;
    });
    ++params.version;
  }

 private:
  TrainConfig cfg_;
  std::vector<std::vector<float>> m_, v_;
  std::uint64_t t_ = 0;
};

void clip_gradients(Parameters& grads, double max_norm) {
  double sq = 0.0;
  grads.visit([&](const std::string&, const Tensor& t) {
    for (float v : t.data) sq += static_cast<double>(v) * v;
  });
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const float scale = static_cast<float>(max_norm / norm);
  grads.visit([&](const std::string&, Tensor& t) {
    for (auto& v : t.data) v *= scale;
  });
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.8f", v);
  return buf;
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, const SplitAssignment& assignment,
                  const BpeModel& bpe, const ModelConfig& model_config,
                  const TrainConfig& cfg) {
  cfg.validate();
  ModelConfig mcfg = model_config;
  mcfg.vocab_size = bpe.vocab_size();
  mcfg.validate();

  const auto train_samples = select_split(manifest, assignment, Split::train);
  const auto val_samples = select_split(manifest, assignment, Split::val);
  if (train_samples.empty()) throw Error("the train split is empty");
  if (val_samples.empty()) throw Error("the validation split is empty");

  const auto train_set = encode_all(train_samples, bpe, cfg.view, mcfg.max_len);
  const auto val_set = encode_all(val_samples, bpe, cfg.view, mcfg.max_len);
  std::vector<int> train_labels;
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& e : train_set) {
    train_labels.push_back(e.label);
    ++counts[e.label];
  }
  // Weights come from the split as collected; oversampling is applied on top.
  const auto weights = compute_class_weights(counts, cfg.class_weight_mode);

  Parameters params = init_parameters(mcfg, derive_seed(cfg.seed, "init"));
  Adam adam(params, cfg);
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

  TrainResult result;
  Parameters best = params;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int since_improvement = 0;
  std::size_t global_step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::string epoch_tag = "/epoch" + std::to_string(epoch);
    std::vector<std::size_t> order;
    if (cfg.oversample) {
      order = oversample_indices(train_labels, derive_seed(cfg.seed, "oversample" + epoch_tag));
    } else {
      order.resize(train_set.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng shuffle_rng(derive_seed(cfg.seed, "shuffle" + epoch_tag));
      shuffle_rng.shuffle(order);
    }

    std::vector<double> step_losses;
    double weighted_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::vector<int>> seqs;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        seqs.push_back(train_set[order[i]].ids);
        labels.push_back(train_set[order[i]].label);
      }
      ++global_step;
      auto fwd = forward(params, Batch::from_sequences(seqs, special::pad),
                         ForwardOptions{true, &dropout_rng});
      auto loss = loss_ce_smooth(fwd.logits, labels, cfg.label_smoothing, weights);
      if (!std::isfinite(loss.loss))
        throw Error("non-finite training loss at step " + std::to_string(global_step));
      auto grads = backward(params, fwd.trace, loss.dlogits);
      clip_gradients(grads, cfg.grad_clip_norm);
      adam.step(params, grads);
      step_losses.push_back(loss.loss);
      weighted_sum += loss.loss * static_cast<double>(end - start);
    }

    EpochLog log_row;
    log_row.epoch = epoch;
    log_row.avg_train_loss = weighted_sum / static_cast<double>(order.size());
    log_row.val_f1 = validation_f1(params, val_set);
    result.epochs.push_back(log_row);
    result.final_epoch_step_losses = step_losses;
    log::info("epoch " + std::to_string(epoch) + " loss " + format_double(log_row.avg_train_loss) +
              " val_f1 " + format_double(log_row.val_f1));

    if (log_row.val_f1 > best_f1) {
      best_f1 = log_row.val_f1;
      best = params;
      best_epoch = epoch;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (cfg.early_stop_patience > 0 && since_improvement >= cfg.early_stop_patience) {
      log::info("early stop after epoch " + std::to_string(epoch));
      break;
    }
  }

  best.version = 0;
  result.checkpoint.params = std::move(best);
  result.checkpoint.tokenizer_hash = bpe.content_hash();
  result.checkpoint.train = cfg;
  result.checkpoint.meta.epochs_run = static_cast<int>(result.epochs.size());
  result.checkpoint.meta.best_epoch = best_epoch;
  result.checkpoint.meta.best_val_f1 = best_f1;
  result.checkpoint.meta.seed = cfg.seed;
  return result;
}

void write_loss_logs(const std::string& dir, const TrainResult& result,
                     const std::string& prefix) {
  std::string per_epoch = "epoch,avg_train_loss,val_f1\n";
  for (const auto& e : result.epochs) {
    per_epoch += std::to_string(e.epoch) + "," + format_double(e.avg_train_loss) + "," +
                 format_double(e.val_f1) + "\n";
  }
  std::string final_epoch = "step,loss\n";
  for (std::size_t i = 0; i < result.final_epoch_step_losses.size(); ++i) {
    final_epoch += std::to_string(i + 1) + "," + format_double(result.final_epoch_step_losses[i]) + "\n";
  }
  write_file(dir + "/" + prefix + "loss_per_epoch.csv", per_epoch);
  write_file(dir + "/" + prefix + "loss_final_epoch.csv", final_epoch);
}

namespace {

constexpr char kMagic[4] = {'V', 'D', 'E', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const ModelCheckpoint& ckpt) {
  std::map<std::string, const Tensor*> tensors;
  ckpt.params.visit([&](const std::string& name, const Tensor& t) { tensors.emplace(name, &t); });

  json table = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const std::size_t bytes = t->size() * 4;
    table.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset}, {"length", bytes}});
    offset += bytes;
  }
  json header = {{"model", ckpt.params.config.to_json()},
                 {"train", ckpt.train.to_json()},
                 {"tokenizer_hash", ckpt.tokenizer_hash},
                 {"meta",
                  {{"epochs_run", ckpt.meta.epochs_run},
                   {"best_epoch", ckpt.meta.best_epoch},
                   {"best_val_f1", ckpt.meta.best_val_f1},
                   {"seed", ckpt.meta.seed}}},
                 {"tensors", table}};
  const std::string header_text = header.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  out.reserve(out.size() + offset);
  for (const auto& [_, t] : tensors) {
    for (float v : t->data) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  }
  return out;
}

ModelCheckpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 12) throw Error("checkpoint is truncated: missing header");
  if (bytes.substr(0, 4) != std::string_view(kMagic, 4))
    throw Error("not a checkpoint: bad magic bytes");
  const auto version = get_u32(bytes, 4);
  if (version != kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
    throw Error("checkpoint is truncated: header incomplete");

  json header;
  try {
    header = json::parse(bytes.substr(12, header_len));
  } catch (const json::parse_error& e) {
    throw Error(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  ModelCheckpoint ckpt;
  try {
    const auto mcfg = ModelConfig::from_json(header.at("model"));
    ckpt.params = Parameters::zeros(mcfg);
    ckpt.train = TrainConfig::from_json(header.at("train"));
    ckpt.tokenizer_hash = header.at("tokenizer_hash").get<std::string>();
    const auto& meta = header.at("meta");
    ckpt.meta.epochs_run = meta.at("epochs_run").get<int>();
    ckpt.meta.best_epoch = meta.at("best_epoch").get<int>();
    ckpt.meta.best_val_f1 = meta.at("best_val_f1").get<double>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint header is incomplete: ") + e.what());
  }

  std::map<std::string, Tensor*> expected;
  ckpt.params.visit([&](const std::string& name, Tensor& t) { expected.emplace(name, &t); });
  std::set<std::string> loaded;
  const std::string_view data = bytes.substr(12 + header_len);
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    auto it = expected.find(name);
    if (it == expected.end()) throw Error("checkpoint holds unexpected tensor '" + name + "'");
    Tensor& t = *it->second;
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != t.shape)
      throw Error("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                  ", expected " + shape_string(t.shape));
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto length = entry.at("length").get<std::size_t>();
    if (length != t.size() * 4)
      throw Error("checkpoint tensor '" + name + "' has inconsistent byte length");
    if (offset + length > data.size())
      throw Error("checkpoint is truncated: tensor '" + name + "' is missing");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint32_t bits = get_u32(data, offset + 4 * i);
      std::memcpy(&t.data[i], &bits, 4);
    }
    loaded.insert(name);
  }
  for (const auto& [name, _] : expected) {
    if (!loaded.count(name)) throw Error("checkpoint is missing tensor '" + name + "'");
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& checkpoint) {
  write_file(path, serialize_checkpoint(checkpoint));
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace vdet
