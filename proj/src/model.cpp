#include "vdet/model.hpp"

#include <algorithm>
#include <cmath>

namespace vdet {

using nlohmann::json;

void ModelConfig::validate() const {
  if (vocab_size < 1 || d_model < 1 || n_heads < 1 || n_layers < 1 || d_ffn < 1 || max_len < 1)
    throw Error("model dimensions must all be at least 1");
  if (d_model % n_heads != 0) throw Error("d_model must be divisible by n_heads");
  if (n_classes != 2) throw Error("the classifier is binary: n_classes must be 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
}

json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"d_model", d_model}, {"n_heads", n_heads},
          {"n_layers", n_layers},     {"d_ffn", d_ffn},     {"max_len", max_len},
          {"dropout", dropout},       {"n_classes", n_classes}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.d_ffn = j.at("d_ffn").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.n_classes = j.at("n_classes").get<int>();
  return c;
}

template <typename S>
BasicParameters<S> BasicParameters<S>::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model, f = config.d_ffn;
  BasicParameters p;
  p.config = config;
  p.token_embedding = BasicTensor<S>({static_cast<std::size_t>(config.vocab_size), d});
  p.position_embedding = BasicTensor<S>({static_cast<std::size_t>(config.max_len), d});
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    for (auto* w : {&l.query_w, &l.key_w, &l.value_w, &l.output_w}) *w = BasicTensor<S>({d, d});
    for (auto* b : {&l.query_b, &l.key_b, &l.value_b, &l.output_b, &l.norm1_gain, &l.norm1_bias,
                    &l.ffn_out_b, &l.norm2_gain, &l.norm2_bias})
      *b = BasicTensor<S>({d});
    l.ffn_in_w = BasicTensor<S>({d, f});
    l.ffn_in_b = BasicTensor<S>({f});
    l.ffn_out_w = BasicTensor<S>({f, d});
  }
  p.pooler_w = BasicTensor<S>({d, d});
  p.pooler_b = BasicTensor<S>({d});
  p.classifier_w = BasicTensor<S>({d, static_cast<std::size_t>(config.n_classes)});
  p.classifier_b = BasicTensor<S>({static_cast<std::size_t>(config.n_classes)});
  return p;
}

namespace {

template <typename P, typename F>
void visit_impl(P& p, F&& fn) {
  fn("embeddings.token", p.token_embedding);
  fn("embeddings.position", p.position_embedding);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layers." + std::to_string(i) + ".";
    fn(pre + "attention.query.weight", l.query_w);
    fn(pre + "attention.query.bias", l.query_b);
    fn(pre + "attention.key.weight", l.key_w);
    fn(pre + "attention.key.bias", l.key_b);
    fn(pre + "attention.value.weight", l.value_w);
    fn(pre + "attention.value.bias", l.value_b);
    fn(pre + "attention.output.weight", l.output_w);
    fn(pre + "attention.output.bias", l.output_b);
    fn(pre + "norm1.gain", l.norm1_gain);
    fn(pre + "norm1.bias", l.norm1_bias);
    fn(pre + "ffn.in.weight", l.ffn_in_w);
    fn(pre + "ffn.in.bias", l.ffn_in_b);
    fn(pre + "ffn.out.weight", l.ffn_out_w);
    fn(pre + "ffn.out.bias", l.ffn_out_b);
    fn(pre + "norm2.gain", l.norm2_gain);
    fn(pre + "norm2.bias", l.norm2_bias);
  }
  fn("pooler.weight", p.pooler_w);
  fn("pooler.bias", p.pooler_b);
  fn("classifier.weight", p.classifier_w);
  fn("classifier.bias", p.classifier_b);
}

}  // namespace

template <typename S>
void BasicParameters<S>::visit(
    const std::function<void(const std::string&, BasicTensor<S>&)>& fn) {
  visit_impl(*this, fn);
}

template <typename S>
void BasicParameters<S>::visit(
    const std::function<void(const std::string&, const BasicTensor<S>&)>& fn) const {
  visit_impl(*this, fn);
}

template <typename S>
std::size_t BasicParameters<S>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const BasicTensor<S>& t) { n += t.size(); });
  return n;
}

template <typename To, typename From>
BasicParameters<To> cast_parameters(const BasicParameters<From>& params) {
  auto out = BasicParameters<To>::zeros(params.config);
  std::vector<const BasicTensor<From>*> src;
  params.visit([&](const std::string&, const BasicTensor<From>& t) { src.push_back(&t); });
  std::size_t i = 0;
  out.visit([&](const std::string&, BasicTensor<To>& t) {
    const auto& s = *src[i++];
    std::transform(s.data.begin(), s.data.end(), t.data.begin(),
                   [](From v) { return static_cast<To>(v); });
  });
  out.version = params.version;
  return out;
}

Parameters init_parameters(const ModelConfig& config, std::uint64_t seed, double stddev) {
  auto p = Parameters::zeros(config);
  Rng rng(seed);
  auto normal = [&](Tensor& t) {
    for (auto& v : t.data) v = static_cast<float>(rng.normal() * stddev);
  };
  normal(p.token_embedding);
  normal(p.position_embedding);
  for (auto& l : p.layers) {
    normal(l.query_w);
    normal(l.key_w);
    normal(l.value_w);
    normal(l.output_w);
    normal(l.ffn_in_w);
    normal(l.ffn_out_w);
    l.norm1_gain.fill(1.0f);
    l.norm2_gain.fill(1.0f);
  }
  normal(p.pooler_w);
  normal(p.classifier_w);
  return p;
}

Batch Batch::from_sequences(const std::vector<std::vector<int>>& sequences, int pad_id) {
  Batch b;
  b.size = sequences.size();
  for (const auto& s : sequences) b.seq_len = std::max(b.seq_len, s.size());
  b.ids.assign(b.size * b.seq_len, pad_id);
  b.mask.assign(b.size * b.seq_len, 0);
  for (std::size_t i = 0; i < b.size; ++i) {
    std::copy(sequences[i].begin(), sequences[i].end(), b.ids.begin() + i * b.seq_len);
    std::fill_n(b.mask.begin() + i * b.seq_len, sequences[i].size(), std::uint8_t{1});
  }
  return b;
}

double positive_probability(double logit0, double logit1) {
  const double m = std::max(logit0, logit1);
  const double e0 = std::exp(logit0 - m), e1 = std::exp(logit1 - m);
  return e1 / (e0 + e1);
}

namespace {

constexpr double kNormEps = 1e-5;

template <typename S>
void linear_forward(const S* x, std::size_t rows, const BasicTensor<S>& w,
                    const BasicTensor<S>& b, S* y) {
  const std::size_t in = w.shape[0], out = w.shape[1];
  for (std::size_t r = 0; r < rows; ++r) std::copy(b.data.begin(), b.data.end(), y + r * out);
  ops::matmul(x, w.data.data(), y, rows, in, out, /*accumulate=*/true);
}

// dx is overwritten unless accumulate is set.
template <typename S>
void linear_backward(const S* dy, const S* x, std::size_t rows, const BasicTensor<S>& w,
                     BasicTensor<S>& dw, BasicTensor<S>& db, S* dx, bool accumulate) {
  const std::size_t in = w.shape[0], out = w.shape[1];
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out; ++j) db.data[j] += dy[r * out + j];
  ops::matmul_at_b_acc(x, dy, dw.data.data(), rows, in, out);
  if (dx != nullptr) ops::matmul_a_bt(dy, w.data.data(), dx, rows, out, in, accumulate);
}

template <typename S>
void layer_norm_forward(const std::vector<S>& x, std::size_t rows, std::size_t d,
                        const BasicTensor<S>& gain, const BasicTensor<S>& bias,
                        std::vector<S>& y, std::vector<S>& xhat, std::vector<S>& rstd) {
  y.resize(rows * d);
  xhat.resize(rows * d);
  rstd.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x.data() + r * d;
    S mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<S>(d);
    S var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<S>(d);
    const S rs = S(1) / std::sqrt(var + static_cast<S>(kNormEps));
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const S xh = (xr[j] - mean) * rs;
      xhat[r * d + j] = xh;
      y[r * d + j] = gain.data[j] * xh + bias.data[j];
    }
  }
}

template <typename S>
void layer_norm_backward(const std::vector<S>& dy, const std::vector<S>& xhat,
                         const std::vector<S>& rstd, std::size_t rows, std::size_t d,
                         const BasicTensor<S>& gain, BasicTensor<S>& dgain, BasicTensor<S>& dbias,
                         std::vector<S>& dx) {
  dx.resize(rows * d);
  std::vector<S> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* dyr = dy.data() + r * d;
    const S* xh = xhat.data() + r * d;
    S mean1 = 0, mean2 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      dgain.data[j] += dyr[j] * xh[j];
      dbias.data[j] += dyr[j];
      dxhat[j] = dyr[j] * gain.data[j];
      mean1 += dxhat[j];
      mean2 += dxhat[j] * xh[j];
    }
    mean1 /= static_cast<S>(d);
    mean2 /= static_cast<S>(d);
    for (std::size_t j = 0; j < d; ++j) dx[r * d + j] = rstd[r] * (dxhat[j] - mean1 - xh[j] * mean2);
  }
}

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / std::sqrt(S(2))));
}

template <typename S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / std::sqrt(S(2))));
  const S pdf = std::exp(S(-0.5) * x * x) / std::sqrt(S(2) * S(3.14159265358979323846));
  return cdf + x * pdf;
}

// Inverted dropout: the returned mask holds 0 or 1/(1-p) and is applied in place.
template <typename S>
std::vector<S> apply_dropout(std::vector<S>& x, double p, const ForwardOptions& opt) {
  if (!opt.training || p <= 0.0) return {};
  if (opt.rng == nullptr) throw Error("dropout in training mode requires a seeded generator");
  std::vector<S> mask(x.size());
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = opt.rng->uniform() < p ? S(0) : scale;
    x[i] *= mask[i];
  }
  return mask;
}

template <typename S>
void apply_mask(std::vector<S>& x, const std::vector<S>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

template <typename S>
void check_shape(const BasicTensor<S>& t, const std::vector<std::size_t>& expected,
                 const std::string& name) {
  if (t.shape != expected)
    throw Error("tensor '" + name + "' has shape " + shape_string(t.shape) + ", expected " +
                shape_string(expected));
}

template <typename S>
void check_parameter_shapes(const BasicParameters<S>& params) {
  const auto expected = BasicParameters<S>::zeros(params.config);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> shapes;
  expected.visit([&](const std::string& name, const BasicTensor<S>& t) {
    shapes.emplace_back(name, t.shape);
  });
  std::size_t i = 0;
  if (params.layers.size() != static_cast<std::size_t>(params.config.n_layers))
    throw Error("parameter layer count does not match the model config");
  params.visit([&](const std::string& name, const BasicTensor<S>& t) {
    check_shape(t, shapes[i++].second, name);
  });
}

}  // namespace

template <typename S>
ForwardResult<S> forward(const BasicParameters<S>& params, const Batch& batch,
                         const ForwardOptions& options) {
  const auto& cfg = params.config;
  check_parameter_shapes(params);
  const std::size_t T = batch.seq_len, d = cfg.d_model, H = cfg.n_heads, dh = d / H,
                    F = cfg.d_ffn, C = cfg.n_classes;
  if (batch.ids.size() != batch.size * T || batch.mask.size() != batch.size * T)
    throw Error("tensor 'batch' has inconsistent id/mask sizes");
  if (T > static_cast<std::size_t>(cfg.max_len))
    throw Error("tensor 'batch' has sequence length " + std::to_string(T) + " > max_len " +
                std::to_string(cfg.max_len));
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  ForwardResult<S> result;
  result.logits = BasicTensor<S>({batch.size, C});
  auto& trace = result.trace;
  trace.params = &params;
  trace.params_version = params.version;
  trace.batch = batch.size;
  trace.seq_len = T;
  trace.n_heads = cfg.n_heads;
  trace.samples.resize(batch.size);

  for (std::size_t b = 0; b < batch.size; ++b) {
    auto& sc = trace.samples[b];
    sc.ids.assign(batch.ids.begin() + b * T, batch.ids.begin() + (b + 1) * T);
    sc.mask.assign(batch.mask.begin() + b * T, batch.mask.begin() + (b + 1) * T);
    if (T == 0 || !sc.mask[0]) throw Error("tensor 'batch' row " + std::to_string(b) + " is empty");

    std::vector<S> h(T * d);
    for (std::size_t t = 0; t < T; ++t) {
      const int id = sc.ids[t];
      if (id < 0 || id >= cfg.vocab_size)
        throw Error("tensor 'batch' holds id " + std::to_string(id) + " outside the vocabulary");
      const S* te = params.token_embedding.row(id);
      const S* pe = params.position_embedding.row(t);
      for (std::size_t j = 0; j < d; ++j) h[t * d + j] = te[j] + pe[j];
    }
    sc.embed_drop = apply_dropout(h, cfg.dropout, options);

    sc.layers.resize(cfg.n_layers);
    for (std::size_t li = 0; li < sc.layers.size(); ++li) {
      const auto& lp = params.layers[li];
      auto& lc = sc.layers[li];
      lc.input = h;
      lc.q.resize(T * d);
      lc.k.resize(T * d);
      lc.v.resize(T * d);
      linear_forward(h.data(), T, lp.query_w, lp.query_b, lc.q.data());
      linear_forward(h.data(), T, lp.key_w, lp.key_b, lc.k.data());
      linear_forward(h.data(), T, lp.value_w, lp.value_b, lc.v.data());

      lc.probs.assign(H * T * T, S(0));
      lc.ctx.assign(T * d, S(0));
      for (std::size_t hd = 0; hd < H; ++hd) {
        const std::size_t off = hd * dh;
        for (std::size_t i = 0; i < T; ++i) {
          S* prow = lc.probs.data() + (hd * T + i) * T;
          const S* qi = lc.q.data() + i * d + off;
          S mx = static_cast<S>(kMaskedScore);
          for (std::size_t j = 0; j < T; ++j) {
            S s;
            if (sc.mask[j]) {
              const S* kj = lc.k.data() + j * d + off;
              S dot = 0;
              for (std::size_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
              s = dot * scale;
            } else {
              s = static_cast<S>(kMaskedScore);
            }
            prow[j] = s;
            mx = std::max(mx, s);
          }
          S sum = 0;
          for (std::size_t j = 0; j < T; ++j) {
            prow[j] = std::exp(prow[j] - mx);
            sum += prow[j];
          }
          for (std::size_t j = 0; j < T; ++j) prow[j] /= sum;
          S* ci = lc.ctx.data() + i * d + off;
          for (std::size_t j = 0; j < T; ++j) {
            const S pj = prow[j];
            const S* vj = lc.v.data() + j * d + off;
            for (std::size_t c = 0; c < dh; ++c) ci[c] += pj * vj[c];
          }
        }
      }

      std::vector<S> a(T * d);
      linear_forward(lc.ctx.data(), T, lp.output_w, lp.output_b, a.data());
      lc.attn_drop = apply_dropout(a, cfg.dropout, options);
      std::vector<S> r1(T * d);
      for (std::size_t i = 0; i < T * d; ++i) r1[i] = h[i] + a[i];
      layer_norm_forward(r1, T, d, lp.norm1_gain, lp.norm1_bias, lc.y1, lc.xhat1, lc.rstd1);

      lc.f1.resize(T * F);
      linear_forward(lc.y1.data(), T, lp.ffn_in_w, lp.ffn_in_b, lc.f1.data());
      lc.g.resize(T * F);
      for (std::size_t i = 0; i < T * F; ++i) lc.g[i] = gelu(lc.f1[i]);
      std::vector<S> f2(T * d);
      linear_forward(lc.g.data(), T, lp.ffn_out_w, lp.ffn_out_b, f2.data());
      lc.ffn_drop = apply_dropout(f2, cfg.dropout, options);
      std::vector<S> r2(T * d);
      for (std::size_t i = 0; i < T * d; ++i) r2[i] = lc.y1[i] + f2[i];
      layer_norm_forward(r2, T, d, lp.norm2_gain, lp.norm2_bias, h, lc.xhat2, lc.rstd2);
    }

    sc.cls.assign(h.begin(), h.begin() + d);
    std::vector<S> pre(d);
    linear_forward(sc.cls.data(), 1, params.pooler_w, params.pooler_b, pre.data());
    sc.pooled.resize(d);
    for (std::size_t j = 0; j < d; ++j) sc.pooled[j] = std::tanh(pre[j]);
    sc.pooled_out = sc.pooled;
    sc.pool_drop = apply_dropout(sc.pooled_out, cfg.dropout, options);
    linear_forward(sc.pooled_out.data(), 1, params.classifier_w, params.classifier_b,
                   result.logits.row(b));
  }
  return result;
}

template <typename S>
LossResult<S> loss_ce_smooth(const BasicTensor<S>& logits, std::span<const int> labels,
                             double epsilon, std::array<double, 2> class_weights) {
  constexpr int K = 2;
  if (logits.shape.size() != 2 || logits.shape[1] != K)
    throw Error("tensor 'logits' has shape " + shape_string(logits.shape) + ", expected [B, 2]");
  const std::size_t B = logits.shape[0];
  if (labels.size() != B) throw Error("tensor 'labels' does not match the batch size");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw Error("label smoothing must lie in [0, 1)");

  LossResult<S> out;
  out.dlogits = BasicTensor<S>({B, K});
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
    const double z0 = logits.data[b * K], z1 = logits.data[b * K + 1];
    const double p1 = positive_probability(z0, z1);
    const double p[K] = {1.0 - p1, p1};
    const double w = class_weights[y];
    double sample_loss = 0.0;
    for (int k = 0; k < K; ++k) {
      const double q = (1.0 - epsilon) * (k == y ? 1.0 : 0.0) + epsilon / K;
      sample_loss -= q * std::log(std::max(p[k], 1e-12));
      out.dlogits.data[b * K + k] = static_cast<S>(w * (p[k] - q) / static_cast<double>(B));
    }
    total += w * sample_loss;
  }
  out.loss = total / static_cast<double>(B);
  return out;
}

template <typename S>
BasicParameters<S> backward(const BasicParameters<S>& params, const BasicForwardTrace<S>& trace,
                            const BasicTensor<S>& dlogits) {
  if (trace.params != &params || trace.params_version != params.version)
    throw Error("stale forward trace: parameters changed since the forward pass");
  const auto& cfg = params.config;
  const std::size_t T = trace.seq_len, d = cfg.d_model, H = cfg.n_heads, dh = d / H,
                    F = cfg.d_ffn, C = cfg.n_classes;
  if (dlogits.shape != std::vector<std::size_t>{trace.batch, C})
    throw Error("tensor 'dlogits' has shape " + shape_string(dlogits.shape) + ", expected " +
                shape_string({trace.batch, C}));
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  auto grads = BasicParameters<S>::zeros(cfg);

  for (std::size_t b = 0; b < trace.batch; ++b) {
    const auto& sc = trace.samples[b];
    const S* dlog = dlogits.row(b);

    std::vector<S> dpooled(d);
    linear_backward(dlog, sc.pooled_out.data(), 1, params.classifier_w, grads.classifier_w,
                    grads.classifier_b, dpooled.data(), false);
    apply_mask(dpooled, sc.pool_drop);
    for (std::size_t j = 0; j < d; ++j) dpooled[j] *= S(1) - sc.pooled[j] * sc.pooled[j];
    std::vector<S> dh_cur(T * d, S(0));
    linear_backward(dpooled.data(), sc.cls.data(), 1, params.pooler_w, grads.pooler_w,
                    grads.pooler_b, dh_cur.data(), false);

    std::vector<S> dr, dy1, dgact(T * F), df2(T * d), dctx(T * d), dq(T * d), dk(T * d),
        dv(T * d), dP(T), dh_in;
    for (std::size_t li = sc.layers.size(); li-- > 0;) {
      const auto& lp = params.layers[li];
      auto& lg = grads.layers[li];
      const auto& lc = sc.layers[li];

      layer_norm_backward(dh_cur, lc.xhat2, lc.rstd2, T, d, lp.norm2_gain, lg.norm2_gain,
                          lg.norm2_bias, dr);
      dy1 = dr;
      df2 = dr;
      apply_mask(df2, lc.ffn_drop);
      linear_backward(df2.data(), lc.g.data(), T, lp.ffn_out_w, lg.ffn_out_w, lg.ffn_out_b,
                      dgact.data(), false);
      for (std::size_t i = 0; i < T * F; ++i) dgact[i] *= gelu_grad(lc.f1[i]);
      linear_backward(dgact.data(), lc.y1.data(), T, lp.ffn_in_w, lg.ffn_in_w, lg.ffn_in_b,
                      dy1.data(), true);

      layer_norm_backward(dy1, lc.xhat1, lc.rstd1, T, d, lp.norm1_gain, lg.norm1_gain,
                          lg.norm1_bias, dr);
      dh_in = dr;
      apply_mask(dr, lc.attn_drop);
      linear_backward(dr.data(), lc.ctx.data(), T, lp.output_w, lg.output_w, lg.output_b,
                      dctx.data(), false);

      std::fill(dq.begin(), dq.end(), S(0));
      std::fill(dk.begin(), dk.end(), S(0));
      std::fill(dv.begin(), dv.end(), S(0));
      for (std::size_t hd = 0; hd < H; ++hd) {
        const std::size_t off = hd * dh;
        for (std::size_t i = 0; i < T; ++i) {
          const S* prow = lc.probs.data() + (hd * T + i) * T;
          const S* dci = dctx.data() + i * d + off;
          S dot_sum = 0;
          for (std::size_t j = 0; j < T; ++j) {
            const S* vj = lc.v.data() + j * d + off;
            S acc = 0;
            for (std::size_t c = 0; c < dh; ++c) acc += dci[c] * vj[c];
            dP[j] = acc;
            dot_sum += prow[j] * acc;
            S* dvj = dv.data() + j * d + off;
            const S pij = prow[j];
            for (std::size_t c = 0; c < dh; ++c) dvj[c] += pij * dci[c];
          }
          const S* qi = lc.q.data() + i * d + off;
          S* dqi = dq.data() + i * d + off;
          for (std::size_t j = 0; j < T; ++j) {
            const S ds = prow[j] * (dP[j] - dot_sum) * scale;
            if (ds == S(0)) continue;
            const S* kj = lc.k.data() + j * d + off;
            S* dkj = dk.data() + j * d + off;
            for (std::size_t c = 0; c < dh; ++c) {
              dqi[c] += ds * kj[c];
              dkj[c] += ds * qi[c];
            }
          }
        }
      }
      linear_backward(dq.data(), lc.input.data(), T, lp.query_w, lg.query_w, lg.query_b,
                      dh_in.data(), true);
      linear_backward(dk.data(), lc.input.data(), T, lp.key_w, lg.key_w, lg.key_b, dh_in.data(),
                      true);
      linear_backward(dv.data(), lc.input.data(), T, lp.value_w, lg.value_w, lg.value_b,
                      dh_in.data(), true);
      dh_cur.swap(dh_in);
    }

    apply_mask(dh_cur, sc.embed_drop);
    for (std::size_t t = 0; t < T; ++t) {
      S* te = grads.token_embedding.row(sc.ids[t]);
      S* pe = grads.position_embedding.row(t);
      for (std::size_t j = 0; j < d; ++j) {
        te[j] += dh_cur[t * d + j];
        pe[j] += dh_cur[t * d + j];
      }
    }
  }
  return grads;
}

#define VDET_INSTANTIATE(S)                                                                   \
  template struct BasicParameters<S>;                                                         \
  template ForwardResult<S> forward<S>(const BasicParameters<S>&, const Batch&,               \
                                       const ForwardOptions&);                                \
  template LossResult<S> loss_ce_smooth<S>(const BasicTensor<S>&, std::span<const int>,       \
                                           double, std::array<double, 2>);                    \
  template BasicParameters<S> backward<S>(const BasicParameters<S>&,                          \
                                          const BasicForwardTrace<S>&, const BasicTensor<S>&);

VDET_INSTANTIATE(float)
VDET_INSTANTIATE(double)
#undef VDET_INSTANTIATE

template BasicParameters<double> cast_parameters<double, float>(const BasicParameters<float>&);
template BasicParameters<float> cast_parameters<float, double>(const BasicParameters<double>&);
template BasicParameters<float> cast_parameters<float, float>(const BasicParameters<float>&);

}  // namespace vdet
