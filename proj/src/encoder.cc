// Copyright 2026 The docre Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "docre/encoder.h"

#include <algorithm>
#include <cmath>

#include "docre/rng.h"

namespace docre {

using nlohmann::json;

void EncoderParams::Validate() const {
  if (hidden_dim <= 0 || layers < 0 || heads <= 0 || ff_dim <= 0 ||
      max_length <= 0 || vocab_size <= 0) {
    throw std::invalid_argument("encoder params: dimensions must be positive");
  }
  if (hidden_dim % heads != 0) {
    throw std::invalid_argument("encoder params: hidden_dim must be divisible by heads");
  }
}

json ToJson(const EncoderParams& p) {
  return {{"hidden_dim", p.hidden_dim}, {"layers", p.layers},
          {"heads", p.heads},           {"ff_dim", p.ff_dim},
          {"max_length", p.max_length}, {"vocab_size", p.vocab_size},
          {"seed", p.seed}};
}

EncoderParams EncoderParamsFromJson(const json& j) {
  EncoderParams p;
  p.hidden_dim = j.value("hidden_dim", p.hidden_dim);
  p.layers = j.value("layers", p.layers);
  p.heads = j.value("heads", p.heads);
  p.ff_dim = j.value("ff_dim", p.ff_dim);
  p.max_length = j.value("max_length", p.max_length);
  p.vocab_size = j.value("vocab_size", p.vocab_size);
  p.seed = j.value("seed", p.seed);
  return p;
}

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

Matrix LayerNormForward(const Matrix& x, const Parameter& gain,
                        const Parameter& bias, Matrix* xhat,
                        std::vector<double>* inv_std) {
  const int n = x.rows(), d = x.cols();
  Matrix y(n, d);
  if (xhat) *xhat = Matrix(n, d);
  if (inv_std) inv_std->assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += xi[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) var += (xi[c] - mean) * (xi[c] - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    double* yi = y.row(i);
    for (int c = 0; c < d; ++c) {
      const double h = (xi[c] - mean) * inv;
      if (xhat) (*xhat)(i, c) = h;
      yi[c] = h * gain.value[c] + bias.value[c];
    }
    if (inv_std) (*inv_std)[i] = inv;
  }
  return y;
}

Matrix LayerNormBackward(const Matrix& dy, const Matrix& xhat,
                         const std::vector<double>& inv_std, Parameter& gain,
                         Parameter& bias) {
  const int n = dy.rows(), d = dy.cols();
  Matrix dx(n, d);
  std::vector<double> dh(d);
  for (int i = 0; i < n; ++i) {
    const double* dyi = dy.row(i);
    const double* hi = xhat.row(i);
    double mean_dh = 0.0, mean_dh_h = 0.0;
    for (int c = 0; c < d; ++c) {
      gain.grad[c] += dyi[c] * hi[c];
      bias.grad[c] += dyi[c];
      dh[c] = dyi[c] * gain.value[c];
      mean_dh += dh[c];
      mean_dh_h += dh[c] * hi[c];
    }
    mean_dh /= d;
    mean_dh_h /= d;
    double* dxi = dx.row(i);
    for (int c = 0; c < d; ++c) {
      dxi[c] = inv_std[i] * (dh[c] - mean_dh - hi[c] * mean_dh_h);
    }
  }
  return dx;
}

// y = x W + b with W stored [in x out].
Matrix LinearForward(const Matrix& x, const Parameter& w, const Parameter& b) {
  const int out = w.shape[1];
  Matrix y(x.rows(), out);
  for (int i = 0; i < x.rows(); ++i) {
    std::copy(b.value.begin(), b.value.end(), y.row(i));
  }
  GemmAccumulate(x.data(), w.data(), y.data(), x.rows(), w.shape[0], out);
  return y;
}

Matrix LinearBackward(const Matrix& x, const Matrix& dy, Parameter& w,
                      Parameter& b) {
  const int in = w.shape[0], out = w.shape[1];
  GemmTransAAccumulate(x.data(), dy.data(), w.grad.data(), in, x.rows(), out);
  for (int i = 0; i < dy.rows(); ++i) {
    const double* r = dy.row(i);
    for (int j = 0; j < out; ++j) b.grad[j] += r[j];
  }
  Matrix wt(out, in);
  for (int a = 0; a < in; ++a) {
    for (int j = 0; j < out; ++j) wt(j, a) = w.value[static_cast<size_t>(a) * out + j];
  }
  Matrix dx(dy.rows(), in);
  GemmAccumulate(dy.data(), wt.data(), dx.data(), dy.rows(), out, in);
  return dx;
}

double Gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double GeluGrad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Matrix ColumnBlock(const Matrix& m, int begin, int width) {
  Matrix out(m.rows(), width);
  for (int i = 0; i < m.rows(); ++i) {
    std::copy(m.row(i) + begin, m.row(i) + begin + width, out.row(i));
  }
  return out;
}

void AddColumnBlock(const Matrix& block, int begin, Matrix& m) {
  for (int i = 0; i < m.rows(); ++i) {
    double* dst = m.row(i) + begin;
    const double* src = block.row(i);
    for (int c = 0; c < block.cols(); ++c) dst[c] += src[c];
  }
}

void SoftmaxRows(Matrix& m) {
  for (int i = 0; i < m.rows(); ++i) {
    double* r = m.row(i);
    const double mx = *std::max_element(r, r + m.cols());
    double sum = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int j = 0; j < m.cols(); ++j) r[j] /= sum;
  }
}

}  // namespace

struct TinyTransformer::Cache : EncoderCache {
  struct LayerCache {
    Matrix ln1_xhat;
    std::vector<double> ln1_inv;
    Matrix normed1;
    Matrix q, k, v;
    std::vector<Matrix> probs;
    Matrix concat;
    Matrix ln2_xhat;
    std::vector<double> ln2_inv;
    Matrix normed2;
    Matrix pre;
    Matrix act;
  };
  std::vector<int> ids;
  std::vector<LayerCache> layers;
  Matrix final_xhat;
  std::vector<double> final_inv;
};

TinyTransformer::TinyTransformer(const EncoderParams& params) : params_(params) {
  params_.Validate();
  const int d = params_.hidden_dim, ff = params_.ff_dim;
  Rng rng(params_.seed);
  token_embedding_ = Parameter("encoder.token_embedding", {params_.vocab_size, d});
  position_embedding_ =
      Parameter("encoder.position_embedding", {params_.max_length, d});
  const double emb_bound = 1.0 / std::sqrt(static_cast<double>(d));
  token_embedding_.InitUniform(emb_bound, rng);
  // Sinusoidal starting point; the table is trained like any other weight.
  for (int t = 0; t < params_.max_length; ++t) {
    for (int j = 0; j < d; ++j) {
      const double freq = std::pow(10000.0, -static_cast<double>(j - j % 2) / d);
      position_embedding_.value[static_cast<size_t>(t) * d + j] =
          j % 2 == 0 ? std::sin(t * freq) : std::cos(t * freq);
    }
  }

  auto ones = [](Parameter& p) { std::fill(p.value.begin(), p.value.end(), 1.0); };
  for (int l = 0; l < params_.layers; ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l) + ".";
    Layer layer;
    layer.ln1_gain = Parameter(pre + "ln1.gain", {d});
    layer.ln1_bias = Parameter(pre + "ln1.bias", {d});
    layer.wq = Parameter(pre + "attn.wq", {d, d});
    layer.bq = Parameter(pre + "attn.bq", {d});
    layer.wk = Parameter(pre + "attn.wk", {d, d});
    layer.bk = Parameter(pre + "attn.bk", {d});
    layer.wv = Parameter(pre + "attn.wv", {d, d});
    layer.bv = Parameter(pre + "attn.bv", {d});
    layer.wo = Parameter(pre + "attn.wo", {d, d});
    layer.bo = Parameter(pre + "attn.bo", {d});
    layer.ln2_gain = Parameter(pre + "ln2.gain", {d});
    layer.ln2_bias = Parameter(pre + "ln2.bias", {d});
    layer.w1 = Parameter(pre + "ff.w1", {d, ff});
    layer.b1 = Parameter(pre + "ff.b1", {ff});
    layer.w2 = Parameter(pre + "ff.w2", {ff, d});
    layer.b2 = Parameter(pre + "ff.b2", {d});
    ones(layer.ln1_gain);
    ones(layer.ln2_gain);
    const double bd = 1.0 / std::sqrt(static_cast<double>(d));
    layer.wq.InitUniform(bd, rng);
    layer.wk.InitUniform(bd, rng);
    layer.wv.InitUniform(bd, rng);
    layer.wo.InitUniform(bd, rng);
    layer.w1.InitUniform(bd, rng);
    layer.w2.InitUniform(1.0 / std::sqrt(static_cast<double>(ff)), rng);
    layers_.push_back(std::move(layer));
  }
  final_gain_ = Parameter("encoder.final_ln.gain", {d});
  final_bias_ = Parameter("encoder.final_ln.bias", {d});
  ones(final_gain_);
}

Matrix TinyTransformer::Encode(const std::vector<int>& ids,
                               std::unique_ptr<EncoderCache>* cache) const {
  const int n = static_cast<int>(ids.size());
  const int d = params_.hidden_dim;
  if (n > params_.max_length) {
    throw SequenceTooLong("sequence of length " + std::to_string(n) +
                          " exceeds encoder max length " +
                          std::to_string(params_.max_length) +
                          "; split the document into windows");
  }
  std::unique_ptr<Cache> c;
  if (cache) {
    c = std::make_unique<Cache>();
    c->ids = ids;
    c->layers.resize(layers_.size());
  }
  Matrix x(n, d);
  for (int t = 0; t < n; ++t) {
    if (ids[t] < 0 || ids[t] >= params_.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(ids[t]) +
                              " outside vocabulary");
    }
    const double* te = token_embedding_.data() + static_cast<size_t>(ids[t]) * d;
    const double* pe = position_embedding_.data() + static_cast<size_t>(t) * d;
    double* xt = x.row(t);
    for (int j = 0; j < d; ++j) xt[j] = te[j] + pe[j];
  }

  const int heads = params_.heads, dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    Cache::LayerCache local;
    Cache::LayerCache& lc = c ? c->layers[l] : local;

    lc.normed1 = LayerNormForward(x, L.ln1_gain, L.ln1_bias, &lc.ln1_xhat, &lc.ln1_inv);
    lc.q = LinearForward(lc.normed1, L.wq, L.bq);
    lc.k = LinearForward(lc.normed1, L.wk, L.bk);
    lc.v = LinearForward(lc.normed1, L.wv, L.bv);
    lc.concat = Matrix(n, d);
    lc.probs.resize(heads);
    for (int h = 0; h < heads; ++h) {
      Matrix qh = ColumnBlock(lc.q, h * dk, dk);
      Matrix kh = ColumnBlock(lc.k, h * dk, dk);
      Matrix vh = ColumnBlock(lc.v, h * dk, dk);
      Matrix s = MatMulTransB(qh, kh);
      for (double& e : s.values()) e *= scale;
      SoftmaxRows(s);
      AddColumnBlock(MatMul(s, vh), h * dk, lc.concat);
      lc.probs[h] = std::move(s);
    }
    Matrix attn = LinearForward(lc.concat, L.wo, L.bo);
    AddInPlace(x, attn);

    lc.normed2 = LayerNormForward(x, L.ln2_gain, L.ln2_bias, &lc.ln2_xhat, &lc.ln2_inv);
    lc.pre = LinearForward(lc.normed2, L.w1, L.b1);
    lc.act = lc.pre;
    for (double& e : lc.act.values()) e = Gelu(e);
    AddInPlace(x, LinearForward(lc.act, L.w2, L.b2));
  }
  if (!layers_.empty()) {
    x = LayerNormForward(x, final_gain_, final_bias_, c ? &c->final_xhat : nullptr,
                         c ? &c->final_inv : nullptr);
  }
  if (cache) *cache = std::move(c);
  return x;
}

void TinyTransformer::Backward(const EncoderCache& base, const Matrix& d_hidden) {
  const auto& c = dynamic_cast<const Cache&>(base);
  const int n = static_cast<int>(c.ids.size());
  const int d = params_.hidden_dim;
  const int heads = params_.heads, dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  if (d_hidden.rows() != n || d_hidden.cols() != d) {
    throw std::invalid_argument("encoder backward: gradient shape mismatch");
  }

  Matrix dx = d_hidden;
  if (!layers_.empty()) {
    dx = LayerNormBackward(dx, c.final_xhat, c.final_inv, final_gain_, final_bias_);
  }
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    Layer& L = layers_[l];
    const Cache::LayerCache& lc = c.layers[l];

    // Feed-forward block.
    Matrix d_act = LinearBackward(lc.act, dx, L.w2, L.b2);
    for (size_t i = 0; i < d_act.size(); ++i) {
      d_act.data()[i] *= GeluGrad(lc.pre.data()[i]);
    }
    Matrix d_norm2 = LinearBackward(lc.normed2, d_act, L.w1, L.b1);
    AddInPlace(dx, LayerNormBackward(d_norm2, lc.ln2_xhat, lc.ln2_inv, L.ln2_gain,
                                     L.ln2_bias));

    // Attention block.
    Matrix d_concat = LinearBackward(lc.concat, dx, L.wo, L.bo);
    Matrix dq(n, d), dk_all(n, d), dv(n, d);
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = lc.probs[h];
      Matrix qh = ColumnBlock(lc.q, h * dk, dk);
      Matrix kh = ColumnBlock(lc.k, h * dk, dk);
      Matrix vh = ColumnBlock(lc.v, h * dk, dk);
      Matrix d_oh = ColumnBlock(d_concat, h * dk, dk);
      Matrix dp = MatMulTransB(d_oh, vh);
      AddColumnBlock(MatMulTransA(p, d_oh), h * dk, dv);
      Matrix ds(n, n);
      for (int i = 0; i < n; ++i) {
        const double* pi = p.row(i);
        const double* dpi = dp.row(i);
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += pi[j] * dpi[j];
        double* dsi = ds.row(i);
        for (int j = 0; j < n; ++j) dsi[j] = pi[j] * (dpi[j] - dot) * scale;
      }
      AddColumnBlock(MatMul(ds, kh), h * dk, dq);
      AddColumnBlock(MatMulTransA(ds, qh), h * dk, dk_all);
    }
    Matrix d_norm1 = LinearBackward(lc.normed1, dq, L.wq, L.bq);
    AddInPlace(d_norm1, LinearBackward(lc.normed1, dk_all, L.wk, L.bk));
    AddInPlace(d_norm1, LinearBackward(lc.normed1, dv, L.wv, L.bv));
    AddInPlace(dx, LayerNormBackward(d_norm1, lc.ln1_xhat, lc.ln1_inv, L.ln1_gain,
                                     L.ln1_bias));
  }
  for (int t = 0; t < n; ++t) {
    double* te = token_embedding_.grad.data() + static_cast<size_t>(c.ids[t]) * d;
    double* pe = position_embedding_.grad.data() + static_cast<size_t>(t) * d;
    const double* g = dx.row(t);
    for (int j = 0; j < d; ++j) {
      te[j] += g[j];
      pe[j] += g[j];
    }
  }
}

ParameterList TinyTransformer::Parameters() {
  ParameterList out{&token_embedding_, &position_embedding_};
  for (Layer& L : layers_) {
    for (Parameter* p : {&L.ln1_gain, &L.ln1_bias, &L.wq, &L.bq, &L.wk, &L.bk,
                         &L.wv, &L.bv, &L.wo, &L.bo, &L.ln2_gain, &L.ln2_bias,
                         &L.w1, &L.b1, &L.w2, &L.b2}) {
      out.push_back(p);
    }
  }
  if (!layers_.empty()) {
    out.push_back(&final_gain_);
    out.push_back(&final_bias_);
  }
  return out;
}

std::vector<const Parameter*> TinyTransformer::Parameters() const {
  auto params = const_cast<TinyTransformer*>(this)->Parameters();
  return {params.begin(), params.end()};
}

std::unique_ptr<SequenceEncoder> TinyTransformer::Clone() const {
  return std::make_unique<TinyTransformer>(*this);
}

std::unique_ptr<SequenceEncoder> MakeEncoder(const EncoderParams& params) {
  return std::make_unique<TinyTransformer>(params);
}

Bilinear::Bilinear(const std::string& name, int d_out, int d_in1, int d_in2,
                   Rng& rng)
    : out_dim_(d_out),
      in1_dim_(d_in1),
      in2_dim_(d_in2),
      weight_(name + ".weight", {d_out, d_in1, d_in2}),
      bias_(name + ".bias", {d_out}) {
  weight_.InitUniform(1.0 / std::sqrt(static_cast<double>(d_in1) * d_in2), rng);
}

std::vector<double> Bilinear::Apply(std::span<const double> x,
                                    std::span<const double> y) const {
  if (static_cast<int>(x.size()) != in1_dim_ || static_cast<int>(y.size()) != in2_dim_) {
    throw std::invalid_argument("bilinear: input shape mismatch");
  }
  std::vector<double> out(out_dim_);
  for (int o = 0; o < out_dim_; ++o) {
    double s = bias_.value[o];
    for (int a = 0; a < in1_dim_; ++a) {
      const double* w = weight_.data() + (static_cast<size_t>(o) * in1_dim_ + a) * in2_dim_;
      double inner = 0.0;
      for (int b = 0; b < in2_dim_; ++b) inner += w[b] * y[b];
      s += x[a] * inner;
    }
    out[o] = s;
  }
  return out;
}

Matrix Bilinear::Forward(const Matrix& x, const Matrix& y,
                         std::span<const EntityPair> pairs, Cache* cache) const {
  if (x.cols() != in1_dim_ || y.cols() != in2_dim_) {
    throw std::invalid_argument("bilinear: input shape mismatch");
  }
  Cache local;
  Cache& c = cache ? *cache : local;
  c = Cache();
  std::vector<int> slot_of_row(x.rows(), -1);
  Matrix out(static_cast<int>(pairs.size()), out_dim_);
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, k] = pairs[p];
    if (i < 0 || i >= x.rows() || k < 0 || k >= y.rows()) {
      throw std::out_of_range("bilinear: pair index out of range");
    }
    if (slot_of_row[i] < 0) {
      slot_of_row[i] = static_cast<int>(c.left_rows.size());
      c.left_rows.push_back(i);
      Matrix t(out_dim_, in2_dim_);
      const double* xi = x.row(i);
      for (int o = 0; o < out_dim_; ++o) {
        double* to = t.row(o);
        for (int a = 0; a < in1_dim_; ++a) {
          const double xa = xi[a];
          const double* w =
              weight_.data() + (static_cast<size_t>(o) * in1_dim_ + a) * in2_dim_;
          for (int b = 0; b < in2_dim_; ++b) to[b] += xa * w[b];
        }
      }
      c.projected.push_back(std::move(t));
    }
    const int slot = slot_of_row[i];
    c.slot_of_pair.push_back(slot);
    const Matrix& t = c.projected[slot];
    const double* yk = y.row(k);
    double* op = out.row(static_cast<int>(p));
    for (int o = 0; o < out_dim_; ++o) {
      const double* to = t.row(o);
      double s = 0.0;
      for (int b = 0; b < in2_dim_; ++b) s += to[b] * yk[b];
      op[o] = s + bias_.value[o];
    }
  }
  return out;
}

void Bilinear::Backward(const Matrix& x, const Matrix& y,
                        std::span<const EntityPair> pairs, const Cache& cache,
                        const Matrix& d_out, Matrix* dx, Matrix* dy) {
  std::vector<Matrix> g(cache.left_rows.size(), Matrix(out_dim_, in2_dim_));
  for (size_t p = 0; p < pairs.size(); ++p) {
    const int k = pairs[p].second;
    const int slot = cache.slot_of_pair[p];
    const double* dop = d_out.row(static_cast<int>(p));
    const double* yk = y.row(k);
    Matrix& gs = g[slot];
    for (int o = 0; o < out_dim_; ++o) {
      bias_.grad[o] += dop[o];
      double* go = gs.row(o);
      for (int b = 0; b < in2_dim_; ++b) go[b] += dop[o] * yk[b];
    }
    if (dy) {
      const Matrix& t = cache.projected[slot];
      double* dyk = dy->row(k);
      for (int o = 0; o < out_dim_; ++o) {
        const double* to = t.row(o);
        for (int b = 0; b < in2_dim_; ++b) dyk[b] += dop[o] * to[b];
      }
    }
  }
  for (size_t s = 0; s < cache.left_rows.size(); ++s) {
    const int i = cache.left_rows[s];
    const double* xi = x.row(i);
    double* dxi = dx ? dx->row(i) : nullptr;
    for (int o = 0; o < out_dim_; ++o) {
      const double* go = g[s].row(o);
      for (int a = 0; a < in1_dim_; ++a) {
        const size_t off = (static_cast<size_t>(o) * in1_dim_ + a) * in2_dim_;
        double* wg = weight_.grad.data() + off;
        const double xa = xi[a];
        for (int b = 0; b < in2_dim_; ++b) wg[b] += xa * go[b];
        if (dxi) {
          const double* w = weight_.data() + off;
          double inner = 0.0;
          for (int b = 0; b < in2_dim_; ++b) inner += w[b] * go[b];
          dxi[a] += inner;
        }
      }
    }
  }
}

std::vector<double> MentionRepr(const Matrix& hidden, const EncodedDocument& enc,
                                int entity_index, int mention_index) {
  if (entity_index < 0 || entity_index >= enc.entity_count() ||
      mention_index < 0 ||
      mention_index >= static_cast<int>(enc.mention_marker_pos[entity_index].size())) {
    throw std::out_of_range("mention_repr: no mention (" +
                            std::to_string(entity_index) + ", " +
                            std::to_string(mention_index) + ")");
  }
  const int pos = enc.mention_marker_pos[entity_index][mention_index];
  auto row = hidden.Row(pos);
  return {row.begin(), row.end()};
}

std::vector<double> EntityRepr(const std::vector<std::vector<double>>& mentions) {
  if (mentions.empty()) throw std::invalid_argument("entity_repr: no mentions");
  std::vector<double> out = mentions.front();
  for (const auto& m : mentions) {
    if (m.size() != out.size()) throw std::invalid_argument("entity_repr: ragged input");
    for (size_t c = 0; c < out.size(); ++c) out[c] = std::max(out[c], m[c]);
  }
  return out;
}

std::vector<double> RelationalRepr(std::span<const double> head,
                                   std::span<const double> tail,
                                   const Bilinear& bilinear) {
  return bilinear.Apply(head, tail);
}

DocumentModel::DocumentModel(const EncoderParams& params, int relation_dim)
    : params_(params), encoder_(MakeEncoder(params)) {
  Rng rng(params.seed ^ 0x5bd1e995ULL);
  bilinear_ = Bilinear("bilinear_e", relation_dim, params.hidden_dim,
                       params.hidden_dim, rng);
}

DocumentModel::DocumentModel(const DocumentModel& other)
    : params_(other.params_),
      encoder_(other.encoder_->Clone()),
      bilinear_(other.bilinear_) {}

DocumentModel& DocumentModel::operator=(const DocumentModel& other) {
  if (this != &other) {
    params_ = other.params_;
    encoder_ = other.encoder_->Clone();
    bilinear_ = other.bilinear_;
  }
  return *this;
}

DocumentPass DocumentModel::Forward(const EncodedDocument& enc, bool trace) const {
  if (enc.entity_count() == 0) {
    throw std::invalid_argument("document model: document has no entities");
  }
  DocumentPass pass;
  pass.length = enc.length();
  Matrix hidden = encoder_->Encode(enc.token_ids, trace ? &pass.cache : nullptr);
  const int d = hidden.cols();
  const int num_entities = enc.entity_count();
  pass.mention_offset.assign(num_entities + 1, 0);
  for (int e = 0; e < num_entities; ++e) {
    pass.mention_offset[e + 1] =
        pass.mention_offset[e] + static_cast<int>(enc.mention_marker_pos[e].size());
  }
  pass.mentions = Matrix(pass.mention_offset.back(), d);
  pass.entities = Matrix(num_entities, d);
  pass.argmax.assign(static_cast<size_t>(num_entities) * d, 0);
  for (int e = 0; e < num_entities; ++e) {
    const auto& positions = enc.mention_marker_pos[e];
    if (positions.empty()) throw std::invalid_argument("entity without mentions");
    for (size_t m = 0; m < positions.size(); ++m) {
      const int row = pass.mention_offset[e] + static_cast<int>(m);
      pass.mention_positions.push_back(positions[m]);
      std::copy(hidden.row(positions[m]), hidden.row(positions[m]) + d,
                pass.mentions.row(row));
    }
    double* ent = pass.entities.row(e);
    for (int c = 0; c < d; ++c) {
      int best = pass.mention_offset[e];
      for (int row = best + 1; row < pass.mention_offset[e + 1]; ++row) {
        if (pass.mentions(row, c) > pass.mentions(best, c)) best = row;
      }
      ent[c] = pass.mentions(best, c);
      pass.argmax[static_cast<size_t>(e) * d + c] = best;
    }
  }
  return pass;
}

RelationPass DocumentModel::Relations(const DocumentPass& pass,
                                      std::vector<EntityPair> pairs) const {
  RelationPass rel;
  rel.pairs = std::move(pairs);
  rel.reps = bilinear_.Forward(pass.entities, pass.entities, rel.pairs, &rel.cache);
  return rel;
}

Matrix DocumentModel::RelationsBackward(const DocumentPass& pass,
                                        const RelationPass& rel,
                                        const Matrix& d_reps) {
  Matrix d_entities(pass.entities.rows(), pass.entities.cols());
  bilinear_.Backward(pass.entities, pass.entities, rel.pairs, rel.cache, d_reps,
                     &d_entities, &d_entities);
  return d_entities;
}

void DocumentModel::Backward(const DocumentPass& pass, const Matrix& d_entities,
                             const Matrix* d_mentions) {
  if (!pass.cache) throw std::logic_error("document model: forward was not traced");
  const int d = pass.entities.cols();
  Matrix dm = d_mentions ? *d_mentions : Matrix(pass.mentions.rows(), d);
  for (int e = 0; e < pass.entities.rows(); ++e) {
    const double* de = d_entities.row(e);
    for (int c = 0; c < d; ++c) {
      dm(pass.argmax[static_cast<size_t>(e) * d + c], c) += de[c];
    }
  }
  Matrix dh(pass.length, d);
  for (int row = 0; row < dm.rows(); ++row) {
    double* dst = dh.row(pass.mention_positions[row]);
    const double* src = dm.row(row);
    for (int c = 0; c < d; ++c) dst[c] += src[c];
  }
  encoder_->Backward(*pass.cache, dh);
}

ReprSet DocumentModel::Represent(const EncodedDocument& enc,
                                 const std::vector<EntityPair>& pairs) const {
  DocumentPass pass = Forward(enc, false);
  ReprSet out;
  out.mentions = pass.mentions;
  out.mention_offset = pass.mention_offset;
  out.entities = pass.entities;
  out.pairs = pairs;
  out.relations = bilinear_.Forward(pass.entities, pass.entities, pairs, nullptr);
  return out;
}

ParameterList DocumentModel::Parameters() {
  ParameterList out = encoder_->Parameters();
  out.push_back(&bilinear_.weight());
  out.push_back(&bilinear_.bias());
  return out;
}

std::vector<const Parameter*> DocumentModel::Parameters() const {
  auto params = const_cast<DocumentModel*>(this)->Parameters();
  return {params.begin(), params.end()};
}

}  // namespace docre
