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

#ifndef DOCRE_ENCODER_H_
#define DOCRE_ENCODER_H_

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "docre/corpus.h"
#include "docre/marking.h"
#include "docre/tensor.h"
#include "json.hpp"

namespace docre {

// Raised for documents longer than the encoder's maximum length. The caller
// must window the document; it is never truncated.
class SequenceTooLong : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EncoderParams {
  int hidden_dim = 64;
  int layers = 2;
  int heads = 4;
  int ff_dim = 256;
  int max_length = 512;
  int vocab_size = 0;
  uint64_t seed = 1;

  void Validate() const;
};

nlohmann::json ToJson(const EncoderParams& p);
EncoderParams EncoderParamsFromJson(const nlohmann::json& j);

// Implementation-specific activations retained for the backward pass.
struct EncoderCache {
  virtual ~EncoderCache() = default;
};

// A differentiable map from token ids to an n x d_h matrix of hidden states.
class SequenceEncoder {
 public:
  virtual ~SequenceEncoder() = default;

  virtual int hidden_dim() const = 0;
  virtual int max_length() const = 0;

  // When `cache` is non-null it receives what Backward needs.
  virtual Matrix Encode(const std::vector<int>& ids,
                        std::unique_ptr<EncoderCache>* cache) const = 0;
  // Accumulates parameter gradients for upstream gradient `d_hidden`.
  virtual void Backward(const EncoderCache& cache, const Matrix& d_hidden) = 0;

  virtual ParameterList Parameters() = 0;
  virtual std::vector<const Parameter*> Parameters() const = 0;
  virtual std::unique_ptr<SequenceEncoder> Clone() const = 0;
};

// Pre-norm transformer encoder with learned positional embeddings and GELU
// feed-forward blocks. No dropout, so every forward pass is deterministic.
// With zero layers the output is token embedding + positional embedding.
class TinyTransformer : public SequenceEncoder {
 public:
  explicit TinyTransformer(const EncoderParams& params);

  int hidden_dim() const override { return params_.hidden_dim; }
  int max_length() const override { return params_.max_length; }
  const EncoderParams& params() const { return params_; }

  Matrix Encode(const std::vector<int>& ids,
                std::unique_ptr<EncoderCache>* cache) const override;
  void Backward(const EncoderCache& cache, const Matrix& d_hidden) override;

  ParameterList Parameters() override;
  std::vector<const Parameter*> Parameters() const override;
  std::unique_ptr<SequenceEncoder> Clone() const override;

  Parameter& token_embedding() { return token_embedding_; }
  Parameter& position_embedding() { return position_embedding_; }

 private:
  struct Layer {
    Parameter ln1_gain, ln1_bias;
    Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter ln2_gain, ln2_bias;
    Parameter w1, b1, w2, b2;
  };
  struct Cache;

  EncoderParams params_;
  Parameter token_embedding_;
  Parameter position_embedding_;
  std::vector<Layer> layers_;
  Parameter final_gain_, final_bias_;
};

std::unique_ptr<SequenceEncoder> MakeEncoder(const EncoderParams& params);

// out_k(x, y) = x^T W_k y + b_k with W of shape d_out x d_in1 x d_in2.
class Bilinear {
 public:
  Bilinear() = default;
  Bilinear(const std::string& name, int d_out, int d_in1, int d_in2, Rng& rng);

  int out_dim() const { return out_dim_; }
  int in1_dim() const { return in1_dim_; }
  int in2_dim() const { return in2_dim_; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

  std::vector<double> Apply(std::span<const double> x,
                            std::span<const double> y) const;

  // Intermediate x^T W per distinct left row, reused by Backward.
  struct Cache {
    std::vector<int> left_rows;
    std::vector<Matrix> projected;  // [distinct left row] -> d_out x d_in2
    std::vector<int> slot_of_pair;
  };

  // Row p of the result = Apply(x.row(pairs[p].first), y.row(pairs[p].second)).
  Matrix Forward(const Matrix& x, const Matrix& y,
                 std::span<const EntityPair> pairs, Cache* cache) const;
  // Accumulates weight/bias gradients and adds input gradients into dx, dy
  // (either may be null).
  void Backward(const Matrix& x, const Matrix& y,
                std::span<const EntityPair> pairs, const Cache& cache,
                const Matrix& d_out, Matrix* dx, Matrix* dy);

  ParameterList Parameters() { return {&weight_, &bias_}; }
  std::vector<const Parameter*> Parameters() const { return {&weight_, &bias_}; }

 private:
  int out_dim_ = 0, in1_dim_ = 0, in2_dim_ = 0;
  Parameter weight_, bias_;
};

// Row of the mention's START marker.
std::vector<double> MentionRepr(const Matrix& hidden, const EncodedDocument& enc,
                                int entity_index, int mention_index);

// Element-wise maximum over mention vectors.
std::vector<double> EntityRepr(const std::vector<std::vector<double>>& mentions);

std::vector<double> RelationalRepr(std::span<const double> head,
                                   std::span<const double> tail,
                                   const Bilinear& bilinear);

// Mention, entity and relational vectors for one document.
struct ReprSet {
  Matrix mentions;                  // entity-major rows
  std::vector<int> mention_offset;  // entity e owns rows [off[e], off[e+1])
  Matrix entities;
  std::vector<EntityPair> pairs;
  Matrix relations;  // one row per listed pair
};

// Activations of one document through encoder, pooling and Bilinear_E.
struct DocumentPass {
  std::unique_ptr<EncoderCache> cache;
  int length = 0;
  std::vector<int> mention_positions;  // mention row -> sequence position
  std::vector<int> mention_offset;
  Matrix mentions;
  Matrix entities;
  std::vector<int> argmax;  // [entity * d + c] -> mention row

  int entity_count() const { return entities.rows(); }
  int MentionRow(int entity, int mention) const {
    return mention_offset[entity] + mention;
  }
};

struct RelationPass {
  std::vector<EntityPair> pairs;
  Bilinear::Cache cache;
  Matrix reps;  // pairs x d_r
};

// Encoder plus Bilinear_E: the document model shared by the ranker, the
// pre-training tasks and the fine-tuned classifier.
class DocumentModel {
 public:
  DocumentModel(const EncoderParams& params, int relation_dim);
  DocumentModel(const DocumentModel& other);
  DocumentModel& operator=(const DocumentModel& other);

  const EncoderParams& encoder_params() const { return params_; }
  int relation_dim() const { return bilinear_.out_dim(); }
  int hidden_dim() const { return params_.hidden_dim; }

  SequenceEncoder& encoder() { return *encoder_; }
  const SequenceEncoder& encoder() const { return *encoder_; }
  Bilinear& bilinear() { return bilinear_; }
  const Bilinear& bilinear() const { return bilinear_; }

  // Set `trace` to keep activations for Backward.
  DocumentPass Forward(const EncodedDocument& enc, bool trace) const;
  RelationPass Relations(const DocumentPass& pass,
                         std::vector<EntityPair> pairs) const;
  // Returns the gradient with respect to the entity matrix.
  Matrix RelationsBackward(const DocumentPass& pass, const RelationPass& rel,
                           const Matrix& d_reps);
  // Back-propagates entity and (optional) mention gradients into the encoder.
  void Backward(const DocumentPass& pass, const Matrix& d_entities,
                const Matrix* d_mentions);

  ReprSet Represent(const EncodedDocument& enc,
                    const std::vector<EntityPair>& pairs) const;

  ParameterList Parameters();
  std::vector<const Parameter*> Parameters() const;

 private:
  EncoderParams params_;
  std::unique_ptr<SequenceEncoder> encoder_;
  Bilinear bilinear_;
};

}  // namespace docre

#endif  // DOCRE_ENCODER_H_
