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

#ifndef DOCRE_SYNTH_H_
#define DOCRE_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "docre/corpus.h"
#include "json.hpp"

namespace docre {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KbEntity {
  std::string id;
  std::string name;
  std::string type;
};

struct KbFact {
  int head = 0;  // registry index
  int relation = 0;
  int tail = 0;
};

// Ground-truth knowledge base behind a synthetic corpus.
struct FactKB {
  std::vector<KbEntity> entities;
  std::vector<KbFact> facts;

  // Facts keyed by (head id, relation, tail id).
  std::vector<FactKey> Keys() const;
  void Validate() const;
};

struct SynthConfig {
  int n_docs = 1000;          // annotated documents
  int n_distant_docs = 1000;  // distantly supervised documents
  int entities_per_doc = 8;
  int sentences_per_doc = 8;  // lower bound; padded with filler sentences
  int relation_count = 10;
  double expression_fraction = 0.5;  // rho
  double mention_repeat_rate = 0.3;
  uint64_t rng_seed = 1;
  int kb_entities = 400;
  int facts_per_entity = 3;
  int facts_per_doc = 4;
  int filler_vocab = 300;

  void Validate() const;
};

// Share of expressed facts rendered across two consecutive sentences.
inline constexpr double kInterSentenceFraction = 0.5;

nlohmann::json ToJson(const SynthConfig& c);
SynthConfig SynthConfigFromJson(const nlohmann::json& j);

struct SynthCorpus {
  std::vector<Document> annotated;
  std::vector<Document> distant;
  FactKB kb;
  RelationVocabulary relations;
  // expressed[d][l]: whether label l of distant document d is expressed in
  // its text. Evaluation-only ground truth.
  std::vector<std::vector<bool>> distant_expressed;
  // KB facts co-occurring in each annotated document but not expressed
  // (hence not labeled), as (head, relation, tail) entity indexes.
  std::vector<std::vector<RelationInstance>> annotated_unexpressed;

  double DistantNoiseRate() const;
};

// One rendered document with both label views.
struct RenderedDocument {
  Document doc;  // labels = every co-occurring KB fact
  std::vector<bool> expressed;
};

// Annotated view: only expressed facts are labels.
Document AnnotatedView(const RenderedDocument& r);
// Distant view: every co-occurring KB fact is a label.
Document DistantView(const RenderedDocument& r);

class Rng;

// Renders documents from a KB. Building block of Synthesize, exposed so the
// two label views of one rendering can be compared.
class CorpusRenderer {
 public:
  CorpusRenderer(const SynthConfig& config, uint64_t seed);

  const FactKB& kb() const { return kb_; }
  const RelationVocabulary& relations() const { return relations_; }
  RenderedDocument Render(const std::string& doc_id, Rng& rng) const;

 private:
  struct RelationLexicon {
    std::string intra_a, intra_b;  // "H a b T"
    std::string inter_a, inter_b;  // "H a ..." / "... b T"
  };

  std::vector<int> SampleSlice(Rng& rng) const;

  SynthConfig config_;
  FactKB kb_;
  RelationVocabulary relations_;
  std::vector<RelationLexicon> lexicon_;
  std::vector<std::string> filler_;
  std::vector<std::vector<std::string>> name_tokens_;
  std::vector<std::vector<int>> incident_;  // entity -> fact indexes
};

SynthCorpus Synthesize(const SynthConfig& config);

// Sidecar JSON: config, KB, relation codes and per-document expressed flags.
nlohmann::json SidecarJson(const SynthCorpus& corpus, const SynthConfig& config);

}  // namespace docre

#endif  // DOCRE_SYNTH_H_
