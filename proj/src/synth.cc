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

#include "docre/synth.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "docre/rng.h"

namespace docre {

using nlohmann::json;

namespace {

const char* const kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "te",
                                  "vo", "du", "pi", "ga", "be", "zo", "fu",
                                  "ha", "ji", "ko", "ma", "ti", "ye"};
constexpr int kNumSyllables = 20;

const char* const kEntityTypes[] = {"PER", "ORG", "LOC", "TIME", "NUM", "MISC"};

// Bijective index -> word over `syllables` syllables.
std::string PseudoWord(int index, int syllables) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kSyllables[index % kNumSyllables];
    index /= kNumSyllables;
  }
  return w;
}

std::string Capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

struct Piece {
  int entity = -1;  // local entity index, or -1 for a plain token
  std::string token;
};
using Sentence = std::vector<Piece>;
using Block = std::vector<Sentence>;

}  // namespace

std::vector<FactKey> FactKB::Keys() const {
  std::vector<FactKey> keys;
  keys.reserve(facts.size());
  for (const KbFact& f : facts) {
    keys.push_back({entities[f.head].id, f.relation, entities[f.tail].id});
  }
  return keys;
}

void FactKB::Validate() const {
  for (const KbFact& f : facts) {
    const int n = static_cast<int>(entities.size());
    if (f.head < 0 || f.head >= n || f.tail < 0 || f.tail >= n) {
      throw ValidationError("KB fact references unknown entity");
    }
  }
}

void SynthConfig::Validate() const {
  if (n_docs <= 0 || n_distant_docs < 0 || entities_per_doc <= 0 ||
      sentences_per_doc <= 0 || relation_count <= 0 || kb_entities <= 0 ||
      facts_per_entity <= 0 || facts_per_doc < 0 || filler_vocab <= 0) {
    throw ConfigError("synth config: counts must be positive");
  }
  if (expression_fraction < 0.0 || expression_fraction > 1.0) {
    throw ConfigError("synth config: expression_fraction must be in [0, 1]");
  }
  if (mention_repeat_rate < 0.0 || mention_repeat_rate >= 1.0) {
    throw ConfigError("synth config: mention_repeat_rate must be in [0, 1)");
  }
  if (entities_per_doc > kb_entities) {
    throw ConfigError("synth config: entities_per_doc (" +
                      std::to_string(entities_per_doc) +
                      ") exceeds KB registry size (" +
                      std::to_string(kb_entities) + ")");
  }
  if (filler_vocab > kNumSyllables * kNumSyllables) {
    throw ConfigError("synth config: filler_vocab too large");
  }
}

json ToJson(const SynthConfig& c) {
  return {{"n_docs", c.n_docs},
          {"n_distant_docs", c.n_distant_docs},
          {"entities_per_doc", c.entities_per_doc},
          {"sentences_per_doc", c.sentences_per_doc},
          {"relation_count", c.relation_count},
          {"expression_fraction", c.expression_fraction},
          {"mention_repeat_rate", c.mention_repeat_rate},
          {"rng_seed", c.rng_seed},
          {"kb_entities", c.kb_entities},
          {"facts_per_entity", c.facts_per_entity},
          {"facts_per_doc", c.facts_per_doc},
          {"filler_vocab", c.filler_vocab}};
}

SynthConfig SynthConfigFromJson(const json& j) {
  SynthConfig c;
  c.n_docs = j.value("n_docs", c.n_docs);
  c.n_distant_docs = j.value("n_distant_docs", c.n_distant_docs);
  c.entities_per_doc = j.value("entities_per_doc", c.entities_per_doc);
  c.sentences_per_doc = j.value("sentences_per_doc", c.sentences_per_doc);
  c.relation_count = j.value("relation_count", c.relation_count);
  c.expression_fraction = j.value("expression_fraction", c.expression_fraction);
  c.mention_repeat_rate = j.value("mention_repeat_rate", c.mention_repeat_rate);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.kb_entities = j.value("kb_entities", c.kb_entities);
  c.facts_per_entity = j.value("facts_per_entity", c.facts_per_entity);
  c.facts_per_doc = j.value("facts_per_doc", c.facts_per_doc);
  c.filler_vocab = j.value("filler_vocab", c.filler_vocab);
  return c;
}

double SynthCorpus::DistantNoiseRate() const {
  size_t total = 0, noisy = 0;
  for (const auto& flags : distant_expressed) {
    for (bool e : flags) {
      ++total;
      if (!e) ++noisy;
    }
  }
  return total ? static_cast<double>(noisy) / static_cast<double>(total) : 0.0;
}

Document AnnotatedView(const RenderedDocument& r) {
  Document doc = r.doc;
  doc.source = Source::kAnnotated;
  doc.labels.clear();
  for (size_t i = 0; i < r.doc.labels.size(); ++i) {
    if (r.expressed[i]) doc.labels.push_back(r.doc.labels[i]);
  }
  return doc;
}

Document DistantView(const RenderedDocument& r) {
  Document doc = r.doc;
  doc.source = Source::kDistant;
  return doc;
}

CorpusRenderer::CorpusRenderer(const SynthConfig& config, uint64_t seed)
    : config_(config) {
  config_.Validate();
  Rng rng(seed);

  for (int i = 0; i < config_.filler_vocab; ++i) {
    filler_.push_back(PseudoWord(i, 2));
  }
  // Cue words are three syllables long, so never collide with filler.
  std::vector<int> cue_ids = SampleWithoutReplacement(
      kNumSyllables * kNumSyllables * kNumSyllables, 4 * config_.relation_count,
      rng);
  for (int r = 0; r < config_.relation_count; ++r) {
    relations_.Intern("P" + std::to_string(r));
    lexicon_.push_back({PseudoWord(cue_ids[4 * r], 3),
                        PseudoWord(cue_ids[4 * r + 1], 3),
                        PseudoWord(cue_ids[4 * r + 2], 3),
                        PseudoWord(cue_ids[4 * r + 3], 3)});
  }

  const int n = config_.kb_entities;
  std::vector<int> first_ids = SampleWithoutReplacement(
      kNumSyllables * kNumSyllables * kNumSyllables, n, rng);
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> tokens{Capitalize(PseudoWord(first_ids[i], 3))};
    if (rng.Bernoulli(0.5)) {
      tokens.push_back(Capitalize(PseudoWord(rng.UniformIndex(400), 2)));
    }
    std::string name;
    for (const auto& t : tokens) name += (name.empty() ? "" : " ") + t;
    kb_.entities.push_back(
        {"Q" + std::to_string(i), name, kEntityTypes[rng.UniformIndex(6)]});
    name_tokens_.push_back(std::move(tokens));
  }

  // At most one fact per unordered entity pair.
  std::set<std::pair<int, int>> linked;
  incident_.assign(n, {});
  for (int h = 0; h < n && n > 1; ++h) {
    for (int j = 0; j < config_.facts_per_entity; ++j) {
      int t = rng.UniformIndex(n);
      if (t == h || linked.count({std::min(h, t), std::max(h, t)})) continue;
      linked.insert({std::min(h, t), std::max(h, t)});
      const int f = static_cast<int>(kb_.facts.size());
      kb_.facts.push_back({h, rng.UniformIndex(config_.relation_count), t});
      incident_[h].push_back(f);
      incident_[t].push_back(f);
    }
  }
}

std::vector<int> CorpusRenderer::SampleSlice(Rng& rng) const {
  const int n = config_.kb_entities;
  std::vector<int> selected{rng.UniformIndex(n)};
  std::set<int> in_slice(selected.begin(), selected.end());
  int taken = 0;
  while (static_cast<int>(selected.size()) < config_.entities_per_doc &&
         taken < config_.facts_per_doc) {
    std::vector<int> frontier;
    for (int e : selected) {
      for (int f : incident_[e]) {
        const KbFact& fact = kb_.facts[f];
        const int other = fact.head == e ? fact.tail : fact.head;
        if (!in_slice.count(other)) frontier.push_back(other);
      }
    }
    if (frontier.empty()) break;
    const int next = frontier[rng.UniformIndex(frontier.size())];
    selected.push_back(next);
    in_slice.insert(next);
    ++taken;
  }
  while (static_cast<int>(selected.size()) < config_.entities_per_doc) {
    const int e = rng.UniformIndex(n);
    if (in_slice.insert(e).second) selected.push_back(e);
  }
  return selected;
}

RenderedDocument CorpusRenderer::Render(const std::string& doc_id,
                                        Rng& rng) const {
  const std::vector<int> slice = SampleSlice(rng);
  const int num_local = static_cast<int>(slice.size());
  std::map<int, int> local_of;
  for (int i = 0; i < num_local; ++i) local_of[slice[i]] = i;

  std::set<int> fact_ids;
  for (int e : slice) {
    for (int f : incident_[e]) {
      const KbFact& fact = kb_.facts[f];
      if (local_of.count(fact.head) && local_of.count(fact.tail)) {
        fact_ids.insert(f);
      }
    }
  }

  auto fill = [&](Sentence& s, int lo, int hi) {
    const int k = lo + rng.UniformIndex(hi - lo + 1);
    for (int i = 0; i < k; ++i) {
      s.push_back({-1, filler_[rng.UniformIndex(filler_.size())]});
    }
  };
  auto word = [](Sentence& s, const std::string& w) { s.push_back({-1, w}); };

  std::vector<Block> blocks;
  std::vector<int> mention_count(num_local, 0);
  struct PendingFact {
    int head, tail, relation;
    bool expressed;
    int block;  // -1 when unexpressed
  };
  std::vector<PendingFact> pending;

  for (int f : fact_ids) {
    const KbFact& fact = kb_.facts[f];
    const int h = local_of[fact.head], t = local_of[fact.tail];
    const bool expressed = rng.Bernoulli(config_.expression_fraction);
    PendingFact p{h, t, fact.relation, expressed, -1};
    if (expressed) {
      const RelationLexicon& lex = lexicon_[fact.relation];
      Block block;
      if (rng.Bernoulli(kInterSentenceFraction)) {
        Sentence a, b;
        fill(a, 0, 1);
        a.push_back({h, ""});
        word(a, lex.inter_a);
        fill(a, 1, 2);
        word(a, ".");
        fill(b, 0, 1);
        word(b, lex.inter_b);
        b.push_back({t, ""});
        fill(b, 0, 1);
        word(b, ".");
        block = {std::move(a), std::move(b)};
      } else {
        Sentence s;
        fill(s, 0, 2);
        s.push_back({h, ""});
        word(s, lex.intra_a);
        word(s, lex.intra_b);
        s.push_back({t, ""});
        fill(s, 0, 2);
        word(s, ".");
        block = {std::move(s)};
      }
      ++mention_count[h];
      ++mention_count[t];
      p.block = static_cast<int>(blocks.size());
      blocks.push_back(std::move(block));
    }
    pending.push_back(p);
  }

  // Neutral sentences: one or two entities, filler only, no cue words.
  auto neutral = [&](int e) {
    Sentence s;
    fill(s, 1, 3);
    s.push_back({e, ""});
    ++mention_count[e];
    if (num_local > 1 && rng.Bernoulli(0.3)) {
      int other = rng.UniformIndex(num_local - 1);
      if (other >= e) ++other;
      fill(s, 1, 2);
      s.push_back({other, ""});
      ++mention_count[other];
    }
    fill(s, 0, 2);
    word(s, ".");
    blocks.push_back({std::move(s)});
  };
  for (int e = 0; e < num_local; ++e) {
    if (mention_count[e] == 0) neutral(e);
  }
  for (int e = 0; e < num_local; ++e) {
    for (int extra = 0; extra < 2 && rng.Bernoulli(config_.mention_repeat_rate);
         ++extra) {
      neutral(e);
    }
  }
  auto sentence_total = [&] {
    size_t n = 0;
    for (const Block& b : blocks) n += b.size();
    return static_cast<int>(n);
  };
  while (sentence_total() < config_.sentences_per_doc) {
    Sentence s;
    fill(s, 3, 6);
    word(s, ".");
    blocks.push_back({std::move(s)});
  }

  std::vector<int> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order);

  RenderedDocument out;
  Document& doc = out.doc;
  doc.doc_id = doc_id;
  std::vector<Entity> local_entities(num_local);
  std::vector<std::vector<int>> block_sentences(blocks.size());
  std::vector<int> first_seen;
  for (int b : order) {
    for (const Sentence& s : blocks[b]) {
      const int sent_index = static_cast<int>(doc.sentences.size());
      block_sentences[b].push_back(sent_index);
      std::vector<std::string> tokens;
      for (const Piece& p : s) {
        if (p.entity < 0) {
          tokens.push_back(p.token);
          continue;
        }
        const int reg = slice[p.entity];
        Mention m;
        m.sent_index = sent_index;
        m.start = static_cast<int>(tokens.size());
        for (const auto& t : name_tokens_[reg]) tokens.push_back(t);
        m.end = static_cast<int>(tokens.size());
        m.surface = name_tokens_[reg];
        m.entity_type = kb_.entities[reg].type;
        if (local_entities[p.entity].mentions.empty()) {
          first_seen.push_back(p.entity);
        }
        local_entities[p.entity].mentions.push_back(std::move(m));
      }
      doc.sentences.push_back(std::move(tokens));
    }
  }
  // Entity list in order of first appearance.
  std::vector<int> doc_index(num_local);
  for (size_t i = 0; i < first_seen.size(); ++i) {
    const int local = first_seen[i];
    doc_index[local] = static_cast<int>(i);
    Entity e = std::move(local_entities[local]);
    e.kb_id = kb_.entities[slice[local]].id;
    e.name = kb_.entities[slice[local]].name;
    doc.entities.push_back(std::move(e));
  }

  std::vector<std::pair<RelationInstance, bool>> labels;
  for (const PendingFact& p : pending) {
    RelationInstance r{doc_index[p.head], doc_index[p.tail], p.relation, {}};
    if (p.expressed) {
      r.evidence = block_sentences[p.block];
      std::sort(r.evidence.begin(), r.evidence.end());
    }
    labels.emplace_back(std::move(r), p.expressed);
  }
  std::sort(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.head, a.first.tail, a.first.relation) <
           std::tie(b.first.head, b.first.tail, b.first.relation);
  });
  for (auto& [r, e] : labels) {
    doc.labels.push_back(std::move(r));
    out.expressed.push_back(e);
  }
  return out;
}

SynthCorpus Synthesize(const SynthConfig& config) {
  config.Validate();
  Rng rng(config.rng_seed);
  CorpusRenderer renderer(config, rng.DeriveSeed());
  SynthCorpus corpus;
  corpus.kb = renderer.kb();
  corpus.relations = renderer.relations();
  char id[32];
  for (int d = 0; d < config.n_docs; ++d) {
    std::snprintf(id, sizeof(id), "synth-ann-%05d", d);
    RenderedDocument r = renderer.Render(id, rng);
    std::vector<RelationInstance> unexpressed;
    for (size_t i = 0; i < r.doc.labels.size(); ++i) {
      if (!r.expressed[i]) unexpressed.push_back(r.doc.labels[i]);
    }
    corpus.annotated.push_back(AnnotatedView(r));
    corpus.annotated_unexpressed.push_back(std::move(unexpressed));
  }
  for (int d = 0; d < config.n_distant_docs; ++d) {
    std::snprintf(id, sizeof(id), "synth-ds-%05d", d);
    RenderedDocument r = renderer.Render(id, rng);
    corpus.distant.push_back(DistantView(r));
    corpus.distant_expressed.push_back(std::move(r.expressed));
  }
  return corpus;
}

json SidecarJson(const SynthCorpus& corpus, const SynthConfig& config) {
  json kb_entities = json::array();
  for (const KbEntity& e : corpus.kb.entities) {
    kb_entities.push_back({{"id", e.id}, {"name", e.name}, {"type", e.type}});
  }
  json kb_facts = json::array();
  for (const KbFact& f : corpus.kb.facts) {
    kb_facts.push_back({corpus.kb.entities[f.head].id,
                        corpus.relations.Code(f.relation),
                        corpus.kb.entities[f.tail].id});
  }
  json distant = json::array();
  for (size_t d = 0; d < corpus.distant.size(); ++d) {
    std::vector<int> flags;
    for (bool e : corpus.distant_expressed[d]) flags.push_back(e ? 1 : 0);
    distant.push_back({{"doc_id", corpus.distant[d].doc_id}, {"expressed", flags}});
  }
  json annotated = json::array();
  for (size_t d = 0; d < corpus.annotated.size(); ++d) {
    json un = json::array();
    for (const auto& r : corpus.annotated_unexpressed[d]) {
      un.push_back({{"h", r.head},
                    {"t", r.tail},
                    {"r", corpus.relations.Code(r.relation)}});
    }
    annotated.push_back(
        {{"doc_id", corpus.annotated[d].doc_id}, {"unexpressed", un}});
  }
  return {{"config", ToJson(config)},
          {"relations", corpus.relations.codes()},
          {"kb", {{"entities", kb_entities}, {"facts", kb_facts}}},
          {"noise_rate", corpus.DistantNoiseRate()},
          {"distant", distant},
          {"annotated", annotated}};
}

}  // namespace docre
