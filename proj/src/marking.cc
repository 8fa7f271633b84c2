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

#include "docre/marking.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "docre/rng.h"

namespace docre {

namespace {

const char* const kSpecials[] = {"[PAD]", "[CLS]", "[UNK]", "[BLANK]", "[MASK]"};

}  // namespace

void Vocabulary::InitSpecials(int max_entities) {
  if (max_entities < 0) throw std::invalid_argument("max_entities < 0");
  max_entities_ = max_entities;
  tokens_.clear();
  ids_.clear();
  for (const char* s : kSpecials) Add(s);
  for (int i = 0; i < max_entities; ++i) {
    Add("[E" + std::to_string(i) + "]");
    Add("[/E" + std::to_string(i) + "]");
  }
}

void Vocabulary::Add(const std::string& token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::Build(const std::vector<Document>& docs,
                             int max_entities) {
  if (docs.empty()) throw std::invalid_argument("vocabulary: no documents");
  for (const Document& d : docs) {
    if (static_cast<int>(d.entities.size()) > max_entities) {
      throw ValidationError("document '" + d.doc_id + "' has " +
                            std::to_string(d.entities.size()) +
                            " entities, more than max_entities = " +
                            std::to_string(max_entities));
    }
  }
  std::map<std::string, long> counts;
  for (const Document& d : docs) {
    for (const auto& s : d.sentences) {
      for (const auto& t : s) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, long>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.InitSpecials(max_entities);
  for (const auto& [token, count] : sorted) {
    if (!v.ids_.count(token)) v.Add(token);
  }
  return v;
}

Vocabulary Vocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  int markers = 0;
  while (kFirstMarker + 2 * markers + 1 < static_cast<int>(lines.size()) &&
         lines[kFirstMarker + 2 * markers] ==
             "[E" + std::to_string(markers) + "]") {
    ++markers;
  }
  Vocabulary v;
  v.InitSpecials(markers);
  for (int i = 0; i < v.size(); ++i) {
    if (i >= static_cast<int>(lines.size()) || lines[i] != v.tokens_[i]) {
      throw ParseError(path + ": special token block is malformed at line " +
                       std::to_string(i + 1));
    }
  }
  for (size_t i = v.size(); i < lines.size(); ++i) v.Add(lines[i]);
  return v;
}

void Vocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::StartMarker(int slot) const {
  if (slot < 0 || slot >= max_entities_) {
    throw std::out_of_range("marker slot " + std::to_string(slot));
  }
  return kFirstMarker + 2 * slot;
}

int Vocabulary::EndMarker(int slot) const { return StartMarker(slot) + 1; }

int Vocabulary::Lookup(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end() || it->second < first_regular_id()) return kUnk;
  return it->second;
}

std::vector<std::string> Vocabulary::Decode(const std::vector<int>& ids,
                                            bool strip) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (strip && (id == kCls || id == kPad || IsMarker(id))) continue;
    out.push_back(Token(id));
  }
  return out;
}

EncodedDocument EncodeWithMarkers(const Document& doc, const Vocabulary& vocab) {
  ValidateDocument(doc);
  const int num_entities = static_cast<int>(doc.entities.size());
  if (num_entities > vocab.max_entities()) {
    throw ValidationError("document '" + doc.doc_id + "' has " +
                          std::to_string(num_entities) +
                          " entities; vocabulary supports " +
                          std::to_string(vocab.max_entities()));
  }
  // Per sentence: which mention starts / ends at each token.
  struct Ref {
    int entity = -1, mention = -1;
  };
  std::vector<std::vector<Ref>> owner(doc.sentences.size());
  for (size_t s = 0; s < doc.sentences.size(); ++s) {
    owner[s].resize(doc.sentences[s].size());
  }
  for (int e = 0; e < num_entities; ++e) {
    const auto& mentions = doc.entities[e].mentions;
    for (int k = 0; k < static_cast<int>(mentions.size()); ++k) {
      const Mention& m = mentions[k];
      for (int t = m.start; t < m.end; ++t) {
        if (owner[m.sent_index][t].entity >= 0) {
          throw ValidationError("document '" + doc.doc_id +
                                "': overlapping mention spans in sentence " +
                                std::to_string(m.sent_index));
        }
        owner[m.sent_index][t] = {e, k};
      }
    }
  }

  EncodedDocument enc;
  enc.source_length = doc.TokenCount();
  enc.entity_slot.resize(num_entities);
  enc.mention_marker_pos.resize(num_entities);
  enc.mention_surface.resize(num_entities);
  enc.blanked.assign(num_entities, false);
  for (int e = 0; e < num_entities; ++e) {
    enc.entity_slot[e] = e;
    enc.mention_marker_pos[e].resize(doc.entities[e].mentions.size());
    enc.mention_surface[e].resize(doc.entities[e].mentions.size());
  }
  enc.token_ids.reserve(1 + enc.source_length + 2 * doc.MentionCount());
  enc.token_ids.push_back(Vocabulary::kCls);
  for (size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& sent = doc.sentences[s];
    for (int t = 0; t < static_cast<int>(sent.size()); ++t) {
      const Ref ref = owner[s][t];
      const bool starts = ref.entity >= 0 &&
                          doc.entities[ref.entity].mentions[ref.mention].start == t;
      if (starts) {
        const int slot = enc.entity_slot[ref.entity];
        enc.mention_marker_pos[ref.entity][ref.mention] = enc.length();
        enc.token_ids.push_back(vocab.StartMarker(slot));
        enc.mention_surface[ref.entity][ref.mention].first = enc.length();
      }
      enc.token_ids.push_back(vocab.Lookup(sent[t]));
      if (ref.entity >= 0 &&
          doc.entities[ref.entity].mentions[ref.mention].end == t + 1) {
        enc.mention_surface[ref.entity][ref.mention].second = enc.length();
        enc.token_ids.push_back(vocab.EndMarker(enc.entity_slot[ref.entity]));
      }
    }
  }
  return enc;
}

EncodedDocument ApplyBlank(const EncodedDocument& enc, double alpha, Rng& rng) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("blank probability must be in [0, 1]");
  }
  EncodedDocument out = enc;
  for (int e = 0; e < out.entity_count(); ++e) {
    if (!rng.Bernoulli(alpha)) continue;
    out.blanked[e] = true;
    for (const auto& [begin, end] : out.mention_surface[e]) {
      std::fill(out.token_ids.begin() + begin, out.token_ids.begin() + end,
                Vocabulary::kBlank);
    }
  }
  return out;
}

EncodedDocument MaskQueryMention(const EncodedDocument& enc, int entity_index,
                                 int mention_index) {
  if (entity_index < 0 || entity_index >= enc.entity_count() ||
      mention_index < 0 ||
      mention_index >= static_cast<int>(enc.mention_surface[entity_index].size())) {
    throw std::out_of_range("mask: no mention (" + std::to_string(entity_index) +
                            ", " + std::to_string(mention_index) + ")");
  }
  EncodedDocument out = enc;
  const auto [begin, end] = out.mention_surface[entity_index][mention_index];
  std::fill(out.token_ids.begin() + begin, out.token_ids.begin() + end,
            Vocabulary::kMask);
  out.masked_query = std::make_pair(entity_index, mention_index);
  return out;
}

}  // namespace docre
