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

#ifndef DOCRE_MARKING_H_
#define DOCRE_MARKING_H_

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "docre/corpus.h"

namespace docre {

class Rng;

// Word-level vocabulary. Ids are laid out as
//   [PAD] [CLS] [UNK] [BLANK] [MASK] [E0] [/E0] [E1] [/E1] ... regular tokens
// so every special id is below every regular id.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kCls = 1;
  static constexpr int kUnk = 2;
  static constexpr int kBlank = 3;
  static constexpr int kMask = 4;
  static constexpr int kFirstMarker = 5;

  Vocabulary() = default;

  // Frequency-descending, then lexicographic. Throws when a document has
  // more entities than `max_entities`.
  static Vocabulary Build(const std::vector<Document>& docs, int max_entities);
  static Vocabulary Load(const std::string& path);
  void Save(const std::string& path) const;

  int max_entities() const { return max_entities_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  int first_regular_id() const { return kFirstMarker + 2 * max_entities_; }

  int StartMarker(int slot) const;
  int EndMarker(int slot) const;
  bool IsMarker(int id) const {
    return id >= kFirstMarker && id < first_regular_id();
  }
  bool IsSpecial(int id) const { return id < first_regular_id(); }

  int Lookup(const std::string& token) const;
  const std::string& Token(int id) const { return tokens_.at(id); }

  // Token strings; when `strip` is set, CLS/PAD and markers are dropped.
  std::vector<std::string> Decode(const std::vector<int>& ids, bool strip) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void InitSpecials(int max_entities);
  void Add(const std::string& token);

  int max_entities_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Marker-augmented token ids for one document.
struct EncodedDocument {
  std::vector<int> token_ids;
  // [entity][mention] -> position of the START marker.
  std::vector<std::vector<int>> mention_marker_pos;
  // [entity][mention] -> [begin, end) positions of the surface tokens.
  std::vector<std::vector<std::pair<int, int>>> mention_surface;
  std::vector<int> entity_slot;
  std::optional<std::pair<int, int>> masked_query;
  std::vector<bool> blanked;  // per entity, set by ApplyBlank
  int source_length = 0;      // n, tokens without CLS and markers

  int length() const { return static_cast<int>(token_ids.size()); }
  int entity_count() const { return static_cast<int>(entity_slot.size()); }
};

// CLS + sentences with [Ei] ... [/Ei] spliced around every mention of entity
// i. Overlapping or nested mention spans are rejected.
EncodedDocument EncodeWithMarkers(const Document& doc, const Vocabulary& vocab);

// Per entity Bernoulli(alpha): replaces every surface token of every mention
// with [BLANK]. Markers are untouched.
EncodedDocument ApplyBlank(const EncodedDocument& enc, double alpha, Rng& rng);

// Replaces one mention's surface tokens with [MASK].
EncodedDocument MaskQueryMention(const EncodedDocument& enc, int entity_index,
                                 int mention_index);

}  // namespace docre

#endif  // DOCRE_MARKING_H_
