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

#ifndef DOCRE_CORPUS_H_
#define DOCRE_CORPUS_H_

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace docre {

// Raised when input data is structurally readable but violates a document
// invariant (span bounds, label indexes, duplicate facts).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Mention {
  int sent_index = 0;
  int start = 0;  // sentence-local, inclusive
  int end = 0;    // sentence-local, exclusive
  std::vector<std::string> surface;
  std::string entity_type;

  bool operator==(const Mention&) const = default;
};

struct Entity {
  std::vector<Mention> mentions;
  std::optional<std::string> kb_id;
  std::string name;

  bool operator==(const Entity&) const = default;
};

struct RelationInstance {
  int head = 0;
  int tail = 0;
  int relation = 0;
  std::vector<int> evidence;

  bool operator==(const RelationInstance&) const = default;
};

enum class Source { kAnnotated, kDistant };

struct Document {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  std::vector<Entity> entities;
  std::vector<RelationInstance> labels;
  Source source = Source::kAnnotated;

  int TokenCount() const;
  int MentionCount() const;
  bool operator==(const Document&) const = default;
};

using EntityPair = std::pair<int, int>;

// A (head identity, relation, tail identity) triple, comparable across
// documents.
struct FactKey {
  std::string head;
  int relation = 0;
  std::string tail;

  auto operator<=>(const FactKey&) const = default;
};

struct FactKeyHash {
  size_t operator()(const FactKey& k) const;
};

// Dense ids for relation codes. Persisted as one code per line; the line
// number is the id.
class RelationVocabulary {
 public:
  RelationVocabulary() = default;
  explicit RelationVocabulary(std::vector<std::string> codes);

  static RelationVocabulary Load(const std::string& path);
  void Save(const std::string& path) const;

  // Returns the id for `code`, adding it when absent.
  int Intern(const std::string& code);
  std::optional<int> Find(const std::string& code) const;
  const std::string& Code(int id) const { return codes_.at(id); }
  int size() const { return static_cast<int>(codes_.size()); }
  const std::vector<std::string>& codes() const { return codes_; }

 private:
  std::vector<std::string> codes_;
  std::unordered_map<std::string, int> ids_;
};

// Case-folded, whitespace-collapsed name.
std::string NormalizeName(const std::string& name);

// Cross-document identity of an entity: kb_id when present, otherwise the
// normalized name.
std::string EntityIdentity(const Entity& entity);

FactKey MakeFactKey(const Document& doc, const RelationInstance& label);

// Checks every document invariant; throws ValidationError naming doc_id.
// `relation_count` <= 0 skips the relation range check.
void ValidateDocument(const Document& doc, int relation_count = 0);

// DocRED JSON (de)serialization. Unknown relation codes are interned into
// `relations` when `extend_relations` is set and rejected otherwise.
std::vector<Document> ParseDocred(const nlohmann::json& root,
                                  RelationVocabulary& relations,
                                  bool extend_relations = true);
std::vector<Document> LoadDocred(const std::string& path,
                                 RelationVocabulary& relations,
                                 bool extend_relations = true);
nlohmann::json DocumentToJson(const Document& doc,
                              const RelationVocabulary& relations);
void WriteDocred(const std::string& path, const std::vector<Document>& docs,
                 const RelationVocabulary& relations);

// All ordered pairs (i, k), i != k, in lexicographic order.
std::vector<EntityPair> EnumeratePairs(const Document& doc);
std::vector<EntityPair> EnumeratePairs(int entity_count);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> test;
};

// Seeded shuffle followed by largest-remainder allocation of the counts.
CorpusSplit Split(const std::vector<Document>& docs, SplitFractions fractions,
                  uint64_t seed);

// Split sizes by largest remainder; exposed for testing.
std::array<size_t, 3> SplitSizes(size_t n, SplitFractions fractions);

}  // namespace docre

#endif  // DOCRE_CORPUS_H_
