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

#include "docre/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "docre/rng.h"

namespace docre {

using nlohmann::json;

int Document::TokenCount() const {
  int n = 0;
  for (const auto& s : sentences) n += static_cast<int>(s.size());
  return n;
}

int Document::MentionCount() const {
  int n = 0;
  for (const auto& e : entities) n += static_cast<int>(e.mentions.size());
  return n;
}

size_t FactKeyHash::operator()(const FactKey& k) const {
  size_t h = std::hash<std::string>()(k.head);
  h = h * 1000003u ^ std::hash<int>()(k.relation);
  h = h * 1000003u ^ std::hash<std::string>()(k.tail);
  return h;
}

RelationVocabulary::RelationVocabulary(std::vector<std::string> codes) {
  for (const auto& c : codes) Intern(c);
}

RelationVocabulary RelationVocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open relation vocabulary " + path);
  RelationVocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (vocab.Find(line)) {
      throw ParseError("duplicate relation code '" + line + "' in " + path);
    }
    vocab.Intern(line);
  }
  return vocab;
}

void RelationVocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& c : codes_) out << c << '\n';
}

int RelationVocabulary::Intern(const std::string& code) {
  auto it = ids_.find(code);
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(codes_.size());
  codes_.push_back(code);
  ids_.emplace(code, id);
  return id;
}

std::optional<int> RelationVocabulary::Find(const std::string& code) const {
  auto it = ids_.find(code);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string NormalizeName(const std::string& name) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : name) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string EntityIdentity(const Entity& entity) {
  if (entity.kb_id) return *entity.kb_id;
  return NormalizeName(entity.name);
}

FactKey MakeFactKey(const Document& doc, const RelationInstance& label) {
  return FactKey{EntityIdentity(doc.entities.at(label.head)), label.relation,
                 EntityIdentity(doc.entities.at(label.tail))};
}

void ValidateDocument(const Document& doc, int relation_count) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("document '" + doc.doc_id + "': " + what);
  };
  const int num_sents = static_cast<int>(doc.sentences.size());
  for (size_t e = 0; e < doc.entities.size(); ++e) {
    const Entity& entity = doc.entities[e];
    if (entity.mentions.empty()) {
      fail("entity " + std::to_string(e) + " has no mentions");
    }
    for (const Mention& m : entity.mentions) {
      if (m.sent_index < 0 || m.sent_index >= num_sents) {
        fail("entity " + std::to_string(e) + " mention sentence " +
             std::to_string(m.sent_index) + " out of range");
      }
      const int len = static_cast<int>(doc.sentences[m.sent_index].size());
      if (m.start < 0 || m.start >= m.end || m.end > len) {
        fail("entity " + std::to_string(e) + " mention span [" +
             std::to_string(m.start) + ", " + std::to_string(m.end) +
             ") out of sentence bounds (length " + std::to_string(len) + ")");
      }
    }
  }
  std::set<std::tuple<int, int, int>> seen;
  const int num_entities = static_cast<int>(doc.entities.size());
  for (const RelationInstance& r : doc.labels) {
    if (r.head < 0 || r.head >= num_entities || r.tail < 0 ||
        r.tail >= num_entities) {
      fail("label entity index out of range");
    }
    if (r.head == r.tail) fail("label with head == tail");
    if (r.relation < 0 || (relation_count > 0 && r.relation >= relation_count)) {
      fail("relation id " + std::to_string(r.relation) + " out of range");
    }
    if (!seen.emplace(r.head, r.tail, r.relation).second) {
      fail("duplicate label (" + std::to_string(r.head) + ", " +
           std::to_string(r.tail) + ", " + std::to_string(r.relation) + ")");
    }
  }
}

namespace {

Document ParseOne(const json& j, size_t index, RelationVocabulary& relations,
                  bool extend_relations) {
  auto fail = [&](const std::string& what) {
    throw ParseError("document " + std::to_string(index) + ": " + what);
  };
  if (!j.is_object()) fail("expected an object");
  Document doc;
  try {
    doc.doc_id = j.at("title").get<std::string>();
    doc.sentences =
        j.at("sents").get<std::vector<std::vector<std::string>>>();
    for (const json& vertex : j.at("vertexSet")) {
      Entity entity;
      for (const json& m : vertex) {
        Mention mention;
        mention.sent_index = m.at("sent_id").get<int>();
        const auto& pos = m.at("pos");
        if (!pos.is_array() || pos.size() != 2) fail("pos must be [start, end]");
        mention.start = pos[0].get<int>();
        mention.end = pos[1].get<int>();
        mention.entity_type = m.value("type", std::string());
        if (entity.mentions.empty()) {
          entity.name = m.value("name", std::string());
          if (m.contains("kb_id")) entity.kb_id = m.at("kb_id").get<std::string>();
        }
        entity.mentions.push_back(std::move(mention));
      }
      doc.entities.push_back(std::move(entity));
    }
    if (j.contains("labels")) {
      for (const json& l : j.at("labels")) {
        RelationInstance r;
        r.head = l.at("h").get<int>();
        r.tail = l.at("t").get<int>();
        const std::string code = l.at("r").get<std::string>();
        if (extend_relations) {
          r.relation = relations.Intern(code);
        } else {
          auto id = relations.Find(code);
          if (!id) fail("unknown relation code '" + code + "'");
          r.relation = *id;
        }
        if (l.contains("evidence")) {
          r.evidence = l.at("evidence").get<std::vector<int>>();
        }
        doc.labels.push_back(std::move(r));
      }
    }
    if (j.value("source", std::string("annotated")) == "distant") {
      doc.source = Source::kDistant;
    }
  } catch (const json::exception& e) {
    fail(e.what());
  }
  // Surfaces come from the sentence tokens once bounds are known good.
  ValidateDocument(doc);
  for (Entity& entity : doc.entities) {
    for (Mention& m : entity.mentions) {
      const auto& sent = doc.sentences[m.sent_index];
      m.surface.assign(sent.begin() + m.start, sent.begin() + m.end);
    }
  }
  return doc;
}

std::string Join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::vector<Document> ParseDocred(const json& root,
                                  RelationVocabulary& relations,
                                  bool extend_relations) {
  if (!root.is_array()) throw ParseError("expected a JSON array of documents");
  std::vector<Document> docs;
  docs.reserve(root.size());
  for (size_t i = 0; i < root.size(); ++i) {
    docs.push_back(ParseOne(root[i], i, relations, extend_relations));
  }
  return docs;
}

std::vector<Document> LoadDocred(const std::string& path,
                                 RelationVocabulary& relations,
                                 bool extend_relations) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return ParseDocred(root, relations, extend_relations);
}

json DocumentToJson(const Document& doc, const RelationVocabulary& relations) {
  json j;
  j["title"] = doc.doc_id;
  j["sents"] = doc.sentences;
  json vertex_set = json::array();
  for (const Entity& entity : doc.entities) {
    json vertex = json::array();
    for (size_t k = 0; k < entity.mentions.size(); ++k) {
      const Mention& m = entity.mentions[k];
      json mj;
      mj["name"] = k == 0 && !entity.name.empty() ? entity.name : Join(m.surface);
      mj["sent_id"] = m.sent_index;
      mj["pos"] = {m.start, m.end};
      mj["type"] = m.entity_type;
      if (entity.kb_id) mj["kb_id"] = *entity.kb_id;
      vertex.push_back(std::move(mj));
    }
    vertex_set.push_back(std::move(vertex));
  }
  j["vertexSet"] = std::move(vertex_set);
  json labels = json::array();
  for (const RelationInstance& r : doc.labels) {
    labels.push_back({{"h", r.head},
                      {"t", r.tail},
                      {"r", relations.Code(r.relation)},
                      {"evidence", r.evidence}});
  }
  j["labels"] = std::move(labels);
  if (doc.source == Source::kDistant) j["source"] = "distant";
  return j;
}

void WriteDocred(const std::string& path, const std::vector<Document>& docs,
                 const RelationVocabulary& relations) {
  json root = json::array();
  for (const Document& d : docs) root.push_back(DocumentToJson(d, relations));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << root.dump() << '\n';
}

std::vector<EntityPair> EnumeratePairs(int entity_count) {
  std::vector<EntityPair> pairs;
  if (entity_count < 2) return pairs;
  pairs.reserve(static_cast<size_t>(entity_count) * (entity_count - 1));
  for (int i = 0; i < entity_count; ++i) {
    for (int k = 0; k < entity_count; ++k) {
      if (i != k) pairs.emplace_back(i, k);
    }
  }
  return pairs;
}

std::vector<EntityPair> EnumeratePairs(const Document& doc) {
  return EnumeratePairs(static_cast<int>(doc.entities.size()));
}

std::array<size_t, 3> SplitSizes(size_t n, SplitFractions f) {
  const double fr[3] = {f.train, f.dev, f.test};
  for (double x : fr) {
    if (x < 0) throw std::invalid_argument("split fractions must be >= 0");
  }
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  std::array<size_t, 3> sizes{};
  double remainders[3];
  size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fr[i] * static_cast<double>(n);
    sizes[i] = static_cast<size_t>(std::floor(exact + 1e-9));
    remainders[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return remainders[a] > remainders[b];
  });
  for (size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

CorpusSplit Split(const std::vector<Document>& docs, SplitFractions fractions,
                  uint64_t seed) {
  if (docs.empty()) throw std::invalid_argument("cannot split an empty corpus");
  const auto sizes = SplitSizes(docs.size(), fractions);
  std::vector<size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.Shuffle(order);
  CorpusSplit out;
  size_t k = 0;
  for (; k < sizes[0]; ++k) out.train.push_back(docs[order[k]]);
  for (; k < sizes[0] + sizes[1]; ++k) out.dev.push_back(docs[order[k]]);
  for (; k < docs.size(); ++k) out.test.push_back(docs[order[k]]);
  return out;
}

std::vector<int> SampleWithoutReplacement(int n, int count, Rng& rng) {
  if (count > n) throw std::invalid_argument("sample larger than population");
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.UniformInt(n - i)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace docre
