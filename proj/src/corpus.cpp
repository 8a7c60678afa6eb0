#include "memnet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "memnet/util.hpp"

namespace memnet::corpus {

using nlohmann::json;

std::string normalize(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // trims leading whitespace
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> toks;
  std::istringstream is(s);
  std::string t;
  while (is >> t) {
    for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    toks.push_back(t);
  }
  return toks;
}

int ClozeInstance::gap_index() const {
  for (std::size_t i = 0; i < query.size(); ++i)
    if (query[i] == kGapToken) return static_cast<int>(i);
  return -1;
}

void validate(const ClozeInstance& inst) {
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("instance '" + inst.id + "': " + what);
  };
  if (inst.id.empty()) fail("empty id");
  int gaps = 0;
  for (const auto& t : inst.query)
    if (t == kGapToken) ++gaps;
  if (gaps != 1) fail("query must contain exactly one " + kGapToken + " token");
  const int n = static_cast<int>(inst.passage.size());
  int prev_end = -1;
  for (const auto& e : inst.entities) {
    if (e.start < 0 || e.end < e.start || e.end >= n) fail("entity span out of passage bounds");
    if (e.start <= prev_end) fail("overlapping entity spans");
    prev_end = e.end;
    if (e.text.empty()) fail("empty entity string");
  }
  if (inst.answer.empty()) fail("empty answer");
  const std::string ans = normalize(inst.answer);
  bool found = false;
  for (const auto& e : inst.entities)
    if (e.text == ans) {
      found = true;
      break;
    }
  if (!found) fail("answer does not occur as a passage entity");
  if (inst.candidates) {
    bool in_cands = false;
    for (const auto& c : *inst.candidates)
      if (normalize(c) == ans) {
        in_cands = true;
        break;
      }
    if (!in_cands) fail("answer missing from candidate list");
  }
}

Vocabulary::Vocabulary() : Vocabulary({}, {}, {}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::int64_t> counts,
                       std::vector<std::string> labels) {
  tokens_ = {kPadToken, kUnkToken, kGapToken};
  counts_ = {0, 0, 0};
  const bool has_reserved = tokens.size() >= 3 && tokens[0] == kPadToken;
  std::size_t start = has_reserved ? 3 : 0;
  for (std::size_t i = start; i < tokens.size(); ++i) {
    tokens_.push_back(tokens[i]);
    counts_.push_back(i < counts.size() ? counts[i] : 0);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) token_ids_[tokens_[i]] = static_cast<int>(i);
  labels_ = std::move(labels);
  for (std::size_t i = 0; i < labels_.size(); ++i) label_ids_[labels_[i]] = static_cast<int>(i);
}

int Vocabulary::token_id(const std::string& tok) const {
  auto it = token_ids_.find(tok);
  return it == token_ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_text(int id) const {
  if (id < 0 || id >= num_tokens()) throw std::out_of_range("Vocabulary::token_text");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::label_id(const std::string& label) const {
  auto it = label_ids_.find(label);
  return it == label_ids_.end() ? -1 : it->second;
}

const std::string& Vocabulary::label_text(int id) const {
  if (id < 0 || id >= num_labels()) throw std::out_of_range("Vocabulary::label_text");
  return labels_[static_cast<std::size_t>(id)];
}

std::int64_t Vocabulary::count(const std::string& tok) const {
  auto it = token_ids_.find(tok);
  return it == token_ids_.end() ? 0 : counts_[static_cast<std::size_t>(it->second)];
}

Vocabulary build_vocab(const Dataset& train, int min_count) {
  if (train.empty()) throw std::invalid_argument("build_vocab: empty training set");
  std::map<std::string, std::int64_t> counts;
  std::set<std::string> label_set;
  for (const auto& inst : train) {
    for (const auto& t : inst.passage) ++counts[t];
    for (const auto& t : inst.query)
      if (t != kGapToken) ++counts[t];
    for (const auto& e : inst.entities) label_set.insert(e.text);
  }
  std::vector<std::string> tokens = {kPadToken, kUnkToken, kGapToken};
  std::vector<std::int64_t> kept_counts = {0, 0, 0};
  for (const auto& [tok, c] : counts) {
    if (c < min_count) continue;
    if (tok == kPadToken || tok == kUnkToken || tok == kGapToken) continue;
    tokens.push_back(tok);
    kept_counts.push_back(c);
  }
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  return Vocabulary(std::move(tokens), std::move(kept_counts), std::move(labels));
}

WindowSet extract_windows(const ClozeInstance& inst, int radius, int memory_size,
                          const Vocabulary& vocab) {
  if (radius < 0) throw std::invalid_argument("extract_windows: negative radius");
  if (memory_size < 1) throw std::invalid_argument("extract_windows: memory size must be >= 1");
  if (inst.entities.empty()) throw std::runtime_error("no candidates");

  const int n = static_cast<int>(inst.passage.size());
  auto token_at = [&](int pos) {
    return (pos < 0 || pos >= n) ? Vocabulary::kPad : vocab.token_id(inst.passage[static_cast<std::size_t>(pos)]);
  };

  WindowSet ws;
  const std::size_t limit = std::min(inst.entities.size(), static_cast<std::size_t>(memory_size));
  ws.windows.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) {
    const EntitySpan& e = inst.entities[i];
    Window w;
    w.entity_offset = radius;
    w.entity_len = e.end - e.start + 1;
    w.entity = e.text;
    w.label_id = vocab.label_id(e.text);
    w.span_start = e.start;
    w.span_end = e.end;
    w.tokens.reserve(static_cast<std::size_t>(2 * radius + w.entity_len));
    for (int pos = e.start - radius; pos <= e.end + radius; ++pos) w.tokens.push_back(token_at(pos));
    ws.windows.push_back(std::move(w));
  }

  const int gi = inst.gap_index();
  ws.query_tokens.reserve(static_cast<std::size_t>(2 * radius));
  const int qn = static_cast<int>(inst.query.size());
  for (int pos = gi - radius; pos <= gi + radius; ++pos) {
    if (pos == gi) continue;  // the gap itself is not part of the query window
    if (pos < 0 || pos >= qn)
      ws.query_tokens.push_back(Vocabulary::kPad);
    else
      ws.query_tokens.push_back(vocab.token_id(inst.query[static_cast<std::size_t>(pos)]));
  }
  return ws;
}

namespace {

// longest entity-string token match starting at position i, or 0
std::size_t match_len_at(const std::vector<std::string>& toks, std::size_t i,
                         const std::vector<std::vector<std::string>>& needles) {
  std::size_t best = 0;
  for (const auto& nd : needles) {
    if (nd.size() <= best || i + nd.size() > toks.size()) continue;
    bool ok = true;
    for (std::size_t k = 0; k < nd.size(); ++k)
      if (toks[i + k] != nd[k]) {
        ok = false;
        break;
      }
    if (ok) best = nd.size();
  }
  return best;
}

}  // namespace

ClozeInstance anonymize(const ClozeInstance& inst) {
  // order of first occurrence over document-ordered spans
  std::map<std::string, std::string> fwd;  // original -> symbol
  std::vector<std::string> order;
  for (const auto& e : inst.entities) {
    if (fwd.count(e.text)) continue;
    fwd[e.text] = kEntityPrefix + std::to_string(order.size());
    order.push_back(e.text);
  }

  ClozeInstance out;
  out.id = inst.id;

  std::size_t next_span = 0;
  for (std::size_t pos = 0; pos < inst.passage.size();) {
    if (next_span < inst.entities.size() &&
        static_cast<int>(pos) == inst.entities[next_span].start) {
      const EntitySpan& e = inst.entities[next_span];
      const std::string& symbol = fwd.at(e.text);
      const int at = static_cast<int>(out.passage.size());
      out.passage.push_back(symbol);
      out.entities.push_back(EntitySpan{at, at, symbol});
      pos = static_cast<std::size_t>(e.end) + 1;
      ++next_span;
    } else {
      out.passage.push_back(inst.passage[pos]);
      ++pos;
    }
  }

  // query rewrite by longest entity-string match; the gap token is untouched
  std::vector<std::vector<std::string>> needles;
  needles.reserve(order.size());
  for (const auto& text : order) needles.push_back(tokenize(text));
  for (std::size_t i = 0; i < inst.query.size();) {
    if (inst.query[i] == kGapToken) {
      out.query.push_back(kGapToken);
      ++i;
      continue;
    }
    const std::size_t len = match_len_at(inst.query, i, needles);
    if (len == 0) {
      out.query.push_back(inst.query[i]);
      ++i;
    } else {
      std::string matched;
      for (std::size_t k = 0; k < len; ++k) {
        if (k) matched += ' ';
        matched += inst.query[i + k];
      }
      out.query.push_back(fwd.at(normalize(matched)));
      i += len;
    }
  }

  const std::string ans = normalize(inst.answer);
  out.answer = fwd.count(ans) ? fwd.at(ans) : ans;
  if (inst.candidates) {
    std::vector<std::string> cands;
    for (const auto& c : *inst.candidates) {
      const std::string cn = normalize(c);
      cands.push_back(fwd.count(cn) ? fwd.at(cn) : cn);
    }
    out.candidates = std::move(cands);
  }
  for (const auto& [orig, symbol] : fwd) out.entity_map[symbol] = orig;
  return out;
}

std::string deanonymize_prediction(const ClozeInstance& inst, const std::string& prediction) {
  auto it = inst.entity_map.find(prediction);
  return it == inst.entity_map.end() ? prediction : it->second;
}

ClozeInstance cap_candidates(const ClozeInstance& inst, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("cap_candidates: k must be >= 1");
  if (inst.entities.empty()) throw std::invalid_argument("cap_candidates: instance has no entities");
  const std::string ans = normalize(inst.answer);

  std::vector<std::string> pool;  // distinct non-answer entities, first-occurrence order
  std::set<std::string> pool_seen;
  for (const auto& e : inst.entities) {
    if (e.text == ans || pool_seen.count(e.text)) continue;
    pool_seen.insert(e.text);
    pool.push_back(e.text);
  }

  Rng rng(seed ^ fnv1a(inst.id));
  std::vector<std::string> cands = {ans};
  const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(k - 1));
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[i], pool[j]);
    cands.push_back(pool[i]);
  }
  rng.shuffle(cands);
  ClozeInstance out = inst;
  out.candidates = std::move(cands);
  return out;
}

std::set<std::string> entity_string_set(const Dataset& data) {
  std::set<std::string> out;
  for (const auto& inst : data)
    for (const auto& e : inst.entities) out.insert(e.text);
  return out;
}

Dataset filter_seen(const Dataset& test, const Dataset& train) {
  const std::set<std::string> seen = entity_string_set(train);
  Dataset kept;
  for (const auto& inst : test)
    if (seen.count(normalize(inst.answer))) kept.push_back(inst);
  return kept;
}

const Eigen::VectorXd* EmbeddingTable::find(const std::string& word) const {
  auto it = vectors.find(word);
  return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingLoad load_embeddings(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_embeddings: cannot open " + path);
  EmbeddingLoad out;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    if (first) {
      first = false;
      // optional "<count> <dim>" header
      std::vector<std::string> parts;
      std::string p;
      while (is >> p) parts.push_back(p);
      if (parts.size() == 2 && parts[0].find_first_not_of("0123456789") == std::string::npos &&
          parts[1].find_first_not_of("0123456789") == std::string::npos) {
        continue;
      }
      is.clear();
      is.str(line);
    }
    std::string word;
    is >> word;
    std::vector<double> values;
    double v;
    while (is >> v) values.push_back(v);
    if (values.empty())
      throw std::runtime_error("load_embeddings: no values at line " + std::to_string(lineno));
    if (out.table.dim == 0) out.table.dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != out.table.dim)
      throw std::runtime_error("load_embeddings: dimension mismatch at line " +
                               std::to_string(lineno));
    Eigen::VectorXd vec(out.table.dim);
    for (int i = 0; i < out.table.dim; ++i) vec(i) = values[static_cast<std::size_t>(i)];
    out.table.vectors[word] = std::move(vec);
  }

  int total = 0, covered = 0;
  for (int id = 3; id < vocab.num_tokens(); ++id) {
    ++total;
    if (out.table.vectors.count(vocab.token_text(id))) ++covered;
  }
  out.coverage = total == 0 ? 1.0 : static_cast<double>(covered) / total;
  return out;
}

namespace {

ClozeInstance instance_from_json(const json& j) {
  ClozeInstance inst;
  if (!j.is_object()) throw std::runtime_error("instance is not a JSON object");
  inst.id = j.at("id").get<std::string>();
  for (const auto& t : j.at("passage")) {
    std::string tok = t.get<std::string>();
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    inst.passage.push_back(std::move(tok));
  }
  for (const auto& e : j.at("entities")) {
    if (!e.is_array() || e.size() != 3) throw std::runtime_error("entity must be [start,end,string]");
    EntitySpan span;
    span.start = e[0].get<int>();
    span.end = e[1].get<int>();
    span.text = normalize(e[2].get<std::string>());
    inst.entities.push_back(std::move(span));
  }
  std::sort(inst.entities.begin(), inst.entities.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  for (const auto& t : j.at("query")) {
    std::string tok = t.get<std::string>();
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    inst.query.push_back(std::move(tok));
  }
  inst.answer = normalize(j.at("answer").get<std::string>());
  if (j.contains("candidates") && !j.at("candidates").is_null()) {
    std::vector<std::string> cands;
    for (const auto& c : j.at("candidates")) cands.push_back(normalize(c.get<std::string>()));
    inst.candidates = std::move(cands);
  }
  if (j.contains("entity_map") && !j.at("entity_map").is_null()) {
    for (const auto& [key, value] : j.at("entity_map").items())
      inst.entity_map[key] = value.get<std::string>();
  }
  validate(inst);
  return inst;
}

json instance_to_json(const ClozeInstance& inst) {
  json j;
  j["id"] = inst.id;
  j["passage"] = inst.passage;
  json ents = json::array();
  for (const auto& e : inst.entities) ents.push_back(json::array({e.start, e.end, e.text}));
  j["entities"] = std::move(ents);
  j["query"] = inst.query;
  j["answer"] = inst.answer;
  if (inst.candidates)
    j["candidates"] = *inst.candidates;
  else
    j["candidates"] = nullptr;
  if (!inst.entity_map.empty()) j["entity_map"] = inst.entity_map;
  return j;
}

}  // namespace

Dataset read_canonical(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_canonical: cannot open " + path);
  Dataset data;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ClozeInstance inst = instance_from_json(j);
      if (!ids.insert(inst.id).second)
        throw std::runtime_error("duplicate instance id '" + inst.id + "'");
      data.push_back(std::move(inst));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

void write_canonical(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_canonical: cannot open " + path);
  for (const auto& inst : data) out << instance_to_json(inst).dump() << "\n";
  if (!out) throw std::runtime_error("write_canonical: write failed for " + path);
}

namespace {

// strips the leading 1-based line number, enforcing the expected value
std::string strip_line_number(const std::string& line, int expected, std::size_t lineno) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || std::stoi(line.substr(0, i)) != expected)
    throw std::runtime_error("read_cbt: bad line numbering at line " + std::to_string(lineno));
  if (i < line.size() && line[i] == ' ') ++i;
  return line.substr(i);
}

std::vector<std::string> split_tabs(const std::string& s) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : s) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  std::vector<std::string> nonempty;
  for (auto& f : fields) {
    const std::string t = normalize(f);
    if (!t.empty()) nonempty.push_back(t);
  }
  return nonempty;
}

}  // namespace

AdapterConfig AdapterConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("AdapterConfig: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  AdapterConfig cfg;
  if (j.contains("id_field")) cfg.id_field = j.at("id_field").get<std::string>();
  if (j.contains("passage_field")) cfg.passage_field = j.at("passage_field").get<std::string>();
  if (j.contains("query_field")) cfg.query_field = j.at("query_field").get<std::string>();
  if (j.contains("answer_field")) cfg.answer_field = j.at("answer_field").get<std::string>();
  if (j.contains("candidates_field"))
    cfg.candidates_field = j.at("candidates_field").get<std::string>();
  if (j.contains("entities_field")) cfg.entities_field = j.at("entities_field").get<std::string>();
  if (j.contains("gap_token")) cfg.gap_token = j.at("gap_token").get<std::string>();
  return cfg;
}

namespace {

std::vector<std::string> tokens_from_field(const json& value) {
  std::vector<std::string> out;
  if (value.is_string()) return tokenize(value.get<std::string>());
  for (const auto& t : value) {
    std::string tok = t.get<std::string>();
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(tok));
  }
  return out;
}

}  // namespace

Dataset read_json_adapted(const std::string& path, const AdapterConfig& adapter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_json_adapted: cannot open " + path);
  Dataset data;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0, dropped = 0;
  const std::string gap = normalize(adapter.gap_token);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ClozeInstance inst;
      inst.id = j.at(adapter.id_field).is_string()
                    ? j.at(adapter.id_field).get<std::string>()
                    : j.at(adapter.id_field).dump();
      inst.passage = tokens_from_field(j.at(adapter.passage_field));
      int gaps = 0;
      for (auto& tok : tokens_from_field(j.at(adapter.query_field))) {
        if (tok == gap) {
          inst.query.push_back(kGapToken);
          ++gaps;
        } else {
          inst.query.push_back(std::move(tok));
        }
      }
      if (gaps != 1)
        throw std::runtime_error("expected exactly one '" + adapter.gap_token +
                                 "' placeholder in the query");
      inst.answer = normalize(j.at(adapter.answer_field).get<std::string>());
      std::vector<std::string> cand_strings;
      if (!adapter.candidates_field.empty() && j.contains(adapter.candidates_field) &&
          !j.at(adapter.candidates_field).is_null()) {
        for (const auto& c : j.at(adapter.candidates_field))
          cand_strings.push_back(normalize(c.get<std::string>()));
        inst.candidates = cand_strings;
      }

      if (!adapter.entities_field.empty() && j.contains(adapter.entities_field)) {
        for (const auto& e : j.at(adapter.entities_field)) {
          EntitySpan span;
          span.start = e[0].get<int>();
          span.end = e[1].get<int>();
          span.text = normalize(e[2].get<std::string>());
          inst.entities.push_back(std::move(span));
        }
        std::sort(inst.entities.begin(), inst.entities.end(),
                  [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
      } else {
        // derive spans from occurrences of the answer and candidates
        std::vector<std::vector<std::string>> needles;
        needles.push_back(tokenize(inst.answer));
        for (const auto& c : cand_strings) needles.push_back(tokenize(c));
        std::size_t pos = 0;
        while (pos < inst.passage.size()) {
          const std::size_t len = match_len_at(inst.passage, pos, needles);
          if (len == 0) {
            ++pos;
            continue;
          }
          std::string text;
          for (std::size_t k = 0; k < len; ++k) {
            if (k) text += ' ';
            text += inst.passage[pos + k];
          }
          inst.entities.push_back(EntitySpan{static_cast<int>(pos),
                                             static_cast<int>(pos + len - 1), normalize(text)});
          pos += len;
        }
      }

      bool answer_found = false;
      for (const auto& e : inst.entities) answer_found = answer_found || e.text == inst.answer;
      if (!answer_found) {
        ++dropped;
        continue;
      }
      validate(inst);
      if (!ids.insert(inst.id).second)
        throw std::runtime_error("duplicate instance id '" + inst.id + "'");
      data.push_back(std::move(inst));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (dropped > 0)
    std::cerr << "read_json_adapted: dropped " << dropped
              << " instance(s) whose answer is not in the passage\n";
  return data;
}

Dataset read_cbt(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_cbt: cannot open " + path);

  Dataset data;
  std::vector<std::string> block;
  std::string line;
  std::size_t lineno = 0, block_start = 1, dropped = 0;
  int index = 0;

  auto flush = [&]() {
    if (block.empty()) return;
    if (block.size() != 21)
      throw std::runtime_error("read_cbt: block starting at line " + std::to_string(block_start) +
                               " has " + std::to_string(block.size()) + " lines, expected 21");
    ClozeInstance inst;
    inst.id = "cbt-" + std::to_string(index++);
    for (int i = 0; i < 20; ++i) {
      const std::string body = strip_line_number(block[static_cast<std::size_t>(i)], i + 1,
                                                 block_start + static_cast<std::size_t>(i));
      for (auto& tok : tokenize(body)) inst.passage.push_back(tok);
    }
    const std::string last = strip_line_number(block[20], 21, block_start + 20);
    const std::vector<std::string> fields = split_tabs(last);
    if (fields.size() < 3)
      throw std::runtime_error("read_cbt: query line needs query, answer and candidates (line " +
                               std::to_string(block_start + 20) + ")");
    int gaps = 0;
    for (auto& tok : tokenize(fields[0])) {
      if (tok == "xxxxx") {
        inst.query.push_back(kGapToken);
        ++gaps;
      } else {
        inst.query.push_back(tok);
      }
    }
    if (gaps != 1)
      throw std::runtime_error("read_cbt: expected exactly one xxxxx placeholder (line " +
                               std::to_string(block_start + 20) + ")");
    inst.answer = fields[1];
    std::vector<std::string> cands;
    {
      std::string cur;
      for (char c : fields.back() + "|") {
        if (c == '|') {
          const std::string t = normalize(cur);
          if (!t.empty()) cands.push_back(t);
          cur.clear();
        } else {
          cur.push_back(c);
        }
      }
    }
    inst.candidates = cands;

    // entities: every candidate occurrence in the passage, in document order
    std::vector<std::vector<std::string>> needles;
    for (const auto& c : cands) needles.push_back(tokenize(c));
    std::size_t pos = 0;
    while (pos < inst.passage.size()) {
      const std::size_t len = match_len_at(inst.passage, pos, needles);
      if (len == 0) {
        ++pos;
        continue;
      }
      std::string text;
      for (std::size_t k = 0; k < len; ++k) {
        if (k) text += ' ';
        text += inst.passage[pos + k];
      }
      inst.entities.push_back(EntitySpan{static_cast<int>(pos), static_cast<int>(pos + len - 1),
                                         normalize(text)});
      pos += len;
    }

    bool answer_found = false;
    for (const auto& e : inst.entities)
      if (e.text == inst.answer) {
        answer_found = true;
        break;
      }
    if (!answer_found) {
      ++dropped;
      block.clear();
      return;
    }
    validate(inst);
    data.push_back(std::move(inst));
    block.clear();
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      block_start = lineno + 1;
      continue;
    }
    if (block.empty()) block_start = lineno;
    block.push_back(line);
  }
  flush();
  if (dropped > 0)
    std::cerr << "read_cbt: dropped " << dropped << " instance(s) whose answer is not in the passage\n";
  return data;
}

}  // namespace memnet::corpus
