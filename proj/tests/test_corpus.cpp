#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "memnet/corpus.hpp"

using namespace memnet::corpus;

namespace {

ClozeInstance simple_instance() {
  ClozeInstance inst;
  inst.id = "i1";
  inst.passage = {"t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9"};
  inst.entities = {EntitySpan{4, 4, "t4"}};
  inst.query = {"a", "b", kGapToken, "c", "d"};
  inst.answer = "t4";
  return inst;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("memnet-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("normalize and tokenize") {
  CHECK(normalize("Heart  Failure") == "heart failure");
  CHECK(normalize("  a\tb ") == "a b");
  CHECK(tokenize("The Cat sat") == std::vector<std::string>{"the", "cat", "sat"});
}

TEST_CASE("validate") {
  ClozeInstance inst = simple_instance();
  CHECK_NOTHROW(validate(inst));
  SUBCASE("missing gap") {
    inst.query = {"a", "b"};
    CHECK_THROWS(validate(inst));
  }
  SUBCASE("two gaps") {
    inst.query.push_back(kGapToken);
    CHECK_THROWS(validate(inst));
  }
  SUBCASE("span out of bounds") {
    inst.entities[0].end = 99;
    CHECK_THROWS(validate(inst));
  }
  SUBCASE("overlapping spans") {
    inst.entities = {EntitySpan{2, 4, "t2 t3 t4"}, EntitySpan{4, 5, "t4 t5"}};
    inst.answer = "t2 t3 t4";
    CHECK_THROWS(validate(inst));
  }
  SUBCASE("answer not a passage entity") {
    inst.answer = "t7";
    CHECK_THROWS(validate(inst));
  }
  SUBCASE("answer missing from candidates") {
    inst.candidates = std::vector<std::string>{"t9"};
    CHECK_THROWS(validate(inst));
  }
}

TEST_CASE("build_vocab") {
  SUBCASE("three tokens plus reserved") {
    ClozeInstance inst;
    inst.id = "v";
    inst.passage = {"x", "y", "z"};
    inst.entities = {EntitySpan{0, 0, "x"}};
    inst.query = {kGapToken};
    inst.answer = "x";
    Vocabulary v = build_vocab({inst}, 1);
    CHECK(v.num_tokens() == 6);
    CHECK(v.num_labels() == 1);
    CHECK(v.token_id("x") >= 3);
    CHECK(v.token_id(kGapToken) == Vocabulary::kGap);
  }
  SUBCASE("below min_count maps to unk") {
    ClozeInstance inst = simple_instance();
    inst.passage.push_back("t0");  // t0 twice, others once
    Vocabulary v = build_vocab({inst}, 2);
    CHECK(v.token_id("t0") >= 3);
    CHECK(v.token_id("t1") == Vocabulary::kUnk);
  }
}

TEST_CASE("extract_windows") {
  ClozeInstance inst = simple_instance();
  Vocabulary v = build_vocab({inst}, 1);
  SUBCASE("five tokens including the entity") {
    WindowSet ws = extract_windows(inst, 2, 300, v);
    REQUIRE(ws.windows.size() == 1);
    const Window& w = ws.windows[0];
    REQUIRE(w.tokens.size() == 5);
    CHECK(w.tokens[0] == v.token_id("t2"));
    CHECK(w.tokens[2] == v.token_id("t4"));
    CHECK(w.tokens[4] == v.token_id("t6"));
    CHECK(w.entity == "t4");
    CHECK(w.entity_offset == 2);
    CHECK(w.entity_len == 1);
  }
  SUBCASE("boundary padding") {
    inst.entities = {EntitySpan{0, 0, "t0"}};
    inst.answer = "t0";
    WindowSet ws = extract_windows(inst, 2, 300, v);
    REQUIRE(ws.windows.size() == 1);
    CHECK(ws.windows[0].tokens[0] == Vocabulary::kPad);
    CHECK(ws.windows[0].tokens[1] == Vocabulary::kPad);
    CHECK(ws.windows[0].tokens[2] == v.token_id("t0"));
  }
  SUBCASE("memory truncation keeps the first windows in document order") {
    ClozeInstance big;
    big.id = "big";
    const int n = 350;
    for (int i = 0; i < 3 * n; ++i) big.passage.push_back("w" + std::to_string(i % 7));
    for (int i = 0; i < n; ++i) {
      const int at = 3 * i;
      big.passage[static_cast<std::size_t>(at)] = "e" + std::to_string(i % 5);
      big.entities.push_back(EntitySpan{at, at, "e" + std::to_string(i % 5)});
    }
    big.query = {"a", kGapToken, "b"};
    big.answer = "e0";
    Vocabulary bv = build_vocab({big}, 1);
    WindowSet ws = extract_windows(big, 2, 300, bv);
    CHECK(ws.windows.size() == 300);
    int prev = -1;
    for (const auto& w : ws.windows) {
      CHECK(w.span_start > prev);
      prev = w.span_start;
    }
    CHECK(ws.windows.front().span_start == 0);
  }
  SUBCASE("query window excludes the gap and pads out of bounds") {
    WindowSet ws = extract_windows(inst, 2, 300, v);
    REQUIRE(ws.query_tokens.size() == 4);
    CHECK(ws.query_tokens[0] == v.token_id("a"));
    CHECK(ws.query_tokens[3] == v.token_id("d"));
    inst.query = {kGapToken, "c"};
    WindowSet ws2 = extract_windows(inst, 2, 300, v);
    REQUIRE(ws2.query_tokens.size() == 4);
    CHECK(ws2.query_tokens[0] == Vocabulary::kPad);
    CHECK(ws2.query_tokens[1] == Vocabulary::kPad);
    CHECK(ws2.query_tokens[2] == v.token_id("c"));
    CHECK(ws2.query_tokens[3] == Vocabulary::kPad);
  }
  SUBCASE("no entities is an error") {
    inst.entities.clear();
    CHECK_THROWS_WITH(extract_windows(inst, 2, 300, v), "no candidates");
  }
}

TEST_CASE("anonymize") {
  ClozeInstance inst;
  inst.id = "a1";
  inst.passage = {"take", "aspirin", "for", "stroke", "with", "aspirin", "daily"};
  inst.entities = {EntitySpan{1, 1, "aspirin"}, EntitySpan{3, 3, "stroke"},
                   EntitySpan{5, 5, "aspirin"}};
  inst.query = {"what", "treats", kGapToken, "best"};
  inst.answer = "stroke";
  SUBCASE("numbering by first occurrence") {
    ClozeInstance anon = anonymize(inst);
    REQUIRE(anon.entities.size() == 3);
    CHECK(anon.entities[0].text == "@entity_0");
    CHECK(anon.entities[1].text == "@entity_1");
    CHECK(anon.entities[2].text == "@entity_0");
    CHECK(anon.answer == "@entity_1");
    CHECK(anon.passage[1] == "@entity_0");
    CHECK(anon.passage[3] == "@entity_1");
    CHECK_NOTHROW(validate(anon));
  }
  SUBCASE("single entity") {
    ClozeInstance one = simple_instance();
    ClozeInstance anon = anonymize(one);
    CHECK(anon.answer == "@entity_0");
    CHECK(anon.entities[0].text == "@entity_0");
  }
  SUBCASE("de-anonymization is the identity on answers") {
    ClozeInstance anon = anonymize(inst);
    CHECK(deanonymize_prediction(anon, anon.answer) == "stroke");
    CHECK(deanonymize_prediction(anon, "@entity_0") == "aspirin");
    CHECK(deanonymize_prediction(anon, "not-an-entity") == "not-an-entity");
  }
  SUBCASE("multi-word entity collapses to one token") {
    ClozeInstance mw;
    mw.id = "mw";
    mw.passage = {"acute", "heart", "failure", "treated", "here"};
    mw.entities = {EntitySpan{1, 2, "heart failure"}};
    mw.query = {"patient", "with", kGapToken};
    mw.answer = "heart failure";
    ClozeInstance anon = anonymize(mw);
    CHECK(anon.passage == std::vector<std::string>{"acute", "@entity_0", "treated", "here"});
    CHECK(anon.entities[0].start == 1);
    CHECK(anon.entities[0].end == 1);
  }
  SUBCASE("query mentions are rewritten") {
    inst.query = {"does", "aspirin", "treat", kGapToken};
    ClozeInstance anon = anonymize(inst);
    CHECK(anon.query == std::vector<std::string>{"does", "@entity_0", "treat", kGapToken});
  }
  SUBCASE("anonymized label space equals the max per-instance entity count") {
    // instances with 2, 3 and 1 distinct entities
    ClozeInstance two = inst;
    ClozeInstance three;
    three.id = "three";
    three.passage = {"a", "x", "b", "y", "c"};
    three.entities = {EntitySpan{0, 0, "a"}, EntitySpan{2, 2, "b"}, EntitySpan{4, 4, "c"}};
    three.query = {kGapToken};
    three.answer = "b";
    ClozeInstance one = simple_instance();
    Dataset train = {anonymize(two), anonymize(three), anonymize(one)};
    Vocabulary v = build_vocab(train, 1);
    CHECK(v.num_labels() == 3);
  }
}

TEST_CASE("cap_candidates") {
  ClozeInstance inst;
  inst.id = "cap";
  for (int i = 0; i < 112; ++i) {
    inst.passage.push_back("e" + std::to_string(i));
    inst.entities.push_back(EntitySpan{i, i, "e" + std::to_string(i)});
  }
  inst.query = {kGapToken, "x"};
  inst.answer = "e42";
  SUBCASE("exactly ten including the answer") {
    ClozeInstance capped = cap_candidates(inst, 10, 7);
    REQUIRE(capped.candidates.has_value());
    CHECK(capped.candidates->size() == 10);
    int hits = 0;
    for (const auto& c : *capped.candidates)
      if (c == "e42") ++hits;
    CHECK(hits == 1);
    std::set<std::string> uniq(capped.candidates->begin(), capped.candidates->end());
    CHECK(uniq.size() == 10);
  }
  SUBCASE("exhaustion keeps all distinct entities") {
    ClozeInstance small;
    small.id = "small";
    small.passage = {"a", "b", "c"};
    small.entities = {EntitySpan{0, 0, "a"}, EntitySpan{1, 1, "b"}, EntitySpan{2, 2, "c"}};
    small.query = {kGapToken};
    small.answer = "b";
    ClozeInstance capped = cap_candidates(small, 10, 7);
    CHECK(capped.candidates->size() == 3);
  }
  SUBCASE("same seed is deterministic") {
    ClozeInstance a = cap_candidates(inst, 10, 99);
    ClozeInstance b = cap_candidates(inst, 10, 99);
    CHECK(*a.candidates == *b.candidates);
    ClozeInstance c = cap_candidates(inst, 10, 100);
    CHECK(*a.candidates != *c.candidates);  // overwhelmingly likely
  }
}

TEST_CASE("filter_seen") {
  ClozeInstance train;
  train.id = "tr";
  train.passage = {"heart", "failure", "and", "rest"};
  train.entities = {EntitySpan{0, 1, "heart failure"}};
  train.query = {kGapToken};
  train.answer = "heart failure";

  ClozeInstance kept = simple_instance();
  kept.id = "kept";
  kept.passage = {"x", "heart", "failure", "y"};
  kept.entities = {EntitySpan{1, 2, "heart failure"}};
  kept.answer = "heart failure";
  ClozeInstance droppedi = simple_instance();
  droppedi.id = "dropped";
  droppedi.passage = {"x", "sepsis", "y"};
  droppedi.entities = {EntitySpan{1, 1, "sepsis"}};
  droppedi.answer = "sepsis";

  Dataset test = {kept, droppedi};
  Dataset out = filter_seen(test, {train});
  REQUIRE(out.size() == 1);
  CHECK(out[0].id == "kept");
}

TEST_CASE("embeddings") {
  TempDir dir;
  ClozeInstance inst;
  inst.id = "v";
  inst.passage = {"aa", "bb", "cc", "dd", "ee", "ff"};
  inst.entities = {EntitySpan{0, 0, "aa"}};
  inst.query = {kGapToken};
  inst.answer = "aa";
  Vocabulary v = build_vocab({inst}, 1);  // 6 real tokens

  SUBCASE("full coverage with header") {
    std::ofstream f(dir.file("emb.txt"));
    f << "6 2\n";
    for (const auto& w : {"aa", "bb", "cc", "dd", "ee", "ff"}) f << w << " 1.0 0.5\n";
    f.close();
    EmbeddingLoad l = load_embeddings(dir.file("emb.txt"), v);
    CHECK(l.coverage == doctest::Approx(1.0));
    CHECK(l.table.dim == 2);
    REQUIRE(l.table.find("aa") != nullptr);
    CHECK((*l.table.find("aa"))(1) == doctest::Approx(0.5));
  }
  SUBCASE("empty file") {
    std::ofstream(dir.file("empty.txt")).close();
    EmbeddingLoad l = load_embeddings(dir.file("empty.txt"), v);
    CHECK(l.coverage == 0.0);
  }
  SUBCASE("half coverage without header") {
    std::ofstream f(dir.file("half.txt"));
    f << "aa 1 2 3\nbb 4 5 6\ncc 7 8 9\n";
    f.close();
    EmbeddingLoad l = load_embeddings(dir.file("half.txt"), v);
    CHECK(l.coverage == doctest::Approx(0.5));
    CHECK(l.table.dim == 3);
  }
  SUBCASE("inconsistent dimensions") {
    std::ofstream f(dir.file("bad.txt"));
    f << "aa 1 2 3\nbb 4 5\n";
    f.close();
    CHECK_THROWS(load_embeddings(dir.file("bad.txt"), v));
  }
}

TEST_CASE("canonical round trip") {
  TempDir dir;
  ClozeInstance a = simple_instance();
  ClozeInstance b = simple_instance();
  b.id = "i2";
  b.candidates = std::vector<std::string>{"t4", "zz"};
  ClozeInstance c = anonymize(simple_instance());
  c.id = "i3";
  Dataset data = {a, b, c};
  const std::string path = dir.file("data.jsonl");
  write_canonical(data, path);
  Dataset back = read_canonical(path);
  REQUIRE(back.size() == 3);
  CHECK(back[0].id == a.id);
  CHECK(back[0].passage == a.passage);
  CHECK(back[0].query == a.query);
  CHECK(back[0].answer == a.answer);
  CHECK_FALSE(back[0].candidates.has_value());
  REQUIRE(back[1].candidates.has_value());
  CHECK(*back[1].candidates == *b.candidates);
  CHECK(back[1].entities[0].start == 4);
  CHECK(back[2].entity_map == c.entity_map);

  SUBCASE("missing gap is a parse error with a line number") {
    std::ofstream f(dir.file("bad.jsonl"));
    f << R"({"id":"x","passage":["a"],"entities":[[0,0,"a"]],"query":["no","gap"],"answer":"a","candidates":null})"
      << "\n";
    f.close();
    CHECK_THROWS_WITH_AS(static_cast<void>(read_canonical(dir.file("bad.jsonl"))),
                         doctest::Contains(":1:"), std::runtime_error);
  }
  SUBCASE("duplicated id") {
    write_canonical({a, a}, dir.file("dup.jsonl"));
    CHECK_THROWS_WITH_AS(static_cast<void>(read_canonical(dir.file("dup.jsonl"))),
                         doctest::Contains("duplicate"), std::runtime_error);
  }
}

TEST_CASE("read_json_adapted") {
  TempDir dir;
  const std::string path = dir.file("foreign.jsonl");
  {
    std::ofstream f(path);
    f << R"({"qid":"q1","doc":"the patient took aspirin for a stroke yesterday","question":"treatment was @placeholder given","gold":"aspirin","options":["aspirin","stroke"]})"
      << "\n";
    f << R"({"qid":"q2","doc":"no answer here at all","question":"@placeholder missing","gold":"absent","options":["absent"]})"
      << "\n";
  }
  AdapterConfig adapter;
  adapter.id_field = "qid";
  adapter.passage_field = "doc";
  adapter.query_field = "question";
  adapter.answer_field = "gold";
  adapter.candidates_field = "options";
  adapter.gap_token = "@placeholder";
  Dataset data = read_json_adapted(path, adapter);
  REQUIRE(data.size() == 1);  // q2 dropped: answer not in passage
  const ClozeInstance& inst = data[0];
  CHECK(inst.id == "q1");
  CHECK(inst.gap_index() == 2);
  REQUIRE(inst.entities.size() == 2);
  CHECK(inst.entities[0].text == "aspirin");
  CHECK(inst.entities[1].text == "stroke");
  CHECK_NOTHROW(validate(inst));
}

TEST_CASE("read_cbt") {
  TempDir dir;
  const std::string path = dir.file("cbt.txt");
  {
    std::ofstream f(path);
    for (int i = 1; i <= 20; ++i)
      f << i << " the " << (i % 2 ? "fox" : "hen") << " walked near the barn .\n";
    f << "21 where did the XXXXX walk\tfox\t\tfox|hen|barn|cat|dog|owl|pig|cow|bee|ant\n\n";
    for (int i = 1; i <= 20; ++i) f << i << " a quiet day in the village\n";
    f << "21 the XXXXX slept\twolf\t\twolf|sheep|a|b|c|d|e|f|g|h\n";
  }
  Dataset data = read_cbt(path);
  REQUIRE(data.size() == 1);  // second block's answer never occurs in its passage
  const ClozeInstance& inst = data[0];
  CHECK(inst.candidates->size() == 10);
  CHECK(inst.answer == "fox");
  CHECK(inst.gap_index() == 3);
  // fox occurs in 10 of 20 sentences, hen in the other 10, barn in all 20
  int fox = 0, barn = 0;
  for (const auto& e : inst.entities) {
    if (e.text == "fox") ++fox;
    if (e.text == "barn") ++barn;
  }
  CHECK(fox == 10);
  CHECK(barn == 20);
  CHECK_NOTHROW(validate(inst));

  SUBCASE("block with wrong line count") {
    std::ofstream f(dir.file("short.txt"));
    f << "1 only line\n";
    f << "2 another\n\n";
    f.close();
    CHECK_THROWS(static_cast<void>(read_cbt(dir.file("short.txt"))));
  }
}
