#include <doctest.h>

#include <set>

#include "bytener/corpus.hpp"
#include "bytener/eval.hpp"
#include "helpers.hpp"

using namespace bytener;
using testutil::TempFile;

TEST_CASE("jsonl load: field mapping") {
  TempFile f(".jsonl");
  f.write(
      R"({"doc_id":"d1","text":"AB binds","spans":[{"start":0,"end":2,"type":"protein"}]})"
      "\n");
  const Dataset ds = load_byte_offset_dataset(f.path());
  REQUIRE(ds.documents.size() == 1);
  CHECK(ds.documents[0].bytes.size() == 8);
  CHECK(ds.documents[0].spans ==
        std::vector<EntitySpan>{{0, 2, "protein"}});
  CHECK(ds.label_set == std::vector<std::string>{"protein"});
}

TEST_CASE("jsonl load: span out of bounds") {
  TempFile f(".jsonl");
  f.write(
      R"({"doc_id":"d1","text":"AB binds","spans":[{"start":7,"end":9,"type":"protein"}]})"
      "\n");
  CHECK_THROWS_WITH_AS(load_byte_offset_dataset(f.path()),
                       doctest::Contains("out of bounds"), DataError);
}

TEST_CASE("jsonl load: overlap, malformed line, line numbers") {
  TempFile f(".jsonl");
  f.write(
      R"({"doc_id":"d1","text":"abcdef","spans":[{"start":0,"end":3,"type":"x"},{"start":2,"end":4,"type":"x"}]})"
      "\n");
  CHECK_THROWS_WITH_AS(load_byte_offset_dataset(f.path()),
                       doctest::Contains("overlap"), DataError);

  TempFile g(".jsonl");
  g.write("{\"doc_id\":\"d1\",\"text\":\"ok\",\"spans\":[]}\nnot json\n");
  CHECK_THROWS_WITH_AS(load_byte_offset_dataset(g.path()),
                       doctest::Contains(":2"), DataError);
}

TEST_CASE("jsonl load: label set is sorted union") {
  TempFile f(".jsonl");
  f.write(
      R"({"doc_id":"a","text":"xxxx","spans":[{"start":0,"end":1,"type":"protein"}]})"
      "\n"
      R"({"doc_id":"b","text":"yyyy","spans":[{"start":1,"end":3,"type":"gene"}]})"
      "\n");
  CHECK(load_byte_offset_dataset(f.path()).label_set ==
        std::vector<std::string>{"gene", "protein"});
}

TEST_CASE("jsonl: byte offsets over multi-byte UTF-8") {
  TempFile f(".jsonl");
  // "αβ IL2" = CE B1 CE B2 20 49 4C 32: 8 bytes; span over IL2 = [5,8)
  f.write(
      "{\"doc_id\":\"u\",\"text\":\"αβ IL2\",\"spans\":[{\"start\":5,"
      "\"end\":8,\"type\":\"p\"}]}\n");
  const Dataset ds = load_byte_offset_dataset(f.path());
  CHECK(ds.documents[0].bytes.size() == 8);
  CHECK(ds.documents[0].bytes.substr(5, 3) == "IL2");
  CHECK(ds.documents[0].spans == std::vector<EntitySpan>{{5, 8, "p"}});
}

TEST_CASE("iob load: conversion and spacing") {
  TempFile f(".iob");
  f.write("IL-2\tB-protein\nbinds\tO\n\na\tB-x\nb\tI-x\n\nfoo\tO\nbar\tO\n");
  IobLoadReport report;
  const Dataset ds = load_token_iob_dataset(f.path(), &report);
  REQUIRE(ds.documents.size() == 3);

  CHECK(ds.documents[0].bytes == "IL-2 binds");
  CHECK(ds.documents[0].spans == std::vector<EntitySpan>{{0, 4, "protein"}});

  CHECK(ds.documents[1].bytes == "a b");
  CHECK(ds.documents[1].spans == std::vector<EntitySpan>{{0, 3, "x"}});

  CHECK(ds.documents[2].spans.empty());
  CHECK(report.repaired_tags == 0);
  CHECK(ds.label_set == std::vector<std::string>{"protein", "x"});
}

TEST_CASE("iob load: orphan I repaired and counted") {
  TempFile f(".iob");
  f.write("foo\tI-x\nbar\tI-y\n");
  IobLoadReport report;
  const Dataset ds = load_token_iob_dataset(f.path(), &report);
  CHECK(report.repaired_tags == 2);
  CHECK(ds.documents[0].spans ==
        std::vector<EntitySpan>{{0, 3, "x"}, {4, 7, "y"}});
}

TEST_CASE("iob load: B-count equals span count") {
  TempFile f(".iob");
  f.write(
      "a\tB-x\nb\tI-x\nc\tO\nd\tB-y\n\ne\tI-x\nf\tB-x\ng\tI-y\n\n");
  IobLoadReport report;
  const Dataset ds = load_token_iob_dataset(f.path(), &report);
  size_t spans = 0;
  for (const auto& d : ds.documents) spans += d.spans.size();
  // B tags: 3 explicit + 2 repaired orphans
  CHECK(report.repaired_tags == 2);
  CHECK(spans == 5);
}

TEST_CASE("iob load: bad tag") {
  TempFile f(".iob");
  f.write("foo\tZ-x\n");
  CHECK_THROWS_AS(load_token_iob_dataset(f.path()), DataError);
  TempFile g(".iob");
  g.write("foo no-tab\n");
  CHECK_THROWS_AS(load_token_iob_dataset(g.path()), DataError);
}

namespace {

Dataset make_docs(size_t n) {
  Dataset ds;
  for (size_t i = 0; i < n; ++i)
    ds.documents.push_back({"d" + std::to_string(i),
                            std::string(10 + i % 5, 'x'),
                            {}});
  return ds;
}

}  // namespace

TEST_CASE("split: sizes, determinism, disjointness") {
  const Dataset ds10 = make_docs(10);
  auto [train_a, dev_a] = split_train_dev(ds10, 0.1, 7);
  CHECK(dev_a.documents.size() == 1);
  CHECK(train_a.documents.size() == 9);
  auto [train_b, dev_b] = split_train_dev(ds10, 0.1, 7);
  CHECK(dev_a.documents[0].doc_id == dev_b.documents[0].doc_id);

  const Dataset ds4 = make_docs(4);
  auto [train_c, dev_c] = split_train_dev(ds4, 0.5, 3);
  CHECK(train_c.documents.size() == 2);
  CHECK(dev_c.documents.size() == 2);
  std::set<std::string> ids;
  for (const auto& d : train_c.documents) ids.insert(d.doc_id);
  for (const auto& d : dev_c.documents) ids.insert(d.doc_id);
  CHECK(ids.size() == 4);
}

TEST_CASE("split: different seeds satisfy the size contract") {
  const Dataset ds = make_docs(100);
  auto [train_a, dev_a] = split_train_dev(ds, 0.2, 1);
  auto [train_b, dev_b] = split_train_dev(ds, 0.2, 2);
  CHECK(dev_a.documents.size() == 20);
  CHECK(dev_b.documents.size() == 20);
  CHECK(train_a.documents.size() == 80);
  CHECK(train_b.documents.size() == 80);
}

TEST_CASE("split: errors") {
  CHECK_THROWS_AS(split_train_dev(make_docs(1), 0.5, 1), DataError);
  CHECK_THROWS_AS(split_train_dev(make_docs(4), 0.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(split_train_dev(make_docs(4), 1.0, 1),
                  std::invalid_argument);
}

TEST_CASE("write predictions: round trip and counts") {
  TempFile f(".jsonl");
  f.write(
      R"({"doc_id":"a","text":"abcdef","spans":[{"start":0,"end":2,"type":"p"}]})"
      "\n"
      R"({"doc_id":"b","text":"ghij","spans":[]})"
      "\n");
  const Dataset ds = load_byte_offset_dataset(f.path());

  std::vector<DocPrediction> preds{
      {"a", {{0, 2, "p"}, {3, 5, "q"}}},
      {"b", {{1, 2, "p"}}},
  };
  TempFile out(".jsonl");
  write_predictions(ds, preds, out.path());

  const Dataset re = load_byte_offset_dataset(out.path());
  REQUIRE(re.documents.size() == 2);
  CHECK(re.documents[0].spans == preds[0].spans);
  CHECK(re.documents[1].spans == preds[1].spans);
  CHECK(re.documents[0].bytes == "abcdef");

  // 2 lines, 3 span objects
  const std::string text = out.read();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  size_t span_objects = 0;
  for (size_t pos = 0; (pos = text.find("\"start\"", pos)) != std::string::npos;
       ++pos)
    ++span_objects;
  CHECK(span_objects == 3);
}

TEST_CASE("write predictions: empty list and unknown doc") {
  TempFile f(".jsonl");
  f.write(R"({"doc_id":"a","text":"abc","spans":[]})" "\n");
  const Dataset ds = load_byte_offset_dataset(f.path());

  TempFile out(".jsonl");
  write_predictions(ds, {}, out.path());
  const Dataset re = load_byte_offset_dataset(out.path());
  CHECK(re.documents[0].spans.empty());

  CHECK_THROWS_AS(write_predictions(ds, {{"zz", {}}}, out.path()), DataError);
}

TEST_CASE("full round trip: load(write(load(f))) == load(f)") {
  TempFile f(".jsonl");
  f.write(
      R"({"doc_id":"a","text":"one two three","spans":[{"start":0,"end":3,"type":"p"},{"start":4,"end":7,"type":"q"}]})"
      "\n"
      "{\"doc_id\":\"b\",\"text\":\"été IL2\",\"spans\":[{\"start\":5,\"end\":8,\"type\":\"p\"}]}\n");
  const Dataset first = load_byte_offset_dataset(f.path());

  TempFile out(".jsonl");
  write_predictions(first, gold_of(first), out.path());
  CHECK(load_byte_offset_dataset(out.path()) == first);
}
