#include <doctest.h>

#include "bytener/config.hpp"
#include "helpers.hpp"

using namespace bytener;
using testutil::TempFile;

TEST_CASE("defaults match the published hyperparameters") {
  const RunConfig cfg;
  CHECK(cfg.train.dropout == 0.5);
  CHECK(cfg.train.byte_dropout == 0.3);
  CHECK(cfg.train.lr == 1e-4);
  CHECK(cfg.train.optimizer == "adam");
  CHECK(cfg.train.batch_size == 256);
  CHECK(cfg.train.epochs == 300);
  CHECK(cfg.train.init_range == 0.05);
  CHECK(cfg.dims.conv_filters == 250);
  CHECK(cfg.dims.conv_width == 7);
  CHECK(cfg.dims.conv_stride == 1);
  CHECK(cfg.dims.conv_layers == 20);
  CHECK(cfg.dims.blstm_units == 250);
  CHECK(cfg.dims.bpe_dim == 100);
  CHECK(cfg.bpe_embedding_dim == 100);
  CHECK(cfg.word_embedding_dim == 200);
  CHECK(cfg.skipgram.dim == 100);
  CHECK(cfg.skipgram.window == 5);
  CHECK(cfg.skipgram.epochs == 10);
  CHECK(cfg.window.window_len == 150);
  CHECK(cfg.window.stride == 75);
  CHECK(cfg.features.use_byte_ids);
  CHECK(cfg.features.use_pretrained_bpe);
  CHECK_FALSE(cfg.features.use_bpe_ids);
  CHECK_FALSE(cfg.features.use_pretrained_word);
  CHECK(cfg.features.byte_dropout_rate == 0.3);
}

TEST_CASE("parse: partial override keeps other defaults") {
  const RunConfig cfg = parse_run_config(
      R"({"train":{"epochs":5,"seed":9},"window":{"stride":50}})", "test");
  CHECK(cfg.train.epochs == 5);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.train.batch_size == 256);
  CHECK(cfg.window.stride == 50);
  CHECK(cfg.window.window_len == 150);
}

TEST_CASE("parse: unknown key is named") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"trian":{}})", "test"),
                       doctest::Contains("trian"), DataError);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"train":{"lrr":1}})", "test"),
                       doctest::Contains("train.lrr"), DataError);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"paths":{"out":"x"}})", "test"),
                       doctest::Contains("paths.out"), DataError);
}

TEST_CASE("parse: value validation") {
  CHECK_THROWS_AS(parse_run_config(R"({"train":{"optimizer":"sgd"}})", "t"),
                  DataError);
  CHECK_THROWS_AS(parse_run_config(R"({"window":{"stride":0}})", "t"),
                  DataError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"window":{"window_len":10,"stride":20}})", "t"),
      DataError);
  CHECK_THROWS_AS(parse_run_config(R"({"data_format":"xml"})", "t"),
                  DataError);
  CHECK_THROWS_AS(parse_run_config(R"({"dev_fraction":1.5})", "t"), DataError);
  CHECK_THROWS_AS(parse_run_config("not json", "t"), DataError);
  CHECK_THROWS_AS(
      parse_run_config(
          R"({"features":{"use_byte_ids":false,"use_pretrained_bpe":false}})",
          "t"),
      DataError);
}

TEST_CASE("resolved config round trips") {
  RunConfig cfg;
  cfg.train.epochs = 7;
  cfg.train.lr = 0.002;
  cfg.paths.train_data = "/tmp/x.jsonl";
  cfg.paths.checkpoint = "/tmp/m.ckpt";
  cfg.features.use_pretrained_word = true;
  cfg.data_format = "iob";

  TempFile f(".json");
  save_run_config(cfg, f.path());
  const RunConfig back = load_run_config(f.path());
  CHECK(back.train.epochs == 7);
  CHECK(back.train.lr == 0.002);
  CHECK(back.paths.train_data == "/tmp/x.jsonl");
  CHECK(back.paths.checkpoint == "/tmp/m.ckpt");
  CHECK(back.features.use_pretrained_word);
  CHECK(back.data_format == "iob");
  CHECK(back.train.batch_size == cfg.train.batch_size);
}
