#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "numerate/errors.hpp"
#include "numerate/io.hpp"
#include "numerate/model.hpp"
#include "numerate/synth.hpp"

using namespace numerate;
using namespace numerate::model;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(heads::HeadKind kind, std::uint64_t seed = 1) {
  RunConfig c;
  c.encoder.dim = 16;
  c.encoder.gru_hidden = 8;
  c.encoder.tf_layers = 1;
  c.encoder.tf_heads = 2;
  c.encoder.tf_ff = 16;
  c.encoder.digit_char_dim = 4;
  c.encoder.digit_hidden = 6;
  c.head.kind = kind;
  c.head.mlp_hidden = 8;
  c.head.em.k = 3;
  c.head.em.iters = 20;
  c.batch = 8;
  c.epochs = 2;
  c.lr = 1e-2;
  c.seed = seed;
  return c;
}

std::vector<text::NormalizedSentence> corpus_of(std::size_t n, std::uint64_t seed) {
  return synth::normalize(synth::generate(synth::preset("contextual8"), n, seed));
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("numerate_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<diff::Array> params_of(const Model& m) {
  std::vector<diff::Array> out;
  for (const auto* p : m.store().all()) out.push_back(p->value);
  return out;
}

bool same_params(const Model& a, const Model& b) {
  const auto pa = params_of(a), pb = params_of(b);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!pa[i].same_shape(pb[i])) return false;
    for (std::size_t j = 0; j < pa[i].size(); ++j) {
      if (pa[i][j] != pb[i][j]) return false;
    }
  }
  return true;
}

}  // namespace

TEST(EarlyStopping, PatienceThreeExample) {
  EarlyStopping s(3);
  const double losses[] = {5, 4, 4.1, 4.2, 4.3};
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(s.update(losses[i])) << i;
  EXPECT_TRUE(s.update(losses[4]));
  EXPECT_EQ(s.best_epoch(), 2u);
  EXPECT_DOUBLE_EQ(s.best_loss(), 4.0);
}

TEST(EarlyStopping, ImprovementResetsCounter) {
  EarlyStopping s(2);
  EXPECT_FALSE(s.update(3));
  EXPECT_FALSE(s.update(4));
  EXPECT_FALSE(s.update(2));
  EXPECT_TRUE(s.improved());
  EXPECT_FALSE(s.update(2));  // ties do not count as improvement
  EXPECT_TRUE(s.update(5));
  EXPECT_EQ(s.best_epoch(), 3u);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = tiny(heads::HeadKind::Gmm, 9);
  c.encoder.kind = encoder::EncoderKind::Transformer;
  c.encoder.numeric = encoder::NumericEmbedder::Both;
  c.optimizer = diff::OptimizerKind::Sgd;
  c.dollar_only = true;
  const RunConfig back = parse_config(config_json(c));
  EXPECT_EQ(config_json(back), config_json(c));
}

TEST(RunConfig, PartialOverridesDefaults) {
  const RunConfig c = parse_config(R"({"head": {"kind": "loglp"}, "train": {"batch": 4}})");
  EXPECT_EQ(c.head.kind, heads::HeadKind::LogLP);
  EXPECT_EQ(c.batch, 4u);
  EXPECT_EQ(c.epochs, 10u);
  EXPECT_EQ(c.patience, 3u);
}

TEST(RunConfig, Rejections) {
  EXPECT_THROW(parse_config(R"({"trian": {}})"), DataError);
  EXPECT_THROW(parse_config(R"({"train": {"batchsize": 3}})"), DataError);
  EXPECT_THROW(parse_config(R"({"head": {"kind": "gauss"}})"), DataError);
  EXPECT_THROW(parse_config("{not json"), DataError);
  RunConfig c;
  c.batch = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = RunConfig{};
  c.lr = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = RunConfig{};
  c.head.kind = heads::HeadKind::Disc;
  c.encoder.numeric = encoder::NumericEmbedder::None;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(RunConfig, TwoGroupsOnlyForTransformer) {
  RunConfig c;
  c.lr = 0.5;
  c.body_lr = 0.1;
  c.head_lr = 0.2;
  EXPECT_EQ(c.optimizer_config().group_lr, (std::vector<double>{0.5, 0.5}));
  c.encoder.kind = encoder::EncoderKind::Transformer;
  EXPECT_EQ(c.optimizer_config().group_lr, (std::vector<double>{0.1, 0.2}));
}

TEST(Train, SameSeedSameParameters) {
  const auto tr = corpus_of(40, 1), va = corpus_of(10, 2);
  const Model a = fit(tiny(heads::HeadKind::DExp), tr, va);
  const Model b = fit(tiny(heads::HeadKind::DExp), tr, va);
  EXPECT_TRUE(same_params(a, b));
  const Model c = fit(tiny(heads::HeadKind::DExp, 2), tr, va);
  EXPECT_FALSE(same_params(a, c));
}

TEST(Train, EmptySplitsRejected) {
  const auto tr = corpus_of(10, 1);
  EXPECT_THROW(fit(tiny(heads::HeadKind::LogLP), {}, tr), DataError);
  EXPECT_THROW(fit(tiny(heads::HeadKind::LogLP), tr, {}), DataError);
}

TEST(Train, DivergenceIsNumericalError) {
  RunConfig c = tiny(heads::HeadKind::LogLP);
  c.optimizer = diff::OptimizerKind::Sgd;
  c.lr = 1e200;
  c.clip_norm = 0.0;
  c.epochs = 3;
  const auto tr = corpus_of(30, 1);
  EXPECT_THROW(fit(c, tr, tr), NumericalError);
}

TEST(Train, ReturnsBestEpochParameters) {
  const auto tr = corpus_of(40, 1), va = corpus_of(20, 2);
  RunConfig c = tiny(heads::HeadKind::LogLP);
  c.epochs = 4;
  TrainResult r;
  const Model m = fit(c, tr, va, &r);
  ASSERT_FALSE(r.epochs.empty());
  double best = r.epochs[0].valid_loss;
  for (const auto& e : r.epochs) best = std::min(best, e.valid_loss);
  EXPECT_DOUBLE_EQ(r.best_valid, best);
  EXPECT_DOUBLE_EQ(validation_loss(m, va), best);
}

TEST(Train, DollarFilter) {
  const auto s = io::parse_sentence(R"({"tokens":["costs","$","[#MASK]","now"],"numbers":[[2,5]]})");
  const auto t = io::parse_sentence(R"({"tokens":["costs","[#MASK]","now"],"numbers":[[1,5]]})");
  const auto kept = dollar_filter({s, t});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0], s);
}

class PerHead : public ::testing::TestWithParam<heads::HeadKind> {};

TEST_P(PerHead, CheckpointRoundTripIsExact) {
  const auto tr = corpus_of(40, 1), va = corpus_of(10, 2), te = corpus_of(30, 3);
  const Model m = fit(tiny(GetParam()), tr, va);
  const auto dir = temp_dir(std::string("ckpt_") + heads::head_name(GetParam()));
  m.save(dir);
  const Model back = Model::load(dir);
  EXPECT_TRUE(same_params(m, back));
  EXPECT_EQ(back.pool(), m.pool());
  eval::EvalOptions o;
  o.seed = 5;
  o.train_pool = m.pool();
  const auto a = eval::records_jsonl(eval::collect_records(ModelPredictor(m), te, corpus::EvalMode::Standard, o));
  const auto b = eval::records_jsonl(eval::collect_records(ModelPredictor(back), te, corpus::EvalMode::Standard, o));
  EXPECT_EQ(a, b);
  fs::remove_all(dir);
}

// Loss on a fixed 10-sentence set, measured after each epoch, keeps falling.
// Disc draws a fresh negative per step and starts on a flat saddle, so it only
// has to show a clear net decrease.
TEST_P(PerHead, OverfitLossDecreases) {
  const auto fixture = corpus_of(10, 4);
  RunConfig c = tiny(GetParam());
  c.encoder.gru_dropout = 0.0;
  c.mask = {1.0, 1.0, 0.0, 0.0};
  c.batch = 2;
  c.epochs = 12;
  c.patience = 100;
  c.lr = 5e-3;
  const bool disc = GetParam() == heads::HeadKind::Disc;
  if (disc) {
    c.encoder.dim = 32;
    c.head.mlp_hidden = 64;
    c.lr = 3e-2;
  }
  TrainResult r;
  fit(c, fixture, fixture, &r);
  ASSERT_EQ(r.epochs.size(), 12u);
  if (disc) {
    EXPECT_LT(r.epochs.back().valid_loss, r.epochs[1].valid_loss - 0.1);
    return;
  }
  for (std::size_t e = 2; e < r.epochs.size(); ++e) {
    EXPECT_LT(r.epochs[e].valid_loss, r.epochs[e - 1].valid_loss) << "epoch " << e + 1;
  }
}

INSTANTIATE_TEST_SUITE_P(Heads, PerHead,
                         ::testing::Values(heads::HeadKind::LogLP, heads::HeadKind::FlowLP, heads::HeadKind::DExp,
                                           heads::HeadKind::Gmm, heads::HeadKind::Disc),
                         [](const auto& info) { return std::string(heads::head_name(info.param)); });

TEST(Checkpoint, TransformerAndDigitRnnRoundTrip) {
  RunConfig c = tiny(heads::HeadKind::DExp);
  c.encoder.kind = encoder::EncoderKind::Transformer;
  c.encoder.numeric = encoder::NumericEmbedder::Both;
  const auto tr = corpus_of(20, 1);
  const Model m = fit(c, tr, tr);
  const auto dir = temp_dir("ckpt_tf");
  m.save(dir);
  EXPECT_TRUE(same_params(m, Model::load(dir)));
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptPayloadsAreDataErrors) {
  const auto tr = corpus_of(20, 1);
  const Model m = fit(tiny(heads::HeadKind::LogLP), tr, tr);
  const auto dir = temp_dir("ckpt_bad");
  m.save(dir);
  const auto bytes = io::read_file(dir / "params.bin");
  io::write_file(dir / "params.bin", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(Model::load(dir), DataError);
  io::write_file(dir / "manifest.json", "{}");
  EXPECT_THROW(Model::load(dir), DataError);
  fs::remove_all(dir);
  EXPECT_THROW(Model::load(dir), DataError);
}
