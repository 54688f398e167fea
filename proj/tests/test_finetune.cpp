#include <cmath>

#include "doctest.h"
#include "spikestream/distill.hpp"
#include "spikestream/error.hpp"
#include "spikestream/finetune.hpp"
#include "synth.hpp"
#include "testutil.hpp"

using namespace spikestream;

TEST_CASE("cross-entropy examples") {
  // perfect prediction
  CHECK(ce_loss(Tensor::from({3}, {0.0f, 1.0f, 0.0f}),
                one_hot(1, 3)) == 0.0);

  // uniform over 10 classes -> ln 10
  Tensor u = Tensor::full({10}, 0.1f);
  CHECK(std::fabs(ce_loss(u, one_hot(3, 10)) - std::log(10.0)) < 1e-6);

  // symmetry under a consistent class permutation
  Rng rng(1);
  Tensor y = Tensor::zeros({4});
  double z = 0;
  for (float& v : y.data) {
    v = rng.uniform(0.05f, 1.0f);
    z += v;
  }
  for (float& v : y.data) v = static_cast<float>(v / z);
  const double base = ce_loss(y, one_hot(2, 4));
  Tensor yp = Tensor::zeros({4});
  const int perm[4] = {3, 0, 2, 1};
  for (int i = 0; i < 4; ++i) yp.data[perm[i]] = y.data[i];
  CHECK(ce_loss(yp, one_hot(perm[2], 4)) == doctest::Approx(base));

  // contract violations
  CHECK_THROWS_AS(ce_loss(y, Tensor::from({4}, {1, 1, 0, 0})), Error);
  CHECK_THROWS_AS(ce_loss(y, Tensor::from({4}, {0.5f, 0.5f, 0, 0})), Error);
  CHECK_THROWS_AS(ce_loss(Tensor::from({2}, {0.0f, 1.0f}), one_hot(0, 2)),
                  Error);

  // batch mean
  const std::vector<Tensor> probs = {u, u};
  const std::vector<Tensor> targets = {one_hot(0, 10), one_hot(7, 10)};
  CHECK(std::fabs(ce_loss_batch(probs, targets) - std::log(10.0)) < 1e-6);
}

TEST_CASE("kl divergence examples") {
  // identical distributions: exactly zero, term by term
  Tensor h = Tensor::from({3}, {0.2f, 0.5f, 0.3f});
  CHECK(kl_loss(h, h, 1e-10) == 0.0);

  // [1,0] vs [.5,.5] -> ln 2
  CHECK(std::fabs(kl_loss(Tensor::from({2}, {1, 0}),
                          Tensor::from({2}, {0.5f, 0.5f}), 1e-10) -
                  std::log(2.0)) < 1e-6);

  // zeros in matching slots are fine thanks to epsilon
  CHECK(kl_loss(Tensor::from({2}, {0, 1}), Tensor::from({2}, {0, 1}), 1e-10) ==
        0.0);

  CHECK_THROWS_AS(kl_loss(Tensor::from({2}, {-0.1f, 1.1f}),
                          Tensor::from({2}, {0.5f, 0.5f}), 1e-10),
                  Error);
  CHECK_THROWS_AS(kl_loss(Tensor::from({2}, {0.7f, 0.7f}),
                          Tensor::from({2}, {0.5f, 0.5f}), 1e-10),
                  Error);

  // nonnegative for valid inputs (epsilon perturbation bounded below)
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = Tensor::zeros({5}), b = Tensor::zeros({5});
    double za = 0, zb = 0;
    for (int i = 0; i < 5; ++i) {
      a.data[i] = rng.uniform(0.0f, 1.0f);
      b.data[i] = rng.uniform(0.01f, 1.0f);
      za += a.data[i];
      zb += b.data[i];
    }
    for (int i = 0; i < 5; ++i) {
      a.data[i] = static_cast<float>(a.data[i] / za);
      b.data[i] = static_cast<float>(b.data[i] / zb);
    }
    CHECK(kl_loss(a, b, 1e-10) >= -1e-9);
  }
}

TEST_CASE("dual-loss algebraic reductions") {
  Tensor h = Tensor::from({3}, {0.6f, 0.3f, 0.1f});
  Tensor y = Tensor::from({3}, {0.2f, 0.5f, 0.3f});
  const Tensor t = one_hot(1, 3);
  // lambda = 0 reduces to the KL term
  CHECK(ft_loss(h, y, t, 0.0, 1e-10) == kl_loss(h, y, 1e-10));
  // teacher == student reduces to lambda * CE
  CHECK(ft_loss(y, y, t, 0.7, 1e-10) == 0.7 * ce_loss(y, t));
}

TEST_CASE("classify: softmax over cosine similarities") {
  Rng rng(7);
  LabelEmbeddings labels;
  for (int k = 0; k < 4; ++k) {
    labels.embeddings.push_back(testutil::random_tensor({8}, -1, 1, rng));
    double n2 = 0;
    for (float v : labels.embeddings.back().data) n2 += double(v) * v;
    labels.norms.push_back(std::sqrt(n2));
  }
  const Tensor img = testutil::random_tensor({8}, -1, 1, rng);

  const ClassifyResult res = classify(img, labels, 1.0);
  double sum = 0;
  for (float p : res.probs.data) sum += p;
  CHECK(std::fabs(sum - 1.0) < 1e-6);
  CHECK(res.pred == argmax(res.probs));

  // identical label embeddings -> uniform distribution
  LabelEmbeddings same;
  for (int k = 0; k < 5; ++k) {
    same.embeddings.push_back(labels.embeddings[0]);
    same.norms.push_back(labels.norms[0]);
  }
  const ClassifyResult uni = classify(img, same, 1.0);
  for (float p : uni.probs.data)
    CHECK(p == doctest::Approx(0.2).epsilon(1e-6));

  // duplicating an entry never changes which original wins
  LabelEmbeddings dup = labels;
  dup.embeddings.push_back(labels.embeddings[2]);
  dup.norms.push_back(labels.norms[2]);
  const ClassifyResult with_dup = classify(img, dup, 1.0);
  Tensor firstk = Tensor::zeros({4});
  for (int k = 0; k < 4; ++k) firstk.data[k] = with_dup.probs.data[k];
  CHECK(argmax(firstk) == res.pred);

  // argmax is permutation-invariant, re-mapped through the permutation
  const std::vector<size_t> perm = {2, 0, 3, 1};
  LabelEmbeddings shuffled;
  shuffled.embeddings.resize(4);
  shuffled.norms.resize(4);
  for (size_t k = 0; k < 4; ++k) {
    shuffled.embeddings[perm[k]] = labels.embeddings[k];
    shuffled.norms[perm[k]] = labels.norms[k];
  }
  const ClassifyResult shuffled_res = classify(img, shuffled, 1.0);
  CHECK(shuffled_res.pred ==
        static_cast<int64_t>(perm[static_cast<size_t>(res.pred)]));

  // zero-norm image embedding is a domain error
  CHECK_THROWS_AS(classify(Tensor::zeros({8}), labels, 1.0), Error);
}

TEST_CASE("label sets reject duplicates and slotless templates") {
  CHECK_THROWS_AS(LabelSet::make({"cat", "cat"}, "A {}."), Error);
  CHECK_THROWS_AS(LabelSet::make({"cat", "dog"}, "no slot"), Error);
  const LabelSet ls = LabelSet::make({"cat", "dog"}, "A photo of a {}.");
  CHECK(ls.prompt(1) == "A photo of a dog.");
}

TEST_CASE("finetune freezes the text stream bit-exactly and learns") {
  testutil::TempDir tmp("ft_freeze");
  synth::SynthData d = synth::build(tmp, 61, 6);  // 18 items
  Config c = d.cfg;
  c.set("finetune.epochs", "8");
  DualStreamModel model(c, io::read_store(d.emb_path));
  const LabelSet ls = LabelSet::make(d.labels, d.eval_template);

  std::vector<Tensor> text_before;
  for (size_t i = 0; i < model.params().size(); ++i)
    if (model.params().name(i).rfind("txt.", 0) == 0)
      text_before.push_back(model.params().tensor(i));

  const auto result =
      finetune(model, d.train, ls, io::read_store(d.tprob_path),
               FinetuneCfg::from_config(c), c, 61);
  REQUIRE(result.log.size() == 8);

  size_t at = 0;
  for (size_t i = 0; i < model.params().size(); ++i)
    if (model.params().name(i).rfind("txt.", 0) == 0)
      CHECK(testutil::bits_equal(text_before[at++], model.params().tensor(i)));

  // some image parameter moved
  bool img_changed = false;
  DualStreamModel fresh(c, io::read_store(d.emb_path));
  for (size_t i = 0; i < model.params().size(); ++i)
    if (model.params().name(i).rfind("img.", 0) == 0)
      img_changed = img_changed ||
                    !testutil::bits_equal(fresh.params().tensor(i),
                                          model.params().tensor(i));
  CHECK(img_changed);
}

TEST_CASE("finetune fixed point at lambda 0 with self-teacher") {
  testutil::TempDir tmp("ft_fp");
  synth::SynthData d = synth::build(tmp, 62, 2);
  Config c = d.cfg;
  c.set("finetune.lambda", "0");
  c.set("finetune.epochs", "1");
  c.set("finetune.lr", "1e-3");
  DualStreamModel model(c, io::read_store(d.emb_path));
  const LabelSet ls = LabelSet::make(d.labels, d.eval_template);

  // teacher := the student's own current predictive distribution
  const LabelEmbeddings lemb = embed_labels(model, ls.labels, ls.template_str);
  io::TeacherStore self(io::StoreKind::kClassProbabilities, 3);
  for (const auto& item : d.train) {
    const Tensor e = model.embed_image(io::load_item_tensor(item));
    self.add(item.id, classify(e, lemb, 1.0).probs.data);
  }

  std::vector<Tensor> before;
  for (size_t i = 0; i < model.params().size(); ++i)
    before.push_back(model.params().tensor(i));
  const auto result = finetune(model, d.train, ls, self,
                               FinetuneCfg::from_config(c), c, 62);
  CHECK(result.log[0].train_loss < 1e-6);
  double drift = 0.0;
  for (size_t i = 0; i < model.params().size(); ++i) {
    const Tensor& was = before[i];
    const Tensor& now = model.params().tensor(i);
    for (size_t j = 0; j < was.data.size(); ++j)
      drift = std::max(drift, std::fabs(static_cast<double>(was.data[j]) -
                                        now.data[j]));
  }
  CHECK(drift <= 1e-9);
}

TEST_CASE("finetune validates teacher probabilities against the label set") {
  testutil::TempDir tmp("ft_k");
  synth::SynthData d = synth::build(tmp, 63, 2);
  Config c = d.cfg;
  c.set("finetune.epochs", "1");
  DualStreamModel model(c, io::read_store(d.emb_path));
  const LabelSet ls = LabelSet::make(d.labels, d.eval_template);

  io::TeacherStore wrong_k(io::StoreKind::kClassProbabilities, 4);
  for (const auto& item : d.train)
    wrong_k.add(item.id, {0.25f, 0.25f, 0.25f, 0.25f});
  CHECK_THROWS_AS(finetune(model, d.train, ls, wrong_k,
                           FinetuneCfg::from_config(c), c, 63),
                  Error);

  io::TeacherStore wrong_kind(io::StoreKind::kImageEmbedding, 3);
  CHECK_THROWS_AS(finetune(model, d.train, ls, wrong_kind,
                           FinetuneCfg::from_config(c), c, 63),
                  Error);
}

TEST_CASE("robustness: expansion contracts") {
  testutil::TempDir tmp("rob_exp");
  synth::SynthData d = synth::build(tmp, 64, 4);  // 12 items
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  const LabelSet ls = LabelSet::make(d.labels, d.eval_template);

  const auto records = robustness_expand(model, d.train, ls, d.distractors,
                                         {1, 2, 5, 8}, 1.0);
  REQUIRE(records.size() == 5);
  CHECK(records[0].setting == "baseline");
  // factor 1 appends nothing: exactly the baseline
  CHECK(records[1].setting == "expand_x1");
  CHECK(records[1].accuracy == records[0].accuracy);
  // monotonically non-increasing in the factor (nested candidate prefixes)
  for (size_t i = 2; i < records.size(); ++i)
    CHECK(records[i].accuracy <= records[i - 1].accuracy);

  // insufficient distractors is a data error
  CHECK_THROWS_AS(robustness_expand(model, d.train, ls, {"car"}, {5}, 1.0),
                  Error);
}

TEST_CASE("robustness: replacement contracts") {
  testutil::TempDir tmp("rob_rep");
  synth::SynthData d = synth::build(tmp, 65, 4);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  const LabelSet ls = LabelSet::make(d.labels, d.eval_template);
  const LabelEmbeddings lemb = embed_labels(model, ls.labels, ls.template_str);

  double baseline = 0;
  {
    int hits = 0;
    for (const auto& item : d.train) {
      const Tensor e = model.embed_image(io::load_item_tensor(item));
      hits += classify(e, lemb, 1.0).pred == item.label ? 1 : 0;
    }
    baseline = double(hits) / double(d.train.size());
  }

  const auto records = robustness_replace(model, d.train, ls, d.substitutes,
                                          {0, 40, 100}, {11, 22, 33}, 1.0);
  // p=0: single run, equals baseline exactly
  REQUIRE(records.size() >= 1);
  CHECK(records[0].setting == "replace_p0");
  CHECK(records[0].accuracy == baseline);

  // p=40: three seeded runs plus mean and variance rows
  int p40_runs = 0;
  double mean = -1, var = -1;
  std::vector<double> accs;
  for (const auto& r : records) {
    if (r.setting != "replace_p40") continue;
    if (r.seed == "mean")
      mean = r.accuracy;
    else if (r.seed == "var")
      var = r.accuracy;
    else {
      ++p40_runs;
      accs.push_back(r.accuracy);
    }
  }
  CHECK(p40_runs == 3);
  double want_mean = (accs[0] + accs[1] + accs[2]) / 3.0;
  CHECK(mean == doctest::Approx(want_mean).epsilon(1e-12));
  double want_var = 0;
  for (double a : accs) want_var += (a - want_mean) * (a - want_mean);
  want_var /= 3.0;
  CHECK(var == doctest::Approx(want_var).epsilon(1e-12));

  // p=100: deterministic, one record
  int p100_rows = 0;
  for (const auto& r : records)
    if (r.setting == "replace_p100") ++p100_rows;
  CHECK(p100_rows == 1);

  // a missing substitute is a data error
  CHECK_THROWS_AS(robustness_replace(model, d.train, ls, {{"dark", "dusky"}},
                                     {40}, {1}, 1.0),
                  Error);
}
