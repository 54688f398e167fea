#include <cmath>

#include "doctest.h"
#include "spikestream/distill.hpp"
#include "spikestream/encoders.hpp"
#include "spikestream/error.hpp"
#include "synth.hpp"
#include "testutil.hpp"

using namespace spikestream;

TEST_CASE("lr schedule anchors") {
  CHECK(lr_at(0) == 5e-3);
  CHECK(lr_at(50) == 5e-4);
  CHECK(lr_at(120) == 5e-4);
  CHECK(std::fabs(lr_at(25) - 2.75e-3) < 1e-12);
  CHECK_THROWS_AS(lr_at(-1), Error);
  // in-range points follow the cosine formula
  CHECK(lr_at(10) ==
        doctest::Approx(2.75e-3 + 2.25e-3 * std::cos(M_PI * 10 / 50.0)));
  CHECK(lr_at(1) < lr_at(0));
  CHECK(lr_at(49) > lr_at(50));
}

TEST_CASE("cosine alignment loss endpoints") {
  const Tensor a = Tensor::from({2}, {1, 0});
  const Tensor b = Tensor::from({2}, {0, 1});
  CHECK(cosine_align_loss(a, b) == 1.0);  // orthogonal

  const Tensor s = Tensor::from({3}, {0.3f, -1.2f, 0.7f});
  CHECK(cosine_align_loss(s, s) == doctest::Approx(0.0).epsilon(1e-12));
  Tensor neg = s;
  for (float& v : neg.data) v = -v;
  CHECK(cosine_align_loss(s, neg) == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(cosine_align_loss(Tensor::zeros({3}), s), Error);
  CHECK_THROWS_AS(cosine_align_loss(s, Tensor::zeros({3})), Error);
}

TEST_CASE("graph cosine node matches the plain loss") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor s = testutil::random_tensor({6}, -1, 1, rng);
    Tensor t = testutil::random_tensor({6}, -1, 1, rng);
    Graph g;
    Var loss = cosine_align_loss_node(g, g.constant(s), t, "item");
    CHECK(g.value(loss).data[0] ==
          doctest::Approx(cosine_align_loss(s, t)).epsilon(1e-5));
  }
}

TEST_CASE("prompt rendering crosses labels with templates") {
  const auto prompts = render_prompts({"cat", "dog"}, {"A photo of a {}.",
                                                       "A big {}!"});
  REQUIRE(prompts.size() == 4);
  CHECK(prompts[0] == "A photo of a cat.");
  CHECK(prompts[1] == "A photo of a dog.");
  CHECK(prompts[3] == "A big dog!");
  CHECK_THROWS_AS(render_prompts({"cat"}, {"no slot"}), Error);
}

TEST_CASE("batch loss decomposes into per-item cosine losses") {
  testutil::TempDir tmp("distill_add");
  synth::SynthData d = synth::build(tmp, 21, 4);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  const io::TeacherStore timg = io::read_store(d.timg_path);

  double sum_items = 0.0;
  for (const auto& item : d.train) {
    const Tensor e = model.embed_image(io::load_item_tensor(item));
    sum_items += cosine_align_loss(e, timg.vector_of(item.id));
  }
  // one full-batch epoch with lr forced to zero reports exactly that sum
  Config frozen = d.cfg;
  frozen.set("pretrain.epochs_img", "1");
  frozen.set("pretrain.batch_img", "64");
  frozen.set("pretrain.epochs_txt", "0");
  PretrainCfg pc = PretrainCfg::from_config(frozen);
  DualStreamModel model2(d.cfg, io::read_store(d.emb_path));
  const auto result =
      pretrain(model2, d.train, {}, timg, io::read_store(d.ttxt_path), pc,
               frozen, 21);
  REQUIRE(result.log.size() == 1);
  CHECK(result.log[0].loss == doctest::Approx(sum_items).epsilon(1e-6));
}

TEST_CASE("teacher equal to the student's own output is a fixed point") {
  testutil::TempDir tmp("distill_fp");
  synth::SynthData d = synth::build(tmp, 33, 2);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));

  // teacher := current student embedding for one item
  const auto item = d.train[0];
  const Tensor initial = model.embed_image(io::load_item_tensor(item));
  io::TeacherStore teacher(io::StoreKind::kImageEmbedding,
                           static_cast<uint32_t>(initial.numel()));
  teacher.add(item.id, initial.data);

  Config c = d.cfg;
  c.set("pretrain.epochs_img", "1");
  c.set("pretrain.epochs_txt", "0");
  PretrainCfg pc = PretrainCfg::from_config(c);

  std::vector<Tensor> before;
  for (size_t i = 0; i < model.params().size(); ++i)
    before.push_back(model.params().tensor(i));

  const auto result = pretrain(model, {item}, {}, teacher,
                               io::read_store(d.ttxt_path), pc, c, 33);
  CHECK(result.log[0].loss < 1e-6);
  // The analytic gradient at the optimum cancels only to float rounding;
  // anything beyond ulp-level drift means a real gradient leaked through.
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

TEST_CASE("missing teacher record names the id") {
  testutil::TempDir tmp("distill_missing");
  synth::SynthData d = synth::build(tmp, 5, 2);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  io::TeacherStore empty(io::StoreKind::kImageEmbedding, 12);
  empty.add("someone-else", synth::class_vector(0, 12));
  Config c = d.cfg;
  c.set("pretrain.epochs_img", "1");
  c.set("pretrain.epochs_txt", "0");
  CHECK_THROWS_WITH_AS(
      pretrain(model, d.train, {}, empty, io::read_store(d.ttxt_path),
               PretrainCfg::from_config(c), c, 5),
      doctest::Contains(d.train[0].id.c_str()), Error);
}

TEST_CASE("wrong teacher kind or dim is a data error") {
  testutil::TempDir tmp("distill_kind");
  synth::SynthData d = synth::build(tmp, 6, 2);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  Config c = d.cfg;
  c.set("pretrain.epochs_img", "1");
  c.set("pretrain.epochs_txt", "0");
  const PretrainCfg pc = PretrainCfg::from_config(c);
  const io::TeacherStore texts = io::read_store(d.ttxt_path);
  // text store where an image store belongs
  CHECK_THROWS_AS(pretrain(model, d.train, {}, texts, texts, pc, c, 6), Error);

  io::TeacherStore narrow(io::StoreKind::kImageEmbedding, 5);
  for (const auto& item : d.train)
    narrow.add(item.id, std::vector<float>(5, 0.4f));
  CHECK_THROWS_AS(pretrain(model, d.train, {}, narrow, texts, pc, c, 6),
                  Error);
}

TEST_CASE("distillation trends down and is seed-reproducible") {
  testutil::TempDir tmp("distill_trend");
  synth::SynthData d = synth::build(tmp, 8, 11);
  d.train.resize(32);  // 32-item fixture
  Config c = d.cfg;
  c.set("pretrain.epochs_img", "50");
  c.set("pretrain.epochs_txt", "0");
  c.set("pretrain.batch_img", "64");  // full batch
  c.set("surrogate_alpha", "2.0");
  const PretrainCfg pc = PretrainCfg::from_config(c);
  const io::TeacherStore timg = io::read_store(d.timg_path);
  const io::TeacherStore ttxt = io::read_store(d.ttxt_path);

  DualStreamModel model(c, io::read_store(d.emb_path));
  const auto run1 = pretrain(model, d.train, {}, timg, ttxt, pc, c, 8);
  REQUIRE(run1.log.size() == 50);

  // non-increasing trend, with a small budget of non-monotone steps
  int violations = 0;
  for (size_t i = 1; i < run1.log.size(); ++i)
    if (run1.log[i].loss > run1.log[i - 1].loss + 1e-9) ++violations;
  INFO("first ", run1.log.front().loss, " last ", run1.log.back().loss,
       " violations ", violations);
  CHECK(violations <= 5);
  CHECK(run1.log.back().loss < run1.log.front().loss);

  // identical seed reproduces the identical loss curve
  DualStreamModel model2(c, io::read_store(d.emb_path));
  const auto run2 = pretrain(model2, d.train, {}, timg, ttxt, pc, c, 8);
  REQUIRE(run2.log.size() == run1.log.size());
  for (size_t i = 0; i < run1.log.size(); ++i)
    CHECK(run1.log[i].loss == run2.log[i].loss);
}

TEST_CASE("optimizer step with lr 0 leaves parameters bit-identical") {
  testutil::TempDir tmp("distill_lr0");
  synth::SynthData d = synth::build(tmp, 12, 2);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  std::vector<Tensor> before;
  for (size_t i = 0; i < model.params().size(); ++i)
    before.push_back(model.params().tensor(i));

  Optimizer opt(model.image_trainables(), d.cfg);
  opt.zero_grads();
  Graph g;
  Var e = model.image_forward(
      g, model.encode_image(io::load_item_tensor(d.train[0])));
  g.backward(cosine_align_loss_node(
      g, e, io::read_store(d.timg_path).vector_of(d.train[0].id),
      d.train[0].id));
  opt.step(0.0);
  for (size_t i = 0; i < model.params().size(); ++i)
    CHECK(testutil::bits_equal(before[i], model.params().tensor(i)));
}

TEST_CASE("gradient flow: a nonzero-loss step changes some student parameter") {
  testutil::TempDir tmp("distill_flow");
  synth::SynthData d = synth::build(tmp, 13, 2);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  const io::TeacherStore timg = io::read_store(d.timg_path);
  std::vector<Tensor> before;
  for (size_t i = 0; i < model.params().size(); ++i)
    before.push_back(model.params().tensor(i));

  Config c = d.cfg;
  c.set("pretrain.epochs_img", "1");
  c.set("pretrain.epochs_txt", "0");
  pretrain(model, d.train, {}, timg, io::read_store(d.ttxt_path),
           PretrainCfg::from_config(c), c, 13);
  bool changed = false;
  for (size_t i = 0; i < model.params().size(); ++i)
    changed = changed || !testutil::bits_equal(before[i],
                                               model.params().tensor(i));
  CHECK(changed);
}
