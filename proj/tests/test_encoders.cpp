#include <cmath>

#include "doctest.h"
#include "spikestream/encoders.hpp"
#include "spikestream/error.hpp"
#include "spikestream/kernels.hpp"
#include "synth.hpp"
#include "testutil.hpp"

using namespace spikestream;

namespace {

SpikeTensor binary_train(int64_t steps, std::vector<int64_t> shape, Rng& rng,
                         float density) {
  SpikeTensor t;
  t.time_steps = steps;
  std::vector<int64_t> full = {steps};
  full.insert(full.end(), shape.begin(), shape.end());
  t.values = Tensor::zeros(full);
  for (float& v : t.values.data) v = rng.uniform() < density ? 1.0f : 0.0f;
  return t;
}

}  // namespace

TEST_CASE("readout weight families") {
  const Tensor mean = ReadoutSpec::init_weights(ReadoutMode::kMean, 4);
  for (float v : mean.data) CHECK(v == 0.25f);

  const Tensor tdw = ReadoutSpec::init_weights(ReadoutMode::kTdw, 4);
  for (float v : tdw.data) CHECK(v == 0.25f);

  const Tensor ad = ReadoutSpec::init_weights(ReadoutMode::kAd, 4);
  CHECK(ad.data[0] == doctest::Approx(0.1));
  CHECK(ad.data[1] == doctest::Approx(0.2));
  CHECK(ad.data[2] == doctest::Approx(0.3));
  CHECK(ad.data[3] == doctest::Approx(0.4));

  const Tensor ar = ReadoutSpec::init_weights(ReadoutMode::kAr, 4);
  CHECK(ar.data[0] == doctest::Approx(1.0 / 15));
  CHECK(ar.data[1] == doctest::Approx(2.0 / 15));
  CHECK(ar.data[2] == doctest::Approx(4.0 / 15));
  CHECK(ar.data[3] == doctest::Approx(8.0 / 15));

  // both fixed families are increasing and sum to 1
  for (const Tensor* w : {&ad, &ar}) {
    double sum = 0;
    for (size_t i = 0; i < w->data.size(); ++i) {
      sum += w->data[i];
      if (i) CHECK(w->data[i] > w->data[i - 1]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("readout applies weights then the projection") {
  Rng rng(4);
  const int64_t d = 6, out = 3;
  ReadoutSpec spec;
  spec.mode = ReadoutMode::kMean;
  spec.weights = ReadoutSpec::init_weights(ReadoutMode::kMean, 4);
  spec.projection = testutil::random_tensor({d, out}, -1, 1, rng);

  // identical slices at every step: readout input equals one slice
  Tensor slice = Tensor::zeros({d});
  for (int64_t i = 0; i < d; i += 2) slice.data[i] = 1.0f;
  SpikeTensor spikes;
  spikes.time_steps = 4;
  spikes.values = Tensor::zeros({4, d});
  for (int t = 0; t < 4; ++t)
    for (int64_t i = 0; i < d; ++i)
      spikes.values.data[t * d + i] = slice.data[i];

  const Tensor e = readout_apply(spikes, spec);
  REQUIRE(e.shape == std::vector<int64_t>{out});
  std::vector<float> direct(out, 0.0f);
  kernels::matmul_serial(slice.data.data(), spec.projection.data.data(),
                         direct.data(), 1, d, out);
  CHECK(e.data == direct);

  // selector weights pick the last step only
  ReadoutSpec sel = spec;
  sel.weights = Tensor::from({4}, {0, 0, 0, 1});
  Rng rng2(5);
  SpikeTensor rnd = binary_train(4, {d}, rng2, 0.5f);
  const Tensor last = rnd.slice(3);
  const Tensor e2 = readout_apply(rnd, sel);
  std::vector<float> direct2(out, 0.0f);
  kernels::matmul_serial(last.data.data(), spec.projection.data.data(),
                         direct2.data(), 1, d, out);
  CHECK(e2.data == direct2);

  // weight-count mismatch
  ReadoutSpec bad = spec;
  bad.weights = Tensor::from({3}, {0.5f, 0.25f, 0.25f});
  CHECK_THROWS_AS(readout_apply(rnd, bad), Error);

  // non-binary input is rejected
  SpikeTensor dirty = rnd;
  dirty.values.data[1] = 0.5f;
  CHECK_THROWS_AS(readout_apply(dirty, spec), Error);
  instrumentation::reset_binarity_violations();
}

TEST_CASE("patchify layout") {
  // 1 channel, 4x4, patch 2: patches row-major, pixels row-major in patch
  Tensor img = Tensor::zeros({1, 4, 4});
  for (int i = 0; i < 16; ++i) img.data[i] = static_cast<float>(i);
  const Tensor p = patchify(img, 2);
  REQUIRE(p.shape == std::vector<int64_t>{4, 4});
  CHECK(p.data[0 * 4 + 0] == 0);   // patch 0: rows 0-1, cols 0-1
  CHECK(p.data[0 * 4 + 1] == 1);
  CHECK(p.data[0 * 4 + 2] == 4);
  CHECK(p.data[0 * 4 + 3] == 5);
  CHECK(p.data[3 * 4 + 0] == 10);  // patch 3: rows 2-3, cols 2-3
  CHECK_THROWS_AS(patchify(img, 3), Error);
}

TEST_CASE("zero input spikes with zero additive parameters give a zero embedding") {
  testutil::TempDir tmp("enc_zero");
  synth::SynthData d = synth::build(tmp, 50, 1);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  // zero every bias-like additive parameter
  for (size_t i = 0; i < model.params().size(); ++i) {
    const std::string& name = model.params().name(i);
    const bool additive = name.find(".b") != std::string::npos ||
                          name == "img.pos" || name.find("bo") != std::string::npos;
    if (additive)
      for (float& v : model.params().tensor(i).data) v = 0.0f;
  }
  SpikeTensor zeros;
  zeros.time_steps = 4;
  zeros.values = Tensor::zeros({4, 1, 8, 8});
  Graph g;
  Var e = model.image_forward(g, zeros);
  REQUIRE(g.value(e).shape == std::vector<int64_t>{12});
  for (float v : g.value(e).data) CHECK(v == 0.0f);
}

TEST_CASE("image forward output shape and input validation") {
  testutil::TempDir tmp("enc_shape");
  synth::SynthData d = synth::build(tmp, 51, 1);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  Rng rng(3);
  SpikeTensor train = binary_train(4, {1, 8, 8}, rng, 0.4f);
  Graph g;
  CHECK(g.value(model.image_forward(g, train)).shape ==
        std::vector<int64_t>{12});

  SpikeTensor wrong_steps = binary_train(3, {1, 8, 8}, rng, 0.4f);
  Graph g2;
  CHECK_THROWS_AS(model.image_forward(g2, wrong_steps), Error);
  SpikeTensor wrong_shape = binary_train(4, {1, 4, 4}, rng, 0.4f);
  CHECK_THROWS_AS(model.image_forward(g2, wrong_shape), Error);
}

TEST_CASE("text forward is deterministic and handles UNK/empty/negative") {
  testutil::TempDir tmp("enc_text");
  synth::SynthData d = synth::build(tmp, 52, 1);

  // give one token an all-negative embedding
  io::TeacherStore emb = io::read_store(d.emb_path);
  io::TeacherStore emb2(emb.kind(), emb.dim());
  for (const std::string& id : emb.ids()) {
    std::vector<float> v(emb.find(id), emb.find(id) + emb.dim());
    if (id == "snow")
      for (float& x : v) x = -std::fabs(x) - 0.01f;
    emb2.add(id, v);
  }
  DualStreamModel model(d.cfg, emb2);

  const Tensor empty1 = model.embed_text("");
  const Tensor empty2 = model.embed_text("");
  CHECK(testutil::bits_equal(empty1, empty2));

  const Tensor a1 = model.embed_text("A photo of a bright.");
  const Tensor a2 = model.embed_text("A photo of a bright.");
  CHECK(testutil::bits_equal(a1, a2));
  CHECK_FALSE(testutil::bits_equal(a1, empty1));

  // all-negative embeddings spike nowhere: same output as the empty text
  const Tensor neg = model.embed_text("snow snow snow");
  CHECK(testutil::bits_equal(neg, empty1));

  // unknown tokens map to the <unk> row
  const Tensor unk = model.embed_text("xylophone");
  const Tensor unk2 = model.embed_text("<unk>");
  CHECK(testutil::bits_equal(unk, unk2));

  // token ids truncate at max_len
  CHECK(model.token_ids("a a a a a a a a a a").size() == 6);
}

TEST_CASE("firing probes are consistent rates") {
  testutil::TempDir tmp("enc_probe");
  synth::SynthData d = synth::build(tmp, 53, 1);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  Rng rng(9);
  SpikeTensor train = binary_train(4, {1, 8, 8}, rng, 0.5f);

  instrumentation::reset_binarity_violations();
  ForwardStats stats;
  Graph g;
  model.image_forward(g, train, &stats);
  CHECK(instrumentation::binarity_violations() == 0);
  CHECK(stats.items == 1);
  CHECK(stats.time_steps == 4);

  for (const auto& f : stats.firing) {
    CHECK(f.slots > 0);
    CHECK(f.spikes >= 0);
    CHECK(f.spikes <= f.slots);  // gamma in [0,1]
  }
  // the input cost layer's spike count matches an independent recount
  REQUIRE(!stats.cost.empty());
  CHECK(stats.cost[0].name == "img.patch");
  double spikes = 0;
  for (float v : train.values.data) spikes += v;
  CHECK(stats.cost[0].spikes == doctest::Approx(spikes));
  CHECK(stats.cost[0].slots == doctest::Approx(4.0 * 64));

  // embed-stage output slots: patches x dim x steps
  CHECK(stats.firing[0].name == "img.embed");
  CHECK(stats.firing[0].slots == doctest::Approx(4.0 * 4 * 24));

  // merging another forward doubles counts, keeps macs
  ForwardStats stats2;
  Graph g2;
  model.image_forward(g2, train, &stats2);
  const double macs0 = stats.cost[0].macs;
  stats.merge(stats2);
  CHECK(stats.items == 2);
  CHECK(stats.cost[0].macs == macs0);
  CHECK(stats.cost[0].spikes == doctest::Approx(2 * spikes));
}

TEST_CASE("permuting patches with positions and projection re-assigned is invisible") {
  testutil::TempDir tmp("enc_perm");
  synth::SynthData d = synth::build(tmp, 54, 1);
  DualStreamModel base(d.cfg, io::read_store(d.emb_path));
  DualStreamModel permuted(d.cfg, io::read_store(d.emb_path));

  // patch permutation on a 2x2 patch grid
  const std::vector<int64_t> perm = {2, 0, 3, 1};
  const int64_t n = 4, dim = 24;

  // permute the positional rows and the projection's row blocks
  const Tensor pos = base.params().at("img.pos");
  Tensor& pos2 = permuted.params().at("img.pos");
  for (int64_t p = 0; p < n; ++p)
    for (int64_t j = 0; j < dim; ++j)
      pos2.data[perm[p] * dim + j] = pos.data[p * dim + j];
  const Tensor proj = base.params().at("img.readout.proj");
  Tensor& proj2 = permuted.params().at("img.readout.proj");
  const int64_t out = proj.shape[1];
  for (int64_t p = 0; p < n; ++p)
    for (int64_t j = 0; j < dim; ++j)
      for (int64_t o = 0; o < out; ++o)
        proj2.data[(perm[p] * dim + j) * out + o] =
            proj.data[(p * dim + j) * out + o];

  // input with patch blocks moved the same way (patch = 4x4 block)
  Rng rng(31);
  SpikeTensor train = binary_train(4, {1, 8, 8}, rng, 0.5f);
  SpikeTensor moved = train;
  const auto block = [&](Tensor& dst, const Tensor& src, int64_t t,
                         int64_t from, int64_t to) {
    const int64_t fy = (from / 2) * 4, fx = (from % 2) * 4;
    const int64_t ty = (to / 2) * 4, tx = (to % 2) * 4;
    for (int64_t y = 0; y < 4; ++y)
      for (int64_t x = 0; x < 4; ++x)
        dst.data[(t * 64) + (ty + y) * 8 + (tx + x)] =
            src.data[(t * 64) + (fy + y) * 8 + (fx + x)];
  };
  for (int64_t t = 0; t < 4; ++t)
    for (int64_t p = 0; p < n; ++p) block(moved.values, train.values, t, p, perm[p]);

  Graph g1, g2;
  const Tensor e1 = g1.value(base.image_forward(g1, train));
  const Tensor e2 = g2.value(permuted.image_forward(g2, moved));
  for (int64_t i = 0; i < e1.numel(); ++i)
    CHECK(e1.data[i] == doctest::Approx(e2.data[i]).epsilon(1e-4));
}

TEST_CASE("model checkpoint round-trip preserves behaviour") {
  testutil::TempDir tmp("enc_ckpt");
  synth::SynthData d = synth::build(tmp, 55, 1);
  DualStreamModel model(d.cfg, io::read_store(d.emb_path));
  const Tensor raw = io::load_item_tensor(d.train[0]);
  const Tensor before = model.embed_image(raw);

  io::Checkpoint ckpt;
  ckpt.config_text = d.cfg.to_text();
  model.save_params(ckpt);
  io::write_checkpoint(tmp.path("m.scck"), ckpt);

  Config other = d.cfg;
  other.set("seed", "999");  // different init, then overwritten by the load
  DualStreamModel restored(other, io::read_store(d.emb_path));
  restored.load_params(io::read_checkpoint(tmp.path("m.scck")));
  CHECK(testutil::bits_equal(before, restored.embed_image(raw)));

  // shape mismatch is a data error
  Config wide = d.cfg;
  wide.set("image.dim", "32");
  DualStreamModel bigger(wide, io::read_store(d.emb_path));
  CHECK_THROWS_AS(bigger.load_params(io::read_checkpoint(tmp.path("m.scck"))),
                  Error);
}

TEST_CASE("config validation catches bad encoder geometry") {
  testutil::TempDir tmp("enc_cfg");
  synth::SynthData d = synth::build(tmp, 56, 1);
  Config bad = d.cfg;
  bad.set("image.dim", "25");  // not divisible by heads=2
  CHECK_THROWS_AS(DualStreamModel(bad, io::read_store(d.emb_path)), Error);
  Config bad2 = d.cfg;
  bad2.set("image.patch_size", "3");  // 8 % 3 != 0
  CHECK_THROWS_AS(DualStreamModel(bad2, io::read_store(d.emb_path)), Error);
  Config bad3 = d.cfg;
  bad3.set("readout.mode", "fancy");
  CHECK_THROWS_AS(DualStreamModel(bad3, io::read_store(d.emb_path)), Error);
}
