#pragma once

// Shared synthetic fixture: a 3-class brightness dataset with matching
// teacher stores. Class is the brightness tercile of the image, so the task
// is separable by construction; the oracle is the dataset construction,
// not the model.

#include <string>
#include <utility>
#include <vector>

#include "spikestream/config.hpp"
#include "spikestream/distill.hpp"
#include "spikestream/finetune.hpp"
#include "spikestream/io.hpp"
#include "spikestream/rng.hpp"
#include "spikestream/tensor.hpp"
#include "testutil.hpp"

namespace synth {

using spikestream::Config;
using spikestream::Rng;
using spikestream::Tensor;

inline std::vector<std::string> base_vocab() {
  return {"<unk>", "a",    "photo", "of",    "the",   "blurry", "big",
          "small", "dark", "gray",  "bright"};
}

inline std::vector<std::string> distractor_labels() {
  return {"car",  "ship", "tree", "frog", "bird",  "horse", "plane", "truck",
          "deer", "cat",  "dog",  "fox",  "fish",  "boat",  "lamp",  "door",
          "rock", "sand", "leaf", "moon", "star",  "cloud", "rain",  "snow"};
}

inline std::vector<std::pair<std::string, std::string>> substitute_map() {
  return {{"dark", "dusky"}, {"gray", "ashen"}, {"bright", "shiny"}};
}

// Orthogonal 4-hot unit vectors, one per class.
inline std::vector<float> class_vector(int cls, int dim) {
  std::vector<float> v(static_cast<size_t>(dim), 0.0f);
  for (int j = 0; j < 4; ++j) v[static_cast<size_t>(4 * cls + j)] = 0.5f;
  return v;
}

struct SynthData {
  Config cfg = Config::defaults();
  std::vector<spikestream::io::DatasetItem> train;
  std::vector<std::string> labels = {"dark", "gray", "bright"};
  std::vector<std::string> templates;
  std::string eval_template = "A photo of a {}.";
  std::vector<std::string> distractors = distractor_labels();
  std::vector<std::pair<std::string, std::string>> substitutes =
      substitute_map();
  std::string manifest_path, labels_path, templates_path, aux_path, map_path;
  std::string emb_path, timg_path, ttxt_path, tprob_path;
};

inline SynthData build(const testutil::TempDir& tmp, uint64_t seed,
                       int per_class = 20) {
  namespace sio = spikestream::io;
  SynthData d;
  const int out_dim = 12, embed_dim = 16;

  d.cfg.set("seed", std::to_string(seed));
  d.cfg.set("out_dim", std::to_string(out_dim));
  d.cfg.set("image.size", "8");
  d.cfg.set("image.channels", "1");
  d.cfg.set("image.patch_size", "4");
  d.cfg.set("image.depth", "1");
  d.cfg.set("image.dim", "24");
  d.cfg.set("image.heads", "2");
  d.cfg.set("image.mlp_ratio", "2");
  d.cfg.set("image.mean", "0.3");
  d.cfg.set("image.std", "0.35");
  d.cfg.set("text.hidden", "48");
  d.cfg.set("text.max_len", "6");
  d.cfg.set("pretrain.epochs_img", "50");
  d.cfg.set("pretrain.batch_img", "12");
  d.cfg.set("pretrain.epochs_txt", "60");
  d.cfg.set("pretrain.batch_txt", "9");
  d.cfg.set("pretrain.lr_txt", "2e-3");
  d.cfg.set("finetune.epochs", "100");
  d.cfg.set("finetune.batch", "12");
  d.cfg.set("finetune.lr", "1e-3");

  Rng rng(seed);

  // Word embeddings: roughly centered normals; about half the components
  // positive so constant-current coding produces spikes.
  sio::TeacherStore emb(sio::StoreKind::kTextEmbedding, embed_dim);
  std::vector<std::string> vocab = base_vocab();
  for (const auto& w : d.distractors) vocab.push_back(w);
  for (const auto& [orig, sub] : d.substitutes) vocab.push_back(sub);
  for (const std::string& tok : vocab) {
    std::vector<float> v(embed_dim);
    for (float& x : v) x = rng.normal(0.1f, 0.6f);
    emb.add(tok, v);
  }
  d.emb_path = tmp.path("word_embeddings.scst");
  sio::write_store(d.emb_path, emb);
  d.cfg.set("data.word_embeddings", d.emb_path);

  // Brightness-tercile images, u8 bands per class, [H,W,C] in 0..255.
  const int bands[3][2] = {{15, 40}, {115, 140}, {215, 240}};
  sio::TeacherStore timg(sio::StoreKind::kImageEmbedding,
                         static_cast<uint32_t>(out_dim));
  sio::TeacherStore tprob(sio::StoreKind::kClassProbabilities, 3);
  std::string manifest;
  for (int cls = 0; cls < 3; ++cls) {
    for (int k = 0; k < per_class; ++k) {
      Tensor img = Tensor::zeros({8, 8, 1});
      for (float& v : img.data)
        v = static_cast<float>(
            rng.uniform_int(bands[cls][0], bands[cls][1]));
      const std::string id =
          "img" + std::to_string(cls) + "_" + std::to_string(k);
      const std::string path = tmp.path(id + ".sclt");
      sio::write_tensor(path, img);
      manifest += id + "\t" + path + "\t" + std::to_string(cls) + "\n";
      timg.add(id, class_vector(cls, out_dim));
      std::vector<float> h(3, 0.05f);
      h[static_cast<size_t>(cls)] = 0.9f;
      tprob.add(id, h);
    }
  }
  d.manifest_path = tmp.path("train_manifest.tsv");
  sio::write_text_file(d.manifest_path, manifest);
  d.timg_path = tmp.path("teacher_images.scst");
  sio::write_store(d.timg_path, timg);
  d.tprob_path = tmp.path("teacher_probs.scst");
  sio::write_store(d.tprob_path, tprob);
  d.cfg.set("data.train_manifest", d.manifest_path);
  d.cfg.set("data.eval_manifest", d.manifest_path);
  d.cfg.set("data.teacher_images", d.timg_path);
  d.cfg.set("data.teacher_probs", d.tprob_path);
  d.train = sio::load_manifest(d.manifest_path, 3);

  // Prompt templates; the evaluation template is pre-trained too.
  d.templates = {d.eval_template, "A blurry photo of a {}.",
                 "A photo of a big {}."};
  std::string tpl_text;
  for (const auto& t : d.templates) tpl_text += t + "\n";
  d.templates_path = tmp.path("templates.txt");
  sio::write_text_file(d.templates_path, tpl_text);
  d.cfg.set("data.templates", d.templates_path);

  std::string label_text;
  for (const auto& l : d.labels) label_text += l + "\n";
  d.labels_path = tmp.path("labels.txt");
  sio::write_text_file(d.labels_path, label_text);
  d.cfg.set("data.labels", d.labels_path);

  // Text teacher: each rendered prompt maps to its label's class vector.
  sio::TeacherStore ttxt(sio::StoreKind::kTextEmbedding,
                         static_cast<uint32_t>(out_dim));
  for (const std::string& tmpl : d.templates) {
    for (int cls = 0; cls < 3; ++cls) {
      std::string prompt = tmpl;
      prompt.replace(prompt.find("{}"), 2, d.labels[static_cast<size_t>(cls)]);
      ttxt.add(prompt, class_vector(cls, out_dim));
    }
  }
  d.ttxt_path = tmp.path("teacher_texts.scst");
  sio::write_store(d.ttxt_path, ttxt);
  d.cfg.set("data.teacher_texts", d.ttxt_path);

  // Robustness aux files.
  std::string aux;
  for (const auto& w : d.distractors) aux += w + "\n";
  d.aux_path = tmp.path("aux_labels.txt");
  sio::write_text_file(d.aux_path, aux);
  d.cfg.set("robust.aux_labels", d.aux_path);
  std::string map_text;
  for (const auto& [orig, sub] : d.substitutes)
    map_text += orig + "\t" + sub + "\n";
  d.map_path = tmp.path("replace_map.tsv");
  sio::write_text_file(d.map_path, map_text);
  d.cfg.set("robust.replace_map", d.map_path);

  return d;
}

}  // namespace synth
