#include "lrva/train.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lrva/gradcheck.hpp"
#include "lrva/ops.hpp"

namespace lrva {
namespace {

std::string block_name(const char* base, int block) {
  return std::string(base) + std::to_string(block);
}

// Stacks per-item embeddings (rank-1, length d) into a value-only [n, d]
// matrix; used by evaluation where no gradients are needed.
Tensor stack_embeddings(const Model& model, const std::vector<Image>& images, bool normalize) {
  const int n = static_cast<int>(images.size());
  const int d = model.cfg.backbone.d_model;
  Tensor out = Tensor::zeros({n, d});
  for (int i = 0; i < n; ++i) {
    Tensor e = model.embed(images[i], normalize);
    std::copy(e.vec().begin(), e.vec().end(),
              out.vec().begin() + static_cast<std::size_t>(i) * static_cast<std::size_t>(d));
  }
  return out;
}

std::string main_metric_name(const ExperimentConfig& cfg) {
  return cfg.is_classification() ? "top1" : "r_at_1";
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

std::vector<Tensor> trainable_tensors(const ParameterStore& store) {
  std::vector<Tensor> out;
  for (const ParamEntry& e : store.trainable()) out.push_back(e.tensor);
  return out;
}

void append_values(Checkpoint& ck, const std::string& name, const Tensor& t) {
  CheckpointTensor& ct = ck.append(name, false, t.shape());
  ct.values.assign(t.vec().begin(), t.vec().end());
}

void push_classification_rows(std::vector<CsvRow>& rows, const ExperimentConfig& cfg,
                              const std::string& task_tag, const std::string& split,
                              const MetricReport& rep) {
  rows.push_back({task_tag, split, "top1", rep.top1, cfg.seed});
  rows.push_back({task_tag, split, "top5", rep.top5, cfg.seed});
}

void push_retrieval_rows(std::vector<CsvRow>& rows, const ExperimentConfig& cfg,
                         const std::string& task_tag, const std::string& split,
                         const RetrievalReport& rep) {
  rows.push_back({task_tag, split, "r_at_1", rep.average.r_at_1, cfg.seed});
  rows.push_back({task_tag, split, "r_at_5", rep.average.r_at_5, cfg.seed});
  rows.push_back({task_tag, split, "mean_rank", rep.average.mean_rank, cfg.seed});
  if (cfg.bidirectional) {
    rows.push_back({task_tag, split, "r_at_1_a_to_b", rep.a_to_b.r_at_1, cfg.seed});
    rows.push_back({task_tag, split, "r_at_1_b_to_a", rep.b_to_a.r_at_1, cfg.seed});
  }
}

void train_classification(Model& model, const TaskData& data, const ExperimentConfig& cfg,
                          std::ostringstream& log, TrainResult& result) {
  AugmentationStore aug_store;
  if (cfg.aug_enabled) {
    aug_store = build_augmentation_store(data.ctrain, cfg.aug, derive_seed(cfg.seed, "aug.store"),
                                         cfg.data_root);
    log << "aug_store preserving=" << aug_store.preserving.size()
        << " pairs=" << aug_store.pairs.size() << "\n";
  }
  MemoryBank bank(cfg.aug.bank_size, cfg.aug.sigma);

  const int d = cfg.backbone.d_model;
  const int n_orig = static_cast<int>(data.ctrain.images.size());
  const int pool = n_orig + static_cast<int>(aug_store.preserving.size());
  const int steps = (pool + cfg.batch - 1) / cfg.batch;

  Adam optimizer(trainable_tensors(model.store), {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps});

  double best = -1.0;
  int best_epoch = -1;
  Checkpoint best_state;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int step = 0; step < steps; ++step) {
      TrainingBatch batch =
          sample_training_batch(n_orig, aug_store, cfg.batch, epoch, step, cfg.seed);
      Tape tape;
      std::vector<Tensor> feats;
      std::vector<int> labels;
      feats.reserve(batch.task_indices.size());
      for (int idx : batch.task_indices) {
        const bool original = idx < n_orig;
        const Image& im =
            original ? data.ctrain.images[static_cast<std::size_t>(idx)]
                     : aug_store.preserving[static_cast<std::size_t>(idx - n_orig)];
        labels.push_back(original
                             ? data.ctrain.labels[static_cast<std::size_t>(idx)]
                             : aug_store.preserving_labels[static_cast<std::size_t>(idx - n_orig)]);
        feats.push_back(reshape(model.embed_tensor(image_to_tensor(im), false), {1, d}));
      }
      Tensor task_loss = classification_loss(model.head->logits(concat_rows(feats)), labels);
      Tensor loss = task_loss;
      if (!batch.pair_indices.empty()) {
        std::vector<Tensor> anchors, positives;
        for (int pi : batch.pair_indices) {
          const AugmentedPair& pair = aug_store.pairs[static_cast<std::size_t>(pi)];
          anchors.push_back(reshape(model.embed(pair.anchor, true), {1, d}));
          positives.push_back(reshape(model.embed(pair.positive, true), {1, d}));
        }
        Tensor lb = label_breaking_loss(concat_rows(anchors), concat_rows(positives), bank);
        loss = combined_loss(task_loss, lb, cfg.aug.lambda);
      }
      backward(loss);
      optimizer.step();
      model.store.zero_grads();
      log << "epoch=" << epoch << " step=" << step << " loss=" << format_metric_value(loss.item())
          << "\n";
    }
    MetricReport val = evaluate_classification(model, data.cval);
    log << "epoch=" << epoch << " val_top1=" << format_metric_value(val.top1)
        << " val_top5=" << format_metric_value(val.top5) << "\n";
    if (val.top1 > best) {
      best = val.top1;
      best_epoch = epoch;
      best_state = snapshot_train_state(model, optimizer, cfg.aug_enabled ? &bank : nullptr,
                                        epoch, best);
    }
  }

  apply_parameters(model, best_state);
  result.best_epoch = best_epoch;
  result.best_val_metric = best;
  result.state = std::move(best_state);
  result.val_report = evaluate_classification(model, data.cval);
  result.test_report = evaluate_classification(model, data.ctest);
  log << "best_epoch=" << best_epoch << " best_val_top1=" << format_metric_value(best) << "\n";
  push_classification_rows(result.rows, cfg, cfg.task, "val", result.val_report);
  push_classification_rows(result.rows, cfg, cfg.task, "test", result.test_report);
}

void train_probe(Model& model, const TaskData& data, const ExperimentConfig& cfg,
                 std::ostringstream& log, TrainResult& result) {
  Tensor features = stack_embeddings(model, data.ctrain.images, false);
  LinearHead probe =
      linear_probe(features, data.ctrain.labels, data.n_classes,
                   {cfg.probe_steps, cfg.probe_lr, derive_seed(cfg.seed, "probe")});
  model.head->weight.vec() = probe.weight.vec();
  model.head->bias.vec() = probe.bias.vec();
  log << "probe steps=" << cfg.probe_steps << "\n";

  Adam optimizer(trainable_tensors(model.store), {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps});
  result.best_epoch = 0;
  result.val_report = evaluate_classification(model, data.cval);
  result.test_report = evaluate_classification(model, data.ctest);
  result.best_val_metric = result.val_report.top1;
  result.state = snapshot_train_state(model, optimizer, nullptr, 0, result.best_val_metric);
  push_classification_rows(result.rows, cfg, cfg.task, "val", result.val_report);
  push_classification_rows(result.rows, cfg, cfg.task, "test", result.test_report);
}

void train_retrieval(Model& model, const TaskData& data, const ExperimentConfig& cfg,
                     std::ostringstream& log, TrainResult& result) {
  const int d = cfg.backbone.d_model;
  const int n = static_cast<int>(data.rtrain.domain_a.size());
  const int per_batch = std::min(cfg.batch, n);
  const int steps = (n + cfg.batch - 1) / cfg.batch;

  Adam optimizer(trainable_tensors(model.store), {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps});

  double best = -1.0;
  int best_epoch = -1;
  Checkpoint best_state;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int step = 0; step < steps; ++step) {
      Rng rng(derive_seed(cfg.seed, "batch.pairs", static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(step)));
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      Tape tape;
      std::vector<Tensor> a_rows, b_rows;
      for (int i = 0; i < per_batch; ++i) {
        const std::size_t idx = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
        a_rows.push_back(reshape(model.embed(data.rtrain.domain_a[idx], false), {1, d}));
        b_rows.push_back(reshape(model.embed(data.rtrain.domain_b[idx], false), {1, d}));
      }
      Tensor loss = retrieval_task_loss(concat_rows(a_rows), concat_rows(b_rows), cfg.task_sigma);
      backward(loss);
      optimizer.step();
      model.store.zero_grads();
      log << "epoch=" << epoch << " step=" << step << " loss=" << format_metric_value(loss.item())
          << "\n";
    }
    RetrievalReport val = evaluate_retrieval(model, data.rval, cfg.bidirectional);
    log << "epoch=" << epoch << " val_r_at_1=" << format_metric_value(val.average.r_at_1) << "\n";
    if (val.average.r_at_1 > best) {
      best = val.average.r_at_1;
      best_epoch = epoch;
      best_state = snapshot_train_state(model, optimizer, nullptr, epoch, best);
    }
  }

  apply_parameters(model, best_state);
  result.best_epoch = best_epoch;
  result.best_val_metric = best;
  result.state = std::move(best_state);
  result.val_retrieval = evaluate_retrieval(model, data.rval, cfg.bidirectional);
  result.test_retrieval = evaluate_retrieval(model, data.rtest, cfg.bidirectional);
  log << "best_epoch=" << best_epoch << " best_val_r_at_1=" << format_metric_value(best) << "\n";
  push_retrieval_rows(result.rows, cfg, cfg.task, "val", result.val_retrieval);
  push_retrieval_rows(result.rows, cfg, cfg.task, "test", result.test_retrieval);
}

}  // namespace

AdapterSet Model::adapters() const {
  AdapterSet set;
  set.bottleneck = bottleneck;
  set.lowrank = lowrank;
  if (attention) set.attention = &*attention;
  return set;
}

TokenGrid Model::tokenize(const Tensor& image) const {
  if (subkernel) return tokenize_finegrained(image, *subkernel, *backbone, true);
  return backbone->tokenize_original(image);
}

Tensor Model::embed_tensor(const Tensor& image, bool normalize) const {
  return backbone->forward(tokenize(image), adapters(), normalize);
}

Tensor Model::embed(const Image& image, bool normalize) const {
  return embed_tensor(image_to_tensor(image), normalize);
}

Model build_model(const ExperimentConfig& cfg, int n_classes) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.n_classes = n_classes;
  m.backbone =
      std::make_unique<VitBackbone>(cfg.backbone, m.store, derive_seed(cfg.seed, "init.backbone"));
  const int d = cfg.backbone.d_model;
  if (cfg.host_method == "bottleneck") {
    for (int b = 0; b < cfg.backbone.n_blocks; ++b) {
      m.bottleneck.push_back(BottleneckAdapter::create(
          m.store, block_name("adapter.block", b), d, cfg.host_bottleneck_dim,
          derive_seed(cfg.seed, "init.adapter", static_cast<std::uint64_t>(b))));
    }
  } else if (cfg.host_method == "lowrank") {
    for (int b = 0; b < cfg.backbone.n_blocks; ++b) {
      m.lowrank.push_back(LowRankAdapter::create(
          m.store, block_name("lowrank.block", b), d, cfg.host_rank,
          derive_seed(cfg.seed, "init.lowrank", static_cast<std::uint64_t>(b))));
    }
  }
  if (cfg.subkernel_enabled) {
    SubKernelBank bank =
        carve(m.backbone->patch_kernel(), cfg.subkernel_u, cfg.subkernel_v, cfg.subkernel_stride1);
    bank.w = m.store.add("subkernel.w", bank.w, false);
    m.subkernel = std::move(bank);
  }
  if (cfg.domattn_enabled) {
    m.attention =
        AttentionMapBank::create(m.store, cfg.domattn_maps, cfg.backbone.grid(),
                                 cfg.resolved_domattn_block(), derive_seed(cfg.seed, "init.domattn"));
  }
  if (cfg.is_classification()) {
    if (n_classes < 2) {
      throw std::invalid_argument("build_model: classification needs n_classes >= 2");
    }
    m.head = LinearHead::create(m.store, "head", d, n_classes, derive_seed(cfg.seed, "init.head"));
  }
  return m;
}

TaskData load_task_data(const ExperimentConfig& cfg) {
  TaskData data;
  data.classification = cfg.is_classification();
  const int size = cfg.backbone.image_size;
  if (cfg.task == "glyph") {
    data.ctrain = gen_glyph_task(cfg.classes, cfg.train_per_class, size,
                                 derive_seed(cfg.seed, "data.train"));
    data.cval =
        gen_glyph_task(cfg.classes, cfg.val_per_class, size, derive_seed(cfg.seed, "data.val"));
    data.ctest =
        gen_glyph_task(cfg.classes, cfg.test_per_class, size, derive_seed(cfg.seed, "data.test"));
  } else if (cfg.task == "maps") {
    data.rtrain = gen_map_pairs(cfg.train_pairs, size, derive_seed(cfg.seed, "data.train"));
    data.rval = gen_map_pairs(cfg.val_pairs, size, derive_seed(cfg.seed, "data.val"));
    data.rtest = gen_map_pairs(cfg.test_pairs, size, derive_seed(cfg.seed, "data.test"));
  } else if (cfg.task == "lite_classification") {
    data.ctrain = load_classification_directory(cfg.data_root, "train", size);
    data.cval = load_classification_directory(cfg.data_root, "val", size);
    data.ctest = load_classification_directory(cfg.data_root, "test", size);
  } else if (cfg.task == "lite_retrieval") {
    data.rtrain = load_retrieval_directory(cfg.data_root, "train", size);
    data.rval = load_retrieval_directory(cfg.data_root, "val", size);
    data.rtest = load_retrieval_directory(cfg.data_root, "test", size);
  } else {
    throw std::invalid_argument("load_task_data: unknown task '" + cfg.task + "'");
  }
  if (data.classification) {
    data.n_classes = data.ctrain.n_classes;
    if (data.cval.n_classes != data.n_classes || data.ctest.n_classes != data.n_classes) {
      throw std::invalid_argument("load_task_data: splits disagree on class count");
    }
    data.train_hash = dataset_hash(data.ctrain);
  } else {
    data.train_hash = dataset_hash(data.rtrain);
  }
  return data;
}

MetricReport evaluate_classification(const Model& model, const ClassificationDataset& data) {
  if (!model.head) {
    throw std::invalid_argument("evaluate: model has no classification head");
  }
  Tensor logits = model.head->logits(stack_embeddings(model, data.images, false));
  MetricReport rep;
  rep.top1 = topk_accuracy(logits, data.labels, 1);
  rep.top5 = topk_accuracy(logits, data.labels, std::min(5, model.n_classes));
  return rep;
}

RetrievalReport evaluate_retrieval(const Model& model, const RetrievalDataset& data,
                                   bool bidirectional) {
  Tensor a = stack_embeddings(model, data.domain_a, true);
  Tensor b = stack_embeddings(model, data.domain_b, true);
  Tensor sim = matmul(a, transpose(b));
  std::vector<int> pairing(data.domain_a.size());
  std::iota(pairing.begin(), pairing.end(), 0);
  RetrievalReport rep;
  rep.a_to_b = retrieval_metrics(sim, pairing, false);
  rep.b_to_a = retrieval_metrics(transpose(sim), pairing, false);
  if (bidirectional) {
    rep.average.r_at_1 = 0.5 * (rep.a_to_b.r_at_1 + rep.b_to_a.r_at_1);
    rep.average.r_at_5 = 0.5 * (rep.a_to_b.r_at_5 + rep.b_to_a.r_at_5);
    rep.average.mean_rank = 0.5 * (rep.a_to_b.mean_rank + rep.b_to_a.mean_rank);
  } else {
    rep.average = rep.a_to_b;
  }
  return rep;
}

TrainResult train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  TaskData data = load_task_data(cfg);
  Model model = build_model(cfg, data.classification ? data.n_classes : 0);

  std::ostringstream log;
  log << "task=" << cfg.task << " seed=" << cfg.seed << "\n";
  log << "dataset_hash=" << data.train_hash << "\n";
  log << "trainable_count=" << model.trainable_count() << "\n";

  const std::vector<double> frozen_before = model.store.frozen_values();

  TrainResult result;
  result.train_hash = data.train_hash;
  if (!data.classification) {
    train_retrieval(model, data, cfg, log, result);
  } else if (cfg.host_method == "probe") {
    train_probe(model, data, cfg, log, result);
  } else {
    train_classification(model, data, cfg, log, result);
  }

  // Frozen parameters are never copied back from snapshots, so any change
  // here means a gradient leaked into the backbone.
  if (!bitwise_equal(frozen_before, model.store.frozen_values())) {
    throw std::runtime_error("freeze contract violated: frozen parameters changed during training");
  }
  log << "freeze_contract=ok\n";

  result.csv = metrics_csv(result.rows, serialize_config(cfg));
  result.log = log.str();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "metrics.csv", result.csv);
    write_checkpoint_file(result.state, out_dir / "checkpoint.lrva");
    write_text_file(out_dir / "train.log", result.log);
  }
  return result;
}

Checkpoint snapshot_train_state(const Model& model, const Adam& optimizer, const MemoryBank* bank,
                                int best_epoch, double best_metric) {
  Checkpoint ck = snapshot(model.store);
  CheckpointTensor& step = ck.append("optim.t", false, {1});
  step.values = {static_cast<float>(optimizer.steps_taken())};
  const std::vector<ParamEntry> trainables = model.store.trainable();
  const std::vector<Tensor>& m = optimizer.first_moments();
  const std::vector<Tensor>& v = optimizer.second_moments();
  if (m.size() != trainables.size()) {
    throw std::logic_error("snapshot_train_state: optimizer/store parameter count mismatch");
  }
  for (std::size_t i = 0; i < trainables.size(); ++i) {
    append_values(ck, "optim.m." + trainables[i].name, m[i]);
    append_values(ck, "optim.v." + trainables[i].name, v[i]);
  }
  if (bank != nullptr && bank->size() > 0) {
    append_values(ck, "bank.contents", bank->contents());
  }
  CheckpointTensor& meta = ck.append("meta.best", false, {2});
  meta.values = {static_cast<float>(best_epoch), static_cast<float>(best_metric)};
  const std::string cfg_text = serialize_config(model.cfg);
  CheckpointTensor& cfg_blob =
      ck.append("meta.config", false, {static_cast<int>(cfg_text.size())});
  for (std::size_t i = 0; i < cfg_text.size(); ++i) {
    cfg_blob.values[i] = static_cast<float>(static_cast<unsigned char>(cfg_text[i]));
  }
  return ck;
}

void apply_parameters(Model& model, const Checkpoint& state) {
  for (const ParamEntry& entry : model.store.entries()) {
    const CheckpointTensor* ct = state.find(entry.name);
    if (ct == nullptr) {
      throw std::invalid_argument("state: missing parameter '" + entry.name + "'");
    }
    if (ct->dims != entry.tensor.shape() || ct->frozen != entry.frozen) {
      throw std::invalid_argument("state: shape or freeze mismatch for '" + entry.name + "'");
    }
    // Frozen values are regenerated exactly from the config seed; copying the
    // f32 payload back would only round them.
    if (entry.frozen) continue;
    Tensor t = entry.tensor;
    std::transform(ct->values.begin(), ct->values.end(), t.vec().begin(),
                   [](float f) { return static_cast<double>(f); });
  }
}

ExperimentConfig config_from_state(const Checkpoint& state) {
  const CheckpointTensor* blob = state.find("meta.config");
  if (blob == nullptr) {
    throw std::invalid_argument("state: no embedded config");
  }
  std::string text;
  text.reserve(blob->values.size());
  for (float f : blob->values) {
    text.push_back(static_cast<char>(static_cast<unsigned char>(f)));
  }
  return parse_config(text);
}

EvalOutput evaluate_checkpoint_file(const std::filesystem::path& checkpoint_path,
                                    const std::vector<std::string>& overrides,
                                    const std::vector<std::string>& splits,
                                    const std::filesystem::path& out_dir) {
  Checkpoint state = read_checkpoint_file(checkpoint_path);
  ExperimentConfig cfg = config_from_state(state);
  for (const std::string& o : overrides) apply_override(cfg, o);
  cfg.validate();
  TaskData data = load_task_data(cfg);
  Model model = build_model(cfg, data.classification ? data.n_classes : 0);
  apply_parameters(model, state);

  const std::vector<std::string> use =
      splits.empty() ? std::vector<std::string>{"val", "test"} : splits;
  EvalOutput out;
  for (const std::string& split : use) {
    if (split != "train" && split != "val" && split != "test") {
      throw std::invalid_argument("eval: unknown split '" + split + "'");
    }
    if (data.classification) {
      const ClassificationDataset& ds =
          split == "train" ? data.ctrain : (split == "val" ? data.cval : data.ctest);
      push_classification_rows(out.rows, cfg, cfg.task, split, evaluate_classification(model, ds));
    } else {
      const RetrievalDataset& ds =
          split == "train" ? data.rtrain : (split == "val" ? data.rval : data.rtest);
      push_retrieval_rows(out.rows, cfg, cfg.task, split,
                          evaluate_retrieval(model, ds, cfg.bidirectional));
    }
  }
  out.csv = metrics_csv(out.rows, serialize_config(cfg));
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "eval.csv", out.csv);
  }
  return out;
}

namespace {

void fill_randn(Tensor t, Rng& rng, double stddev) {
  for (double& v : t.vec()) v = rng.normal(0.0, stddev);
}

struct PathwayCheck {
  std::string name;
  Tensor param;
  std::function<Tensor()> eval;
};

// Small-shape fixtures covering every trainable pathway. Zero-initialized
// factors (adapter.up, lowrank.b_*, attention gate) are randomized so each
// parameter actually moves the output.
std::vector<PathwayCheck> pathway_fixtures(ParameterStore& store, std::uint64_t seed,
                                           std::vector<std::unique_ptr<VitBackbone>>& keep_alive) {
  // Two blocks so spatial-row edits (the attention bank writes only spatial
  // rows) reach the class-token embedding through the second block's MHSA.
  BackboneConfig bc;
  bc.image_size = 8;
  bc.patch = 4;
  bc.d_model = 8;
  bc.n_heads = 2;
  bc.n_blocks = 2;
  bc.mlp_ratio = 2;

  Rng rng(derive_seed(seed, "gc.data"));
  Tensor image = Tensor::randn({3, 8, 8}, rng, 0.5);
  Tensor probe = Tensor::randn({bc.d_model}, rng, 1.0);

  std::vector<PathwayCheck> checks;

  keep_alive.push_back(std::make_unique<VitBackbone>(
      bc, store, derive_seed(seed, "gc.backbone")));
  VitBackbone& vit = *keep_alive.back();

  // Bottleneck adapter.
  {
    auto shared = std::make_shared<std::vector<BottleneckAdapter>>();
    for (int b = 0; b < bc.n_blocks; ++b) {
      shared->push_back(BottleneckAdapter::create(
          store, block_name("adapter.block", b), bc.d_model, 2,
          derive_seed(seed, "gc.adapter", static_cast<std::uint64_t>(b))));
    }
    fill_randn(shared->front().up, rng, 0.3);
    auto eval = [&vit, shared, image, probe]() {
      AdapterSet set;
      set.bottleneck = *shared;
      return dot(vit.forward(vit.tokenize_original(image), set, false), probe);
    };
    checks.push_back({"adapter.down", shared->front().down, eval});
    checks.push_back({"adapter.up", shared->front().up, eval});
    checks.push_back({"adapter.scale", shared->front().scale, eval});
  }

  // Low-rank query/value deltas.
  {
    auto shared = std::make_shared<std::vector<LowRankAdapter>>();
    for (int b = 0; b < bc.n_blocks; ++b) {
      shared->push_back(LowRankAdapter::create(
          store, block_name("lowrank.block", b), bc.d_model, 2,
          derive_seed(seed, "gc.lowrank", static_cast<std::uint64_t>(b))));
    }
    fill_randn(shared->front().b_q, rng, 0.3);
    fill_randn(shared->front().b_v, rng, 0.3);
    auto eval = [&vit, shared, image, probe]() {
      AdapterSet set;
      set.lowrank = *shared;
      return dot(vit.forward(vit.tokenize_original(image), set, false), probe);
    };
    checks.push_back({"lowrank.a_q", shared->front().a_q, eval});
    checks.push_back({"lowrank.b_q", shared->front().b_q, eval});
    checks.push_back({"lowrank.a_v", shared->front().a_v, eval});
    checks.push_back({"lowrank.b_v", shared->front().b_v, eval});
  }

  // Sub-kernel mixing logits.
  {
    auto bank = std::make_shared<SubKernelBank>(carve(vit.patch_kernel(), 2, 2));
    fill_randn(bank->w, rng, 0.5);
    auto eval = [&vit, bank, image, probe]() {
      return dot(vit.forward(tokenize_finegrained(image, *bank, vit), {}, false), probe);
    };
    checks.push_back({"subkernel.w", bank->w, eval});
  }

  // Attention map bank (maps, mixing weights, residual gate).
  {
    auto bank = std::make_shared<AttentionMapBank>(
        AttentionMapBank::create(store, 2, bc.grid(), 0, derive_seed(seed, "gc.domattn")));
    fill_randn(bank->maps, rng, 0.3);
    fill_randn(bank->weights, rng, 0.5);
    bank->alpha.vec()[0] = 0.5;
    auto eval = [&vit, bank, image, probe]() {
      AdapterSet set;
      set.attention = bank.get();
      return dot(vit.forward(vit.tokenize_original(image), set, false), probe);
    };
    checks.push_back({"domattn.maps", bank->maps, eval});
    checks.push_back({"domattn.r", bank->weights, eval});
    checks.push_back({"domattn.alpha", bank->alpha, eval});
  }

  // Probe head on fixed features.
  {
    auto head = std::make_shared<LinearHead>(
        LinearHead::create(store, "head", bc.d_model, 3, derive_seed(seed, "gc.head")));
    fill_randn(head->weight, rng, 0.5);
    fill_randn(head->bias, rng, 0.5);
    Tensor features = Tensor::randn({4, bc.d_model}, rng, 1.0);
    std::vector<int> labels = {0, 1, 2, 0};
    auto eval = [head, features, labels]() {
      return cross_entropy(head->logits(features), labels);
    };
    checks.push_back({"head.weight", head->weight, eval});
    checks.push_back({"head.bias", head->bias, eval});
  }

  return checks;
}

}  // namespace

std::vector<PathwayReport> gradcheck_suite(int seeds, double tol) {
  if (seeds < 1) throw std::invalid_argument("gradcheck_suite: seeds must be >= 1");
  std::vector<PathwayReport> reports;
  for (int s = 0; s < seeds; ++s) {
    ParameterStore store;
    std::vector<std::unique_ptr<VitBackbone>> keep_alive;
    std::vector<PathwayCheck> checks =
        pathway_fixtures(store, static_cast<std::uint64_t>(s), keep_alive);
    if (reports.empty()) {
      for (const PathwayCheck& c : checks) reports.push_back({c.name, 0.0, true});
    }
    for (std::size_t i = 0; i < checks.size(); ++i) {
      auto f = [&checks, i](const Tensor&) { return checks[i].eval(); };
      GradCheckResult r = grad_check(f, checks[i].param, 1e-5, tol);
      reports[i].max_rel_err = std::max(reports[i].max_rel_err, r.max_rel_err);
      reports[i].pass = reports[i].pass && r.pass;
    }
  }
  return reports;
}

std::string gradcheck_report_text(const std::vector<PathwayReport>& reports) {
  std::ostringstream out;
  for (const PathwayReport& r : reports) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", r.max_rel_err);
    out << (r.pass ? "PASS" : "FAIL") << " " << r.pathway << " max_rel_err=" << buf << "\n";
  }
  if (!faults::injected_fault_op().empty()) {
    out << "backward fault active on op '" << faults::injected_fault_op() << "'\n";
  }
  return out.str();
}

std::vector<CsvRow> sweep(const ExperimentConfig& base, const std::string& axis,
                          const std::vector<std::string>& values,
                          const std::vector<std::uint64_t>& seeds,
                          const std::filesystem::path& out_dir) {
  static const std::array<const char*, 5> kAxes = {"subkernel.u", "domattn.block", "domattn.C",
                                                   "aug.gamma", "aug.tau"};
  if (std::find_if(kAxes.begin(), kAxes.end(),
                   [&](const char* a) { return axis == a; }) == kAxes.end()) {
    throw std::invalid_argument("sweep: unsupported axis '" + axis + "'");
  }
  if (values.empty() || seeds.empty()) {
    throw std::invalid_argument("sweep: need at least one value and one seed");
  }
  std::vector<CsvRow> rows;
  for (const std::string& value : values) {
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = base;
      apply_override(cfg, axis + "=" + value);
      cfg.seed = seed;
      cfg.validate();
      TrainResult res = train(cfg, {});
      const double metric = cfg.is_classification() ? res.val_report.top1
                                                    : res.val_retrieval.average.r_at_1;
      rows.push_back({cfg.task + "[" + axis + "=" + value + "]", "val", main_metric_name(cfg),
                      metric, seed});
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "sweep.csv", metrics_csv(rows, serialize_config(base)));
  }
  return rows;
}

std::vector<CsvRow> ablation_ladder(const ExperimentConfig& base,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::filesystem::path& out_dir) {
  if (seeds.empty()) throw std::invalid_argument("ablation_ladder: need at least one seed");
  static const std::array<const char*, 5> kVariants = {"host", "aug", "subkernel", "domattn",
                                                       "full"};
  std::vector<CsvRow> rows;
  for (const char* variant : kVariants) {
    const std::string v = variant;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.aug_enabled = (v == "aug" || v == "full");
      cfg.subkernel_enabled = (v == "subkernel" || v == "full");
      cfg.domattn_enabled = (v == "domattn" || v == "full");
      cfg.seed = seed;
      cfg.validate();
      TrainResult res = train(cfg, {});
      const double metric = cfg.is_classification() ? res.test_report.top1
                                                    : res.test_retrieval.average.r_at_1;
      rows.push_back({"ladder:" + v, "test", main_metric_name(cfg), metric, seed});
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "ladder.csv", metrics_csv(rows, serialize_config(base)));
  }
  return rows;
}

void write_dataset_tree(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (cfg.task == "glyph") {
    struct SplitSpec {
      const char* name;
      int per_class;
      const char* label;
    };
    const std::array<SplitSpec, 3> splits = {{{"train", cfg.train_per_class, "data.train"},
                                              {"val", cfg.val_per_class, "data.val"},
                                              {"test", cfg.test_per_class, "data.test"}}};
    ClassificationDataset train_split;
    for (const SplitSpec& sp : splits) {
      ClassificationDataset ds = gen_glyph_task(cfg.classes, sp.per_class,
                                                cfg.backbone.image_size,
                                                derive_seed(cfg.seed, sp.label));
      for (std::size_t i = 0; i < ds.images.size(); ++i) {
        char cls[16];
        std::snprintf(cls, sizeof(cls), "class_%02d", ds.labels[i]);
        const std::filesystem::path dir = out_dir / sp.name / cls;
        std::filesystem::create_directories(dir);
        write_png(ds.images[i], dir / (ds.stems[i] + ".png"));
      }
      if (sp.name == std::string("train")) train_split = std::move(ds);
    }
    if (cfg.aug_enabled) {
      // Always materialize from the synthetic generator; a manifest config
      // pointed at this tree then reads back exactly these files.
      AugmentationConfig aug_cfg = cfg.aug;
      aug_cfg.generator_kind = "synthetic";
      AugmentationStore store =
          build_augmentation_store(train_split, aug_cfg, derive_seed(cfg.seed, "aug.store"));
      const std::filesystem::path aug_dir = out_dir / "aug";
      std::filesystem::create_directories(aug_dir);
      std::vector<int> preserving_counter(train_split.images.size(), 0);
      for (std::size_t i = 0; i < store.preserving.size(); ++i) {
        const int src = store.preserving_source[i];
        const int k = preserving_counter[static_cast<std::size_t>(src)]++;
        write_png(store.preserving[i],
                  aug_dir / (train_split.stems[static_cast<std::size_t>(src)] + ".preserving." +
                             std::to_string(k) + ".png"));
      }
      std::vector<int> pair_counter(train_split.images.size(), 0);
      for (const AugmentedPair& pair : store.pairs) {
        const int src = pair.source_id;
        const int k = pair_counter[static_cast<std::size_t>(src)]++;
        const std::string stem = train_split.stems[static_cast<std::size_t>(src)];
        write_png(pair.anchor, aug_dir / (stem + ".breaking." + std::to_string(k) + ".png"));
        write_png(pair.positive, aug_dir / (stem + ".positive." + std::to_string(k) + ".png"));
      }
    }
    return;
  }
  if (cfg.task == "maps") {
    struct SplitSpec {
      const char* name;
      int pairs;
      const char* label;
    };
    const std::array<SplitSpec, 3> splits = {{{"train", cfg.train_pairs, "data.train"},
                                              {"val", cfg.val_pairs, "data.val"},
                                              {"test", cfg.test_pairs, "data.test"}}};
    for (const SplitSpec& sp : splits) {
      RetrievalDataset ds =
          gen_map_pairs(sp.pairs, cfg.backbone.image_size, derive_seed(cfg.seed, sp.label));
      const std::filesystem::path dir_a = out_dir / sp.name / "domain_a";
      const std::filesystem::path dir_b = out_dir / sp.name / "domain_b";
      std::filesystem::create_directories(dir_a);
      std::filesystem::create_directories(dir_b);
      for (std::size_t i = 0; i < ds.stems.size(); ++i) {
        write_png(ds.domain_a[i], dir_a / (ds.stems[i] + ".png"));
        write_png(ds.domain_b[i], dir_b / (ds.stems[i] + ".png"));
      }
    }
    return;
  }
  throw std::invalid_argument("gen-data: task '" + cfg.task + "' is not synthetic");
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace lrva
