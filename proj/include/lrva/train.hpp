#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lrva/adapters.hpp"
#include "lrva/augment.hpp"
#include "lrva/backbone.hpp"
#include "lrva/checkpoint.hpp"
#include "lrva/config.hpp"
#include "lrva/datasets.hpp"
#include "lrva/metrics.hpp"
#include "lrva/optim.hpp"
#include "lrva/subkernel.hpp"

namespace lrva {

// A fully assembled experiment: frozen backbone plus whichever trainable
// attachments the config enables, all registered under stable names so
// checkpoints are portable across processes.
struct Model {
  ExperimentConfig cfg;
  int n_classes = 0;
  ParameterStore store;
  std::unique_ptr<VitBackbone> backbone;
  std::vector<BottleneckAdapter> bottleneck;
  std::vector<LowRankAdapter> lowrank;
  std::optional<AttentionMapBank> attention;
  std::optional<SubKernelBank> subkernel;
  std::optional<LinearHead> head;

  AdapterSet adapters() const;
  TokenGrid tokenize(const Tensor& image) const;
  Tensor embed_tensor(const Tensor& image, bool normalize) const;
  Tensor embed(const Image& image, bool normalize) const;
  std::int64_t trainable_count() const { return store.trainable_count(); }
};

// n_classes sizes the classification head; pass 0 for retrieval tasks.
Model build_model(const ExperimentConfig& cfg, int n_classes);

struct TaskData {
  bool classification = true;
  int n_classes = 0;
  ClassificationDataset ctrain, cval, ctest;
  RetrievalDataset rtrain, rval, rtest;
  std::uint64_t train_hash = 0;
};

TaskData load_task_data(const ExperimentConfig& cfg);

MetricReport evaluate_classification(const Model& model, const ClassificationDataset& data);

struct RetrievalReport {
  RetrievalResult a_to_b, b_to_a, average;
};

RetrievalReport evaluate_retrieval(const Model& model, const RetrievalDataset& data,
                                   bool bidirectional);

struct TrainResult {
  int best_epoch = -1;
  double best_val_metric = 0.0;
  MetricReport val_report, test_report;          // classification tasks
  RetrievalReport val_retrieval, test_retrieval;  // retrieval tasks
  std::vector<CsvRow> rows;
  std::string csv;
  std::string log;
  std::uint64_t train_hash = 0;
  Checkpoint state;
};

// Full training run: offline augmentation store, epoch loop with per-step
// loss logging, per-epoch validation, best-val state selection, final test
// evaluation on the restored state. Writes metrics.csv, checkpoint.lrva and
// train.log into out_dir unless it is empty.
TrainResult train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Training state reuses the checkpoint container: store tensors plus
// optim.t/optim.m.*/optim.v.* moments, bank.contents, meta.best, and the
// serialized config as meta.config (one f32 per byte, lossless for UTF-8).
Checkpoint snapshot_train_state(const Model& model, const Adam& optimizer, const MemoryBank* bank,
                                int best_epoch, double best_metric);
// Copies trainable parameters (by name, shapes and frozen flags checked)
// from a state snapshot. Frozen entries are validated but keep the model's
// freshly initialized values — they are regenerated exactly from the config
// seed, while the snapshot holds them rounded to f32. Auxiliary tensors
// (optimizer moments, bank, meta.*) are ignored.
void apply_parameters(Model& model, const Checkpoint& state);
ExperimentConfig config_from_state(const Checkpoint& state);

struct EvalOutput {
  std::vector<CsvRow> rows;
  std::string csv;
};

// Rebuilds the model from the config embedded in the checkpoint (plus
// overrides), loads the parameters, and evaluates the requested splits.
EvalOutput evaluate_checkpoint_file(const std::filesystem::path& checkpoint_path,
                                    const std::vector<std::string>& overrides,
                                    const std::vector<std::string>& splits,
                                    const std::filesystem::path& out_dir);

struct PathwayReport {
  std::string pathway;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Finite-difference check of every trainable pathway at small shapes,
// repeated over `seeds` seeds; zero-initialized factors are randomized first
// so no pathway is checked at a vanishing-gradient point.
std::vector<PathwayReport> gradcheck_suite(int seeds = 20, double tol = 1e-4);
std::string gradcheck_report_text(const std::vector<PathwayReport>& reports);

// One train+eval per (value, seed); emits one row per combination with the
// swept assignment recorded in the task column.
std::vector<CsvRow> sweep(const ExperimentConfig& base, const std::string& axis,
                          const std::vector<std::string>& values,
                          const std::vector<std::uint64_t>& seeds,
                          const std::filesystem::path& out_dir);

// Trains host-only, each single baseline, and the full combination over the
// shared seed set; one test-split row per (variant, seed).
std::vector<CsvRow> ablation_ladder(const ExperimentConfig& base,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::filesystem::path& out_dir);

// Writes the config's synthetic datasets as a directory tree the lite_*
// loaders and the manifest generator can read back.
void write_dataset_tree(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace lrva
