#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lrva/datasets.hpp"
#include "lrva/image.hpp"
#include "lrva/tensor.hpp"

namespace lrva {

// Generated-data settings: two strength thresholds on a T-step noise
// schedule (low = label kept, high = label destroyed), m augmentations per
// sample, and the contrastive loss knobs.
struct AugmentationConfig {
  double gamma = 0.3;  // label-preserving strength fraction
  double tau = 0.6;    // label-breaking strength fraction
  int steps = 50;      // schedule length T
  int m = 10;          // augmentations per sample
  std::string generator_kind = "synthetic";  // synthetic | manifest
  double lambda = 0.1;                       // combined-loss weight
  double sigma = 0.07;                       // contrastive temperature
  int bank_size = 100;

  void validate() const;
};

// (t_p, t_b) = (floor(gamma*T), floor(tau*T)).
std::pair<int, int> timesteps(const AugmentationConfig& cfg);

// A label-breaking augmentation plus its low-strength re-augmentation; the
// pair is the positive for the contrastive loss.
struct AugmentedPair {
  Image anchor;
  Image positive;
  int source_id = 0;
};

struct AugmentationStore {
  std::vector<Image> preserving;
  std::vector<int> preserving_labels;
  std::vector<int> preserving_source;
  std::vector<AugmentedPair> pairs;
};

// Pluggable producer of augmentations for one source sample.
class AugmentationGenerator {
 public:
  virtual ~AugmentationGenerator() = default;
  virtual void generate(const ClassificationDataset& data, int index,
                        const AugmentationConfig& cfg, std::uint64_t seed,
                        std::vector<Image>* preserving, std::vector<AugmentedPair>* pairs) const = 0;
};

// Recipe-aware procedural generator: preserving = re-render with jitter and
// pixel noise at the low strength; breaking = recipe with the class
// resampled at the high strength; positive = breaking recipe re-perturbed at
// the low strength.
class SyntheticGlyphGenerator : public AugmentationGenerator {
 public:
  void generate(const ClassificationDataset& data, int index, const AugmentationConfig& cfg,
                std::uint64_t seed, std::vector<Image>* preserving,
                std::vector<AugmentedPair>* pairs) const override;
};

// Loads pre-generated files root/aug/{stem}.{preserving|breaking|positive}.{i}.png.
class ManifestGenerator : public AugmentationGenerator {
 public:
  explicit ManifestGenerator(std::filesystem::path root) : root_(std::move(root)) {}
  void generate(const ClassificationDataset& data, int index, const AugmentationConfig& cfg,
                std::uint64_t seed, std::vector<Image>* preserving,
                std::vector<AugmentedPair>* pairs) const override;

 private:
  std::filesystem::path root_;
};

// Unknown generator_kind is an error; data_root is only used by the
// manifest generator.
std::unique_ptr<AugmentationGenerator> make_generator(const AugmentationConfig& cfg,
                                                      const std::filesystem::path& data_root);

// Runs the generator once over the whole training split (offline store).
AugmentationStore build_augmentation_store(const ClassificationDataset& data,
                                           const AugmentationConfig& cfg, std::uint64_t seed,
                                           const std::filesystem::path& data_root = {});

// FIFO queue of detached unit-norm feature rows supplying extra contrastive
// negatives; owns the temperature so the loss and the bank stay in sync.
class MemoryBank {
 public:
  explicit MemoryBank(int capacity = 100, double sigma = 0.07);

  int capacity() const { return capacity_; }
  double sigma() const { return sigma_; }
  int size() const { return static_cast<int>(rows_.size()); }
  int dim() const { return dim_; }

  // Detaches and stores each row of [n, d]; rows must be unit-norm within
  // 1e-10; evicts oldest-first beyond capacity.
  void enqueue_detached(const Tensor& rows);
  // Bank contents as an untracked [size, d] constant, row 0 = oldest.
  Tensor contents() const;
  void clear();

 private:
  int capacity_;
  double sigma_;
  int dim_ = -1;
  std::deque<std::vector<double>> rows_;
};

// InfoNCE over anchors with positives at matching row indices; negatives are
// the other in-batch positives plus the bank contents. Positives are
// enqueued (detached) after the loss is built.
Tensor label_breaking_loss(const Tensor& anchors, const Tensor& positives, MemoryBank& bank);

// task + lambda * label_breaking.
Tensor combined_loss(const Tensor& task, const Tensor& label_breaking, double lambda);

struct TrainingBatch {
  // Indices into the union pool: [0, n_originals) are originals, the rest
  // offset into store.preserving.
  std::vector<int> task_indices;
  std::vector<int> pair_indices;  // into store.pairs; empty when no pairs exist
};

// Uniform draws from originals ∪ preserving and from the breaking pairs,
// deterministic per (epoch, step, seed).
TrainingBatch sample_training_batch(int n_originals, const AugmentationStore& store, int batch,
                                    int epoch, int step, std::uint64_t seed);

}  // namespace lrva
