#include "lrva/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "lrva/ops.hpp"
#include "lrva/rng.hpp"

namespace lrva {

void AugmentationConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0 && tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("aug: gamma and tau must be in (0, 1)");
  }
  if (gamma >= tau) throw std::invalid_argument("aug: need gamma < tau");
  if (steps < 1) throw std::invalid_argument("aug: steps must be >= 1");
  if (m < 1) throw std::invalid_argument("aug: m must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("aug: lambda must be >= 0");
  if (sigma <= 0.0) throw std::invalid_argument("aug: sigma must be > 0");
  if (bank_size < 1) throw std::invalid_argument("aug: bank_size must be >= 1");
  if (generator_kind != "synthetic" && generator_kind != "manifest") {
    throw std::invalid_argument("aug: unknown generator '" + generator_kind + "'");
  }
}

std::pair<int, int> timesteps(const AugmentationConfig& cfg) {
  cfg.validate();
  return {static_cast<int>(std::floor(cfg.gamma * cfg.steps)),
          static_cast<int>(std::floor(cfg.tau * cfg.steps))};
}

void SyntheticGlyphGenerator::generate(const ClassificationDataset& data, int index,
                                       const AugmentationConfig& cfg, std::uint64_t seed,
                                       std::vector<Image>* preserving,
                                       std::vector<AugmentedPair>* pairs) const {
  if (data.recipes.empty()) {
    throw std::invalid_argument("aug: synthetic generator needs recipe-backed (glyph) data");
  }
  const GlyphRecipe& recipe = data.recipes.at(static_cast<std::size_t>(index));
  const auto [t_p, t_b] = timesteps(cfg);
  const double s_p = static_cast<double>(t_p) / cfg.steps;
  const double s_b = static_cast<double>(t_b) / cfg.steps;
  const auto idx = static_cast<std::uint64_t>(index);
  for (int i = 0; i < cfg.m; ++i) {
    const auto k = static_cast<std::uint64_t>(i);
    preserving->push_back(
        render_glyph(perturb_glyph(recipe, s_p, derive_seed(seed, "aug.preserving", idx, k))));
    const GlyphRecipe broken =
        perturb_glyph(recipe, s_b, derive_seed(seed, "aug.breaking", idx, k));
    AugmentedPair pair;
    pair.anchor = render_glyph(broken);
    pair.positive =
        render_glyph(perturb_glyph(broken, s_p, derive_seed(seed, "aug.positive", idx, k)));
    pair.source_id = index;
    pairs->push_back(std::move(pair));
  }
}

void ManifestGenerator::generate(const ClassificationDataset& data, int index,
                                 const AugmentationConfig& cfg, std::uint64_t /*seed*/,
                                 std::vector<Image>* preserving,
                                 std::vector<AugmentedPair>* pairs) const {
  const std::string& stem = data.stems.at(static_cast<std::size_t>(index));
  const int size = data.images.at(static_cast<std::size_t>(index)).height;
  auto load = [&](const std::string& kind, int i) {
    const std::filesystem::path path =
        root_ / "aug" / (stem + "." + kind + "." + std::to_string(i) + ".png");
    if (!std::filesystem::is_regular_file(path)) {
      throw std::invalid_argument("aug: manifest file missing: " + path.string());
    }
    Image im = read_png(path);
    if (im.height != size || im.width != size) im = resize_bilinear(im, size, size);
    return im;
  };
  for (int i = 0; i < cfg.m; ++i) {
    preserving->push_back(load("preserving", i));
    AugmentedPair pair;
    pair.anchor = load("breaking", i);
    pair.positive = load("positive", i);
    pair.source_id = index;
    pairs->push_back(std::move(pair));
  }
}

std::unique_ptr<AugmentationGenerator> make_generator(const AugmentationConfig& cfg,
                                                      const std::filesystem::path& data_root) {
  cfg.validate();
  if (cfg.generator_kind == "synthetic") return std::make_unique<SyntheticGlyphGenerator>();
  return std::make_unique<ManifestGenerator>(data_root);
}

AugmentationStore build_augmentation_store(const ClassificationDataset& data,
                                           const AugmentationConfig& cfg, std::uint64_t seed,
                                           const std::filesystem::path& data_root) {
  const std::unique_ptr<AugmentationGenerator> gen = make_generator(cfg, data_root);
  AugmentationStore store;
  for (int i = 0; i < static_cast<int>(data.images.size()); ++i) {
    gen->generate(data, i, cfg, seed, &store.preserving, &store.pairs);
    for (int k = 0; k < cfg.m; ++k) {
      store.preserving_labels.push_back(data.labels[static_cast<std::size_t>(i)]);
      store.preserving_source.push_back(i);
    }
  }
  return store;
}

MemoryBank::MemoryBank(int capacity, double sigma) : capacity_(capacity), sigma_(sigma) {
  if (capacity < 1) throw std::invalid_argument("memory bank: capacity must be >= 1");
  if (sigma <= 0.0) throw std::invalid_argument("memory bank: sigma must be > 0");
}

void MemoryBank::enqueue_detached(const Tensor& rows) {
  if (rows.rank() != 2) throw std::invalid_argument("memory bank: expected [n, d] rows");
  const int n = rows.dim(0), d = rows.dim(1);
  if (dim_ == -1) dim_ = d;
  if (d != dim_) throw std::invalid_argument("memory bank: feature width changed");
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(d));
    double sq = 0.0;
    for (int j = 0; j < d; ++j) {
      row[static_cast<std::size_t>(j)] = rows.vec()[static_cast<std::size_t>(i) * d + j];
      sq += row[static_cast<std::size_t>(j)] * row[static_cast<std::size_t>(j)];
    }
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-10) {
      throw std::runtime_error("memory bank: row is not unit-norm");
    }
    rows_.push_back(std::move(row));
    if (static_cast<int>(rows_.size()) > capacity_) rows_.pop_front();
  }
}

Tensor MemoryBank::contents() const {
  if (rows_.empty()) throw std::logic_error("memory bank: empty");
  Tensor out = Tensor::zeros({size(), dim_});
  for (int i = 0; i < size(); ++i) {
    const auto& row = rows_[static_cast<std::size_t>(i)];
    std::copy(row.begin(), row.end(), out.vec().begin() + static_cast<std::ptrdiff_t>(i) * dim_);
  }
  return out;
}

void MemoryBank::clear() {
  rows_.clear();
  dim_ = -1;
}

Tensor label_breaking_loss(const Tensor& anchors, const Tensor& positives, MemoryBank& bank) {
  if (anchors.rank() != 2 || positives.rank() != 2 || anchors.dim(0) != positives.dim(0) ||
      anchors.dim(1) != positives.dim(1)) {
    throw std::invalid_argument("label_breaking_loss: need matching [n, d] matrices");
  }
  const int n = anchors.dim(0);
  if (n < 1) throw std::invalid_argument("label_breaking_loss: empty batch");

  Tensor keys = positives;
  if (bank.size() > 0) {
    std::vector<Tensor> parts = {positives, bank.contents()};
    keys = concat_rows(parts);
  }
  Tensor logits = scalar_mul(matmul(anchors, transpose(keys)), 1.0 / bank.sigma());
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i;
  Tensor loss = cross_entropy(logits, labels);
  bank.enqueue_detached(positives);
  return loss;
}

Tensor combined_loss(const Tensor& task, const Tensor& label_breaking, double lambda) {
  return add(task, scalar_mul(label_breaking, lambda));
}

TrainingBatch sample_training_batch(int n_originals, const AugmentationStore& store, int batch,
                                    int epoch, int step, std::uint64_t seed) {
  const int pool = n_originals + static_cast<int>(store.preserving.size());
  if (pool < 1) throw std::invalid_argument("sample_training_batch: empty sample pool");
  if (batch < 1) throw std::invalid_argument("sample_training_batch: batch must be >= 1");
  Rng rng(derive_seed(seed, "train.batch", static_cast<std::uint64_t>(epoch),
                      static_cast<std::uint64_t>(step)));
  TrainingBatch out;
  for (int i = 0; i < batch; ++i) out.task_indices.push_back(rng.next_int(pool));
  if (!store.pairs.empty()) {
    const int n_pairs = static_cast<int>(store.pairs.size());
    for (int i = 0; i < batch; ++i) out.pair_indices.push_back(rng.next_int(n_pairs));
  }
  return out;
}

}  // namespace lrva
