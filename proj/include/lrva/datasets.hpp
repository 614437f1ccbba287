#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrva/image.hpp"
#include "lrva/tensor.hpp"

namespace lrva {

// Generating parameters for one synthetic glyph image. The class is a
// multiset of small motifs; the layout (motif positions, distractor wires)
// is independent noise, so models must read the motifs rather than memorize
// layouts. Perturbation strength accumulates in jitter/noise so augmented
// recipes can be re-perturbed.
struct GlyphRecipe {
  int n_classes = 8;
  int class_id = 0;
  int image_size = 64;
  std::uint64_t layout_seed = 0;
  double jitter = 0.0;  // motif/wire displacement, pixels
  std::uint64_t jitter_seed = 0;
  double noise = 0.0;  // per-pixel corruption probability
  std::uint64_t noise_seed = 0;
};

Image render_glyph(const GlyphRecipe& recipe);

// Strength s in [0, 1]: s = 0 returns the recipe unchanged; otherwise jitter
// and noise grow in proportion to s, and at s >= 0.5 the class is resampled
// (uniformly over the other classes) so the label is destroyed by
// construction while the layout is kept.
GlyphRecipe perturb_glyph(const GlyphRecipe& recipe, double s, std::uint64_t seed);

// Latent for one retrieval pair: a shared "coastline" polyline plus island
// blobs rendered in two cartographic styles.
struct MapLatent {
  std::uint64_t latent_seed = 0;
  int image_size = 64;
};

enum class MapStyle { kVintage, kModern };

Image render_map(const MapLatent& latent, MapStyle style);

struct ClassificationDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> stems;  // per-item file stem for manifests
  int n_classes = 0;
  std::vector<GlyphRecipe> recipes;  // present only for synthetic data
};

struct RetrievalDataset {
  std::vector<Image> domain_a;
  std::vector<Image> domain_b;
  std::vector<std::string> stems;
};

// Class-balanced synthetic classification split; deterministic per seed.
ClassificationDataset gen_glyph_task(int n_classes, int per_class, int image_size,
                                     std::uint64_t seed);

// Aligned two-style renders of shared latents; deterministic per seed.
RetrievalDataset gen_map_pairs(int n_pairs, int image_size, std::uint64_t seed);

// Directory layouts: classification root/{split}/{class_name}/*.png;
// retrieval root/{split}/domain_a/*.png and domain_b with matching stems.
ClassificationDataset load_classification_directory(const std::filesystem::path& root,
                                                    const std::string& split, int image_size);
RetrievalDataset load_retrieval_directory(const std::filesystem::path& root,
                                          const std::string& split, int image_size);

std::uint64_t dataset_hash(const ClassificationDataset& d);
std::uint64_t dataset_hash(const RetrievalDataset& d);

// Cross-entropy over class logits [n, classes].
Tensor classification_loss(const Tensor& logits, const std::vector<int>& labels);

// Symmetric in-batch InfoNCE between the two domains' embeddings (rows are
// L2-normalized internally); needs at least two pairs for negatives.
Tensor retrieval_task_loss(const Tensor& domain_a, const Tensor& domain_b, double sigma);

}  // namespace lrva
