#include "lrva/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "lrva/ops.hpp"
#include "lrva/rng.hpp"

namespace lrva {

namespace {

struct Color {
  std::uint8_t r, g, b;
};

void put_dot(Image& im, int y, int x, Color c, int thickness) {
  const int half = thickness / 2;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const int yy = y + dy, xx = x + dx;
      if (yy < 0 || yy >= im.height || xx < 0 || xx >= im.width) continue;
      im.at(yy, xx, 0) = c.r;
      im.at(yy, xx, 1) = c.g;
      im.at(yy, xx, 2) = c.b;
    }
  }
}

void draw_line(Image& im, int y0, int x0, int y1, int x1, Color c, int thickness) {
  const int dy = std::abs(y1 - y0), dx = std::abs(x1 - x0);
  const int sy = y0 < y1 ? 1 : -1, sx = x0 < x1 ? 1 : -1;
  int err = dx - dy;
  int y = y0, x = x0;
  while (true) {
    put_dot(im, y, x, c, thickness);
    if (y == y1 && x == x1) break;
    const int e2 = 2 * err;
    if (e2 > -dy) {
      err -= dy;
      x += sx;
    }
    if (e2 < dx) {
      err += dx;
      y += sy;
    }
  }
}

void draw_circle(Image& im, int cy, int cx, int radius, Color c, bool filled) {
  for (int y = cy - radius; y <= cy + radius; ++y) {
    for (int x = cx - radius; x <= cx + radius; ++x) {
      const double d = std::hypot(y - cy, x - cx);
      const bool hit = filled ? d <= radius + 0.3 : std::abs(d - radius) <= 0.8;
      if (hit) put_dot(im, y, x, c, 1);
    }
  }
}

// Motif kinds: 0 plus, 1 box, 2 diagonal cross, 3 ring. Each class is a
// distinct multiset of three motifs; the color code gives frozen-random
// features a channel statistic to latch onto while shapes stay subtle.
constexpr int kMotifKinds = 4;
constexpr int kMotifsPerClass = 3;
constexpr Color kMotifColors[kMotifKinds] = {
    {172, 44, 44}, {44, 44, 172}, {44, 140, 44}, {150, 112, 32}};

std::vector<std::array<int, 3>> all_motif_multisets() {
  std::vector<std::array<int, 3>> sets;
  for (int a = 0; a < kMotifKinds; ++a) {
    for (int b = a; b < kMotifKinds; ++b) {
      for (int c = b; c < kMotifKinds; ++c) sets.push_back({a, b, c});
    }
  }
  return sets;
}

std::array<int, 3> class_motifs(int n_classes, int class_id) {
  static const std::vector<std::array<int, 3>> sets = all_motif_multisets();
  if (n_classes < 2 || n_classes > static_cast<int>(sets.size())) {
    throw std::invalid_argument("glyph: n_classes must be in [2, " +
                                std::to_string(sets.size()) + "]");
  }
  if (class_id < 0 || class_id >= n_classes) throw std::invalid_argument("glyph: bad class id");
  return sets[static_cast<std::size_t>(class_id)];
}

void draw_motif(Image& im, int kind, int cy, int cx) {
  const Color c = kMotifColors[kind];
  const int r = 4;
  switch (kind) {
    case 0:  // plus
      draw_line(im, cy - r, cx, cy + r, cx, c, 2);
      draw_line(im, cy, cx - r, cy, cx + r, c, 2);
      break;
    case 1:  // box
      draw_line(im, cy - r, cx - r, cy - r, cx + r, c, 2);
      draw_line(im, cy + r, cx - r, cy + r, cx + r, c, 2);
      draw_line(im, cy - r, cx - r, cy + r, cx - r, c, 2);
      draw_line(im, cy - r, cx + r, cy + r, cx + r, c, 2);
      break;
    case 2:  // diagonal cross
      draw_line(im, cy - r, cx - r, cy + r, cx + r, c, 2);
      draw_line(im, cy - r, cx + r, cy + r, cx - r, c, 2);
      break;
    default:  // ring
      draw_circle(im, cy, cx, r, c, false);
      break;
  }
}

int clamp_coord(double v, int lo, int hi) {
  return std::clamp(static_cast<int>(std::lround(v)), lo, hi);
}

constexpr int kWires = 3;
constexpr int kWirePoints = 3;

}  // namespace

Image render_glyph(const GlyphRecipe& recipe) {
  const int S = recipe.image_size;
  if (S < 32) throw std::invalid_argument("glyph: image_size must be >= 32");
  const std::array<int, 3> motifs = class_motifs(recipe.n_classes, recipe.class_id);

  Image im = Image::blank(S, S, 235);

  // Base geometry always consumes the same layout draws so jitter is a pure
  // displacement on top of it.
  Rng layout(recipe.layout_seed);
  const int margin = 8;
  std::array<std::array<double, 2>, kMotifsPerClass> centers;
  for (auto& p : centers) {
    p[0] = layout.uniform(margin, S - 1 - margin);
    p[1] = layout.uniform(margin, S - 1 - margin);
  }
  std::array<std::array<double, 2 * kWirePoints>, kWires> wires;
  for (auto& w : wires) {
    for (double& v : w) v = layout.uniform(2, S - 3);
  }

  if (recipe.jitter > 0.0) {
    Rng jr(recipe.jitter_seed);
    for (auto& p : centers) {
      p[0] += jr.normal(0.0, recipe.jitter);
      p[1] += jr.normal(0.0, recipe.jitter);
    }
    for (auto& w : wires) {
      for (double& v : w) v += jr.normal(0.0, recipe.jitter);
    }
  }

  const Color wire_color = {104, 104, 104};
  for (const auto& w : wires) {
    for (int s = 0; s + 1 < kWirePoints; ++s) {
      draw_line(im, clamp_coord(w[2 * s], 0, S - 1), clamp_coord(w[2 * s + 1], 0, S - 1),
                clamp_coord(w[2 * s + 2], 0, S - 1), clamp_coord(w[2 * s + 3], 0, S - 1),
                wire_color, 1);
    }
  }
  for (int k = 0; k < kMotifsPerClass; ++k) {
    draw_motif(im, motifs[static_cast<std::size_t>(k)],
               clamp_coord(centers[static_cast<std::size_t>(k)][0], margin, S - 1 - margin),
               clamp_coord(centers[static_cast<std::size_t>(k)][1], margin, S - 1 - margin));
  }

  if (recipe.noise > 0.0) {
    Rng nr(recipe.noise_seed);
    const double p = std::min(recipe.noise, 0.5);
    for (int y = 0; y < S; ++y) {
      for (int x = 0; x < S; ++x) {
        if (nr.next_double() < p) {
          const auto v = static_cast<std::uint8_t>(nr.next_int(256));
          im.at(y, x, 0) = v;
          im.at(y, x, 1) = v;
          im.at(y, x, 2) = v;
        }
      }
    }
  }
  return im;
}

GlyphRecipe perturb_glyph(const GlyphRecipe& recipe, double s, std::uint64_t seed) {
  if (s < 0.0 || s > 1.0) throw std::invalid_argument("glyph: strength must be in [0, 1]");
  if (s == 0.0) return recipe;
  GlyphRecipe out = recipe;
  out.jitter += 6.0 * s;
  out.jitter_seed = derive_seed(seed, "glyph.jitter");
  out.noise += 0.15 * s;
  out.noise_seed = derive_seed(seed, "glyph.noise");
  if (s >= 0.5 && recipe.n_classes > 1) {
    Rng cr(derive_seed(seed, "glyph.class"));
    out.class_id = (recipe.class_id + 1 + cr.next_int(recipe.n_classes - 1)) % recipe.n_classes;
  }
  return out;
}

Image render_map(const MapLatent& latent, MapStyle style) {
  const int S = latent.image_size;
  if (S < 32) throw std::invalid_argument("map: image_size must be >= 32");
  Rng rng(latent.latent_seed);

  // Shared geometry: a left-to-right coastline walk plus two islands.
  constexpr int kCoastPoints = 9;
  std::array<std::array<double, 2>, kCoastPoints> coast;
  double y = S / 2.0;
  for (int i = 0; i < kCoastPoints; ++i) {
    y = std::clamp(y + rng.normal(0.0, S / 12.0), S / 6.0, 5.0 * S / 6.0);
    coast[static_cast<std::size_t>(i)] = {y, i * (S - 1.0) / (kCoastPoints - 1)};
  }
  std::array<std::array<double, 3>, 2> islands;  // (cy, cx, radius)
  for (auto& isl : islands) {
    isl = {rng.uniform(S / 5.0, 4.0 * S / 5.0), rng.uniform(S / 5.0, 4.0 * S / 5.0),
           rng.uniform(S / 16.0, S / 9.0)};
  }

  const bool vintage = style == MapStyle::kVintage;
  Image im = Image::blank(S, S, vintage ? 206 : 246);
  if (vintage) {
    for (int py = 0; py < S; ++py) {
      for (int px = 0; px < S; ++px) {
        im.at(py, px, 2) = 158;  // parchment: keep R/G, pull blue down
        im.at(py, px, 1) = 192;
      }
    }
    Rng speckle(derive_seed(latent.latent_seed, "map.texture"));
    const int specks = S * S / 64;
    for (int i = 0; i < specks; ++i) {
      put_dot(im, speckle.next_int(S), speckle.next_int(S), {166, 150, 118}, 1);
    }
  }

  // The modern style re-draws the same geometry under a small rigid motion.
  double rot = 0.0, ty = 0.0, tx = 0.0;
  if (!vintage) {
    Rng xform(derive_seed(latent.latent_seed, "map.xform"));
    rot = xform.uniform(-0.05, 0.05);
    ty = xform.uniform(-2.0, 2.0);
    tx = xform.uniform(-2.0, 2.0);
  }
  const double cy0 = (S - 1) / 2.0, cx0 = (S - 1) / 2.0;
  auto move = [&](std::array<double, 2> p) {
    const double ry = p[0] - cy0, rx = p[1] - cx0;
    return std::array<double, 2>{cy0 + ry * std::cos(rot) - rx * std::sin(rot) + ty,
                                 cx0 + ry * std::sin(rot) + rx * std::cos(rot) + tx};
  };

  const Color coast_color = vintage ? Color{82, 60, 34} : Color{36, 70, 160};
  const int thickness = vintage ? 3 : 1;
  for (int i = 0; i + 1 < kCoastPoints; ++i) {
    const auto a = move(coast[static_cast<std::size_t>(i)]);
    const auto b = move(coast[static_cast<std::size_t>(i + 1)]);
    draw_line(im, clamp_coord(a[0], 0, S - 1), clamp_coord(a[1], 0, S - 1),
              clamp_coord(b[0], 0, S - 1), clamp_coord(b[1], 0, S - 1), coast_color, thickness);
  }
  for (const auto& isl : islands) {
    const auto c = move({isl[0], isl[1]});
    draw_circle(im, clamp_coord(c[0], 0, S - 1), clamp_coord(c[1], 0, S - 1),
                static_cast<int>(std::lround(isl[2])), coast_color, vintage);
  }
  return im;
}

ClassificationDataset gen_glyph_task(int n_classes, int per_class, int image_size,
                                     std::uint64_t seed) {
  if (per_class < 1) throw std::invalid_argument("glyph: per_class must be >= 1");
  class_motifs(n_classes, 0);  // validates n_classes
  ClassificationDataset out;
  out.n_classes = n_classes;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      GlyphRecipe recipe;
      recipe.n_classes = n_classes;
      recipe.class_id = c;
      recipe.image_size = image_size;
      recipe.layout_seed = derive_seed(seed, "glyph.layout", static_cast<std::uint64_t>(c),
                                       static_cast<std::uint64_t>(i));
      out.images.push_back(render_glyph(recipe));
      out.labels.push_back(c);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "c%d_%03d", c, i);
      out.stems.emplace_back(stem);
      out.recipes.push_back(recipe);
    }
  }
  return out;
}

RetrievalDataset gen_map_pairs(int n_pairs, int image_size, std::uint64_t seed) {
  if (n_pairs < 2) throw std::invalid_argument("map: n_pairs must be >= 2");
  RetrievalDataset out;
  for (int i = 0; i < n_pairs; ++i) {
    MapLatent latent{derive_seed(seed, "map.latent", static_cast<std::uint64_t>(i)), image_size};
    out.domain_a.push_back(render_map(latent, MapStyle::kVintage));
    out.domain_b.push_back(render_map(latent, MapStyle::kModern));
    char stem[32];
    std::snprintf(stem, sizeof(stem), "pair_%04d", i);
    out.stems.emplace_back(stem);
  }
  return out;
}

namespace {

Image load_and_resize(const std::filesystem::path& path, int image_size) {
  Image im = read_png(path);
  if (im.height != image_size || im.width != image_size) {
    im = resize_bilinear(im, image_size, image_size);
  }
  return im;
}

std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir,
                                                  bool directories) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (directories && entry.is_directory()) out.push_back(entry.path());
    if (!directories && entry.is_regular_file() && entry.path().extension() == ".png") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

ClassificationDataset load_classification_directory(const std::filesystem::path& root,
                                                    const std::string& split, int image_size) {
  const std::filesystem::path dir = root / split;
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("dataset: missing split directory " + dir.string());
  }
  ClassificationDataset out;
  const std::vector<std::filesystem::path> class_dirs = sorted_entries(dir, true);
  if (class_dirs.empty()) throw std::invalid_argument("dataset: no class directories in " + dir.string());
  out.n_classes = static_cast<int>(class_dirs.size());
  for (int c = 0; c < out.n_classes; ++c) {
    const auto files = sorted_entries(class_dirs[static_cast<std::size_t>(c)], false);
    if (files.empty()) {
      throw std::invalid_argument("dataset: empty class directory " +
                                  class_dirs[static_cast<std::size_t>(c)].string());
    }
    for (const auto& f : files) {
      out.images.push_back(load_and_resize(f, image_size));
      out.labels.push_back(c);
      out.stems.push_back(f.stem().string());
    }
  }
  return out;
}

RetrievalDataset load_retrieval_directory(const std::filesystem::path& root,
                                          const std::string& split, int image_size) {
  const std::filesystem::path da = root / split / "domain_a";
  const std::filesystem::path db = root / split / "domain_b";
  if (!std::filesystem::is_directory(da) || !std::filesystem::is_directory(db)) {
    throw std::invalid_argument("dataset: retrieval split needs domain_a and domain_b under " +
                                (root / split).string());
  }
  std::set<std::string> stems_a, stems_b;
  for (const auto& f : sorted_entries(da, false)) stems_a.insert(f.stem().string());
  for (const auto& f : sorted_entries(db, false)) stems_b.insert(f.stem().string());
  for (const std::string& s : stems_a) {
    if (!stems_b.count(s)) throw std::invalid_argument("dataset: missing counterpart " + s + ".png");
  }
  for (const std::string& s : stems_b) {
    if (!stems_a.count(s)) throw std::invalid_argument("dataset: missing counterpart " + s + ".png");
  }
  if (stems_a.empty()) throw std::invalid_argument("dataset: no retrieval pairs in " + da.string());

  RetrievalDataset out;
  for (const std::string& s : stems_a) {  // std::set iterates sorted
    out.domain_a.push_back(load_and_resize(da / (s + ".png"), image_size));
    out.domain_b.push_back(load_and_resize(db / (s + ".png"), image_size));
    out.stems.push_back(s);
  }
  return out;
}

std::uint64_t dataset_hash(const ClassificationDataset& d) {
  std::uint64_t h = fnv1a("classification");
  h = fnv1a_bytes(&d.n_classes, sizeof(d.n_classes), h);
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    h = fnv1a_bytes(&d.labels[i], sizeof(int), h);
    h = fnv1a_bytes(d.images[i].pixels.data(), d.images[i].pixels.size(), h);
  }
  return h;
}

std::uint64_t dataset_hash(const RetrievalDataset& d) {
  std::uint64_t h = fnv1a("retrieval");
  for (std::size_t i = 0; i < d.domain_a.size(); ++i) {
    h = fnv1a_bytes(d.domain_a[i].pixels.data(), d.domain_a[i].pixels.size(), h);
    h = fnv1a_bytes(d.domain_b[i].pixels.data(), d.domain_b[i].pixels.size(), h);
  }
  return h;
}

Tensor classification_loss(const Tensor& logits, const std::vector<int>& labels) {
  return cross_entropy(logits, labels);
}

Tensor retrieval_task_loss(const Tensor& domain_a, const Tensor& domain_b, double sigma) {
  if (domain_a.rank() != 2 || domain_b.rank() != 2 || domain_a.dim(0) != domain_b.dim(0)) {
    throw std::invalid_argument("retrieval loss: need matching [n, d] embedding matrices");
  }
  if (domain_a.dim(0) < 2) {
    throw std::invalid_argument("retrieval loss: need at least 2 pairs for in-batch negatives");
  }
  if (sigma <= 0.0) throw std::invalid_argument("retrieval loss: sigma must be positive");
  Tensor a = l2_normalize_rows(domain_a);
  Tensor b = l2_normalize_rows(domain_b);
  Tensor sim = scalar_mul(matmul(a, transpose(b)), 1.0 / sigma);
  std::vector<int> diag(static_cast<std::size_t>(domain_a.dim(0)));
  for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = static_cast<int>(i);
  return scalar_mul(add(cross_entropy(sim, diag), cross_entropy(transpose(sim), diag)), 0.5);
}

}  // namespace lrva
