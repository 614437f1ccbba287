// Release gate: one self-contained check per numbered criterion, each
// printing a single PASS/FAIL line (plus indented evidence). Tolerances are
// pinned here, next to the checks that use them. Criterion 10 is a soft,
// direction-of-effect check: its failure is reported but never fails the
// binary. Run with --criterion N for one check or no arguments for all.

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lrva/augment.hpp"
#include "lrva/backbone.hpp"
#include "lrva/checkpoint.hpp"
#include "lrva/config.hpp"
#include "lrva/datasets.hpp"
#include "lrva/domattn.hpp"
#include "lrva/metrics.hpp"
#include "lrva/ops.hpp"
#include "lrva/rng.hpp"
#include "lrva/subkernel.hpp"
#include "lrva/train.hpp"

namespace lrva {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr double kGradTol = 1e-4;       // max relative error per pathway
constexpr int kGradSeeds = 20;          // finite-difference repetitions
constexpr double kGradBudget = 60.0;    // seconds for the whole sweep
constexpr double kNoOpTol = 1e-10;      // zero-init add-ons vs plain model
constexpr double kNceTol = 1e-10;       // contrastive loss vs oracle
constexpr double kMixTol = 1e-12;       // mixing-weight normalization / hull
constexpr double kSameMapsTol = 1e-12;  // C identical maps vs single map
constexpr double kLadderGain = 5.0;     // full minus host, percentage points
constexpr double kLadderSlack = 1.0;    // full may trail a single by this
constexpr double kRunBudget = 600.0;    // seconds per benchmark run

struct Outcome {
  bool pass = false;
  bool soft = false;
  std::string summary;
  std::vector<std::string> details;
};

fs::path g_out = "acceptance_out";

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

Tensor stack_value_embeddings(const Model& model, const std::vector<Image>& images) {
  const int d = model.cfg.backbone.d_model;
  Tensor out = Tensor::zeros({static_cast<int>(images.size()), d});
  for (std::size_t i = 0; i < images.size(); ++i) {
    Tensor e = model.embed(images[i], false);
    std::copy(e.vec().begin(), e.vec().end(),
              out.vec().begin() + static_cast<std::ptrdiff_t>(i) * d);
  }
  return out;
}

// Doll-house run used by the freeze and determinism checks: every baseline
// enabled, small enough that 90 epochs finish in seconds.
ExperimentConfig toy_full_config() {
  ExperimentConfig cfg;
  cfg.classes = 2;
  cfg.train_per_class = 3;
  cfg.val_per_class = 2;
  cfg.test_per_class = 2;
  cfg.backbone.image_size = 32;
  cfg.backbone.patch = 8;
  cfg.backbone.d_model = 16;
  cfg.backbone.n_heads = 2;
  cfg.backbone.n_blocks = 2;
  cfg.backbone.mlp_ratio = 2;
  cfg.host_bottleneck_dim = 4;
  cfg.aug_enabled = true;
  cfg.aug.m = 1;
  cfg.aug.bank_size = 4;
  cfg.subkernel_enabled = true;
  cfg.subkernel_u = 4;
  cfg.subkernel_v = 3;
  cfg.domattn_enabled = true;
  cfg.domattn_maps = 2;
  cfg.epochs = 90;
  cfg.batch = 4;
  cfg.seed = 0;
  return cfg;
}

// Benchmark scale for the ablation ladder and the map-count sweep: 8 glyph
// classes, 12 training images per class, 64x64 images. Baselines are toggled
// per variant; the defaults here are the tuned ones.
ExperimentConfig glyph_bench_config() {
  ExperimentConfig cfg;
  cfg.classes = 8;
  cfg.train_per_class = 12;
  cfg.val_per_class = 4;
  cfg.test_per_class = 12;
  cfg.backbone.image_size = 64;
  cfg.backbone.patch = 8;
  cfg.backbone.d_model = 32;
  cfg.backbone.n_heads = 4;
  cfg.backbone.n_blocks = 4;
  cfg.backbone.mlp_ratio = 2;
  cfg.host_bottleneck_dim = 8;
  cfg.aug.m = 4;
  cfg.aug.bank_size = 64;
  cfg.subkernel_u = 4;
  cfg.subkernel_v = 3;
  cfg.domattn_maps = 10;
  cfg.epochs = 30;
  cfg.batch = 8;
  cfg.lr = 3e-3;
  return cfg;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.vec().size(); ++i) {
    worst = std::max(worst, std::abs(a.vec()[i] - b.vec()[i]));
  }
  return worst;
}

// ---------------------------------------------------------------- criterion 1

Outcome criterion_1() {
  Outcome out;
  const auto t0 = Clock::now();
  std::vector<PathwayReport> reports = gradcheck_suite(kGradSeeds, kGradTol);
  const double secs = seconds_since(t0);
  bool all_pass = true;
  double worst = 0.0;
  for (const PathwayReport& r : reports) {
    all_pass = all_pass && r.pass;
    worst = std::max(worst, r.max_rel_err);
  }
  std::istringstream lines(gradcheck_report_text(reports));
  for (std::string line; std::getline(lines, line);) out.details.push_back(line);
  out.pass = all_pass && secs < kGradBudget;
  out.summary = fmt("finite-difference check of %zu pathways, %d seeds: worst rel err %.2e "
                    "(tol %.0e), %.1fs (budget %.0fs)",
                    reports.size(), kGradSeeds, worst, kGradTol, secs, kGradBudget);
  return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_2() {
  Outcome out;
  ExperimentConfig cfg = toy_full_config();
  TrainResult res = train(cfg, g_out / "freeze_run");

  // The training loop already enforces bit-identical frozen values in
  // memory; re-derive the same fact from the artifact alone.
  TaskData data = load_task_data(cfg);
  Model fresh = build_model(cfg, data.n_classes);
  int frozen_tensors = 0;
  std::int64_t mismatched = 0;
  for (const ParamEntry& e : fresh.store.entries()) {
    if (!e.frozen) continue;
    ++frozen_tensors;
    const CheckpointTensor* ct = res.state.find(e.name);
    if (ct == nullptr || ct->values.size() != e.tensor.vec().size()) {
      out.summary = "frozen tensor '" + e.name + "' missing from the checkpoint";
      return out;
    }
    for (std::size_t i = 0; i < ct->values.size(); ++i) {
      const float want = static_cast<float>(e.tensor.vec()[i]);
      if (std::bit_cast<std::uint32_t>(ct->values[i]) != std::bit_cast<std::uint32_t>(want)) {
        ++mismatched;
      }
    }
  }

  // Sub-kernels must still be exact windows of the frozen patch kernel.
  Model restored = build_model(cfg, data.n_classes);
  apply_parameters(restored, res.state);
  std::int64_t slice_mismatch = 0;
  const Tensor& kernel = restored.backbone->patch_kernel();
  const int u = cfg.subkernel_u;
  for (int t = 0; t < restored.subkernel->count(); ++t) {
    Tensor s = restored.subkernel->sub_kernel(t);
    const auto [r0, c0] = restored.subkernel->offsets[static_cast<std::size_t>(t)];
    for (int o = 0; o < cfg.backbone.d_model; ++o) {
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < u; ++y) {
          for (int x = 0; x < u; ++x) {
            if (std::bit_cast<std::uint64_t>(s.at({o, c, y, x})) !=
                std::bit_cast<std::uint64_t>(kernel.at({o, c, r0 + y, c0 + x}))) {
              ++slice_mismatch;
            }
          }
        }
      }
    }
  }

  const bool logged = res.log.find("freeze_contract=ok") != std::string::npos;
  out.pass = mismatched == 0 && slice_mismatch == 0 && logged;
  out.summary = fmt("90-epoch all-baselines run: %d frozen tensors bit-identical to init "
                    "(%lld mismatched scalars), %d sub-kernels exact windows "
                    "(%lld mismatched scalars)",
                    frozen_tensors, static_cast<long long>(mismatched),
                    restored.subkernel->count(), static_cast<long long>(slice_mismatch));
  out.details.push_back("best epoch " + std::to_string(res.best_epoch) +
                        ", best val top1 " + format_metric_value(res.best_val_metric));
  return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_3() {
  Outcome out;
  ExperimentConfig plain = toy_full_config();
  plain.epochs = 1;
  plain.aug_enabled = false;
  plain.subkernel_enabled = false;
  plain.domattn_enabled = false;
  plain.host_method = "none";

  ExperimentConfig with = plain;
  with.host_method = "bottleneck";
  with.domattn_enabled = true;

  TaskData data = load_task_data(plain);
  Model a = build_model(with, data.n_classes);
  Model b = build_model(plain, data.n_classes);

  double worst = 0.0;
  for (const Image& im : data.cval.images) {
    worst = std::max(worst, max_abs_diff(a.embed(im, false), b.embed(im, false)));
  }
  const Tensor la = classification_loss(
      a.head->logits(stack_value_embeddings(a, data.cval.images)), data.cval.labels);
  const Tensor lb = classification_loss(
      b.head->logits(stack_value_embeddings(b, data.cval.images)), data.cval.labels);
  const double loss_diff = std::abs(la.item() - lb.item());

  // Same statement under the fine-grained tokenizer.
  ExperimentConfig sub_plain = plain;
  sub_plain.subkernel_enabled = true;
  ExperimentConfig sub_with = with;
  sub_with.subkernel_enabled = true;
  Model c = build_model(sub_with, data.n_classes);
  Model d = build_model(sub_plain, data.n_classes);
  double worst_sub = 0.0;
  for (const Image& im : data.cval.images) {
    worst_sub = std::max(worst_sub, max_abs_diff(c.embed(im, false), d.embed(im, false)));
  }

  // And the tokenizer itself: a full-size single window with uniform mixing
  // reproduces the original tokenization bit for bit.
  SubKernelBank full_window = carve(b.backbone->patch_kernel(), plain.backbone.patch, 1);
  const Tensor img = image_to_tensor(data.cval.images[0]);
  TokenGrid fg = tokenize_finegrained(img, full_window, *b.backbone, false);
  TokenGrid orig = b.backbone->tokenize_original(img);
  std::int64_t token_mismatch = 0;
  for (std::size_t i = 0; i < fg.tokens.vec().size(); ++i) {
    if (std::bit_cast<std::uint64_t>(fg.tokens.vec()[i]) !=
        std::bit_cast<std::uint64_t>(orig.tokens.vec()[i])) {
      ++token_mismatch;
    }
  }

  out.pass = worst < kNoOpTol && loss_diff < kNoOpTol && worst_sub < kNoOpTol &&
             token_mismatch == 0;
  out.summary = fmt("zero-init add-ons are a no-op: embedding diff %.1e, loss diff %.1e, "
                    "fine-grained-tokenizer diff %.1e (tol %.0e); full-window tokenizer "
                    "bit-exact (%lld mismatches)",
                    worst, loss_diff, worst_sub, kNoOpTol,
                    static_cast<long long>(token_mismatch));
  return out;
}

// ---------------------------------------------------------------- criterion 4

// Brute-force log-softmax: anchors score every positive plus every bank row.
double nce_oracle(const Tensor& anchors, const Tensor& positives, const Tensor* bank_rows,
                  double sigma) {
  const int B = anchors.dim(0);
  const int d = anchors.dim(1);
  const int K = bank_rows == nullptr ? 0 : bank_rows->dim(0);
  double total = 0.0;
  for (int i = 0; i < B; ++i) {
    std::vector<double> logits;
    for (int j = 0; j < B + K; ++j) {
      const double* key = j < B ? &positives.vec()[static_cast<std::size_t>(j * d)]
                                : &bank_rows->vec()[static_cast<std::size_t>((j - B) * d)];
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += anchors.vec()[static_cast<std::size_t>(i * d + k)] * key[k];
      logits.push_back(s / sigma);
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - top);
    total += -(logits[static_cast<std::size_t>(i)] - top - std::log(denom));
  }
  return total / B;
}

Tensor unit_rows(int n, int d, Rng& rng) {
  Tensor t = Tensor::randn({n, d}, rng);
  for (int i = 0; i < n; ++i) {
    double norm = 0.0;
    for (int j = 0; j < d; ++j) {
      const double v = t.vec()[static_cast<std::size_t>(i * d + j)];
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (int j = 0; j < d; ++j) t.vec()[static_cast<std::size_t>(i * d + j)] /= norm;
  }
  return t;
}

Outcome criterion_4() {
  Outcome out;
  Rng rng(11);

  // (a) contrastive loss vs oracle for bank sizes 0..8
  double worst_nce = 0.0;
  for (int k = 0; k <= 8; ++k) {
    MemoryBank bank(32, 0.07);
    if (k > 0) bank.enqueue_detached(unit_rows(k, 6, rng));
    Tensor bank_before = k > 0 ? bank.contents() : Tensor{};
    Tensor anchors = unit_rows(3, 6, rng);
    Tensor positives = unit_rows(3, 6, rng);
    const double got = label_breaking_loss(anchors, positives, bank).item();
    const double want =
        nce_oracle(anchors, positives, k > 0 ? &bank_before : nullptr, bank.sigma());
    worst_nce = std::max(worst_nce, std::abs(got - want));
  }

  // (b) combined loss is plain arithmetic
  const Tensor task = Tensor::scalar(1.25);
  const Tensor contrast = Tensor::scalar(0.375);
  const double combined = combined_loss(task, contrast, 0.1).item();
  const bool arith_exact = combined == 1.25 + 0.1 * 0.375;

  // (c) sub-kernel mixing: normalized weights and elementwise convex hull
  std::vector<Tensor> maps;
  for (int t = 0; t < 5; ++t) maps.push_back(Tensor::randn({3, 4, 4}, rng));
  Tensor w = Tensor::randn({5}, rng);
  Tensor mixed = combine(maps, w);
  Tensor coeffs = softmax(w, 0);
  double coeff_sum = 0.0;
  for (double c : coeffs.vec()) coeff_sum += c;
  const double sum_err = std::abs(coeff_sum - 1.0);
  double hull_violation = 0.0;
  for (std::size_t e = 0; e < mixed.vec().size(); ++e) {
    double lo = maps[0].vec()[e], hi = maps[0].vec()[e];
    for (const Tensor& m : maps) {
      lo = std::min(lo, m.vec()[e]);
      hi = std::max(hi, m.vec()[e]);
    }
    hull_violation = std::max(hull_violation,
                              std::max(lo - mixed.vec()[e], mixed.vec()[e] - hi));
  }

  // (d) C identical attention maps collapse to the single-map path
  const int h = 3, dm = 8;
  Tensor shared_map = Tensor::randn({1, 2 * h, 2 * h}, rng, 0.5);
  ParameterStore s1, s5;
  AttentionMapBank one = AttentionMapBank::create(s1, 1, h, 0, 1);
  AttentionMapBank five = AttentionMapBank::create(s5, 5, h, 0, 2);
  std::copy(shared_map.vec().begin(), shared_map.vec().end(), one.maps.vec().begin());
  for (int c = 0; c < 5; ++c) {
    std::copy(shared_map.vec().begin(), shared_map.vec().end(),
              five.maps.vec().begin() + static_cast<std::ptrdiff_t>(c * 4 * h * h));
  }
  for (double& v : five.weights.vec()) v = rng.normal();  // mixing must not matter
  one.alpha.vec()[0] = 0.6;
  five.alpha.vec()[0] = 0.6;
  Tensor V = Tensor::randn({h * h, dm}, rng);
  Tensor f_bar = Tensor::randn({h * h + 1, dm}, rng);
  Tensor wo = Tensor::randn({dm, dm}, rng, 0.2);
  Tensor bo = Tensor::randn({dm}, rng, 0.2);
  const double same_maps_diff = max_abs_diff(apply_domain_attention(one, V, f_bar, wo, bo),
                                             apply_domain_attention(five, V, f_bar, wo, bo));

  // (e) window geometry vs the index oracle, exact, all tokens, h <= 8
  std::int64_t crop_mismatch = 0;
  for (int hh = 1; hh <= 8; ++hh) {
    Tensor global = Tensor::randn({2 * hh, 2 * hh}, rng);
    for (int i = 0; i < hh; ++i) {
      for (int j = 0; j < hh; ++j) {
        Tensor cropped = crop_map(global, i, j, hh);
        for (int y = 0; y < hh; ++y) {
          for (int x = 0; x < hh; ++x) {
            if (cropped.at({y, x}) != global.at({hh - i + y, hh - j + x})) ++crop_mismatch;
          }
        }
      }
    }
  }

  out.pass = worst_nce < kNceTol && arith_exact && sum_err < kMixTol &&
             hull_violation <= kMixTol && same_maps_diff < kSameMapsTol && crop_mismatch == 0;
  out.summary = fmt("loss/geometry oracles: contrastive %.1e (tol %.0e), combined exact %s, "
                    "weight-sum err %.1e / hull slack %.1e (tol %.0e), identical-maps %.1e "
                    "(tol %.0e), crop mismatches %lld",
                    worst_nce, kNceTol, arith_exact ? "yes" : "NO", sum_err, hull_violation,
                    kMixTol, same_maps_diff, kSameMapsTol,
                    static_cast<long long>(crop_mismatch));
  return out;
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion_5() {
  Outcome out;

  // The quoted large-scale example: 10 maps on a 16x16 token grid.
  ParameterStore big;
  AttentionMapBank wide = AttentionMapBank::create(big, 10, 16, 0, 3);
  const std::int64_t wide_count = big.trainable_count();
  const bool big_ok = wide.trainable_count() == 10251 && wide_count == 10251;

  ExperimentConfig cfg = toy_full_config();
  Model m = build_model(cfg, 2);
  const int d = cfg.backbone.d_model;
  const std::int64_t adapter_expect =
      static_cast<std::int64_t>(cfg.backbone.n_blocks) * (2 * d * cfg.host_bottleneck_dim + 1);
  const std::int64_t sub_expect = static_cast<std::int64_t>(cfg.subkernel_v) * cfg.subkernel_v;
  const int h = cfg.backbone.grid();
  const std::int64_t dom_expect =
      static_cast<std::int64_t>(cfg.domattn_maps) * (2 * h) * (2 * h) + cfg.domattn_maps + 1;
  const std::int64_t head_expect = static_cast<std::int64_t>(d) * 2 + 2;

  const std::int64_t adapter_got = m.store.trainable_count_with_prefix("adapter.");
  const std::int64_t sub_got = m.store.trainable_count_with_prefix("subkernel.");
  const std::int64_t dom_got = m.store.trainable_count_with_prefix("domattn.");
  const std::int64_t head_got = m.store.trainable_count_with_prefix("head.");
  const bool model_ok = adapter_got == adapter_expect && sub_got == sub_expect &&
                        dom_got == dom_expect && head_got == head_expect &&
                        m.trainable_count() ==
                            adapter_expect + sub_expect + dom_expect + head_expect;

  out.pass = big_ok && model_ok;
  out.summary = fmt("trainable counts match the formulas exactly: 10-map 16-grid bank %lld "
                    "(want 10251); adapters %lld/%lld, sub-kernel %lld/%lld, attention "
                    "%lld/%lld, head %lld/%lld",
                    static_cast<long long>(wide_count), static_cast<long long>(adapter_got),
                    static_cast<long long>(adapter_expect), static_cast<long long>(sub_got),
                    static_cast<long long>(sub_expect), static_cast<long long>(dom_got),
                    static_cast<long long>(dom_expect), static_cast<long long>(head_got),
                    static_cast<long long>(head_expect));
  return out;
}

// ---------------------------------------------------------------- criterion 6

struct OracleRetrieval {
  double r1, r5, mnr;
};

int oracle_rank(const std::vector<double>& row, int truth) {
  int rank = 1;
  for (int g = 0; g < static_cast<int>(row.size()); ++g) {
    if (g == truth) continue;
    if (row[static_cast<std::size_t>(g)] > row[static_cast<std::size_t>(truth)] ||
        (row[static_cast<std::size_t>(g)] == row[static_cast<std::size_t>(truth)] && g < truth)) {
      ++rank;
    }
  }
  return rank;
}

OracleRetrieval oracle_direction(const Tensor& s, const std::vector<int>& gt) {
  const int n = s.dim(0);
  double r1 = 0, r5 = 0, mnr = 0.0;
  for (int q = 0; q < n; ++q) {
    std::vector<double> row(s.vec().begin() + static_cast<std::ptrdiff_t>(q) * s.dim(1),
                            s.vec().begin() + static_cast<std::ptrdiff_t>(q + 1) * s.dim(1));
    const int rank = oracle_rank(row, gt[static_cast<std::size_t>(q)]);
    r1 += rank <= 1;
    r5 += rank <= 5;
    mnr += rank;
  }
  // Ranks are derived independently; the percentage arithmetic mirrors the
  // library's summation order so agreement can be demanded to the last bit.
  return {r1 * (100.0 / n), r5 * (100.0 / n), mnr / n};
}

Outcome criterion_6() {
  Outcome out;
  Rng rng(29);
  int retrieval_fail = 0, topk_fail = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_int(31));
    Tensor s = Tensor::randn({n, n}, rng);
    if (trial % 3 == 0) {
      for (double& v : s.vec()) v = std::floor(v * 2.0) / 2.0;  // force ties
    }
    std::vector<int> gt(static_cast<std::size_t>(n));
    std::iota(gt.begin(), gt.end(), 0);
    rng.shuffle(gt);

    OracleRetrieval fwd = oracle_direction(s, gt);
    RetrievalResult got = retrieval_metrics(s, gt, false);
    if (got.r_at_1 != fwd.r1 || got.r_at_5 != fwd.r5 || got.mean_rank != fwd.mnr) {
      ++retrieval_fail;
    }

    std::vector<int> inverse(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) inverse[static_cast<std::size_t>(gt[static_cast<std::size_t>(q)])] = q;
    Tensor st = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        st.vec()[static_cast<std::size_t>(j * n + i)] = s.vec()[static_cast<std::size_t>(i * n + j)];
      }
    }
    OracleRetrieval bwd = oracle_direction(st, inverse);
    RetrievalResult both = retrieval_metrics(s, gt, true);
    if (both.r_at_1 != (fwd.r1 + bwd.r1) / 2.0 || both.r_at_5 != (fwd.r5 + bwd.r5) / 2.0 ||
        both.mean_rank != (fwd.mnr + bwd.mnr) / 2.0) {
      ++retrieval_fail;
    }

    // classification scores against the same rank oracle (label = column)
    const int classes = 2 + static_cast<int>(rng.next_int(9));
    Tensor scores = Tensor::randn({n, classes}, rng);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.next_int(classes)));
    for (int k : {1, std::min(5, classes)}) {
      double hits = 0;
      for (int i = 0; i < n; ++i) {
        std::vector<double> row(scores.vec().begin() + static_cast<std::ptrdiff_t>(i) * classes,
                                scores.vec().begin() + static_cast<std::ptrdiff_t>(i + 1) * classes);
        hits += oracle_rank(row, labels[static_cast<std::size_t>(i)]) <= k;
      }
      if (topk_accuracy(scores, labels, k) != 100.0 * hits / n) ++topk_fail;
    }
  }

  // Hand case: ranks {1, 3, 10} across three queries and ten gallery items.
  Tensor hand = Tensor::from_data(
      {3, 10},
      {
          5, 1, 2, 3, 4, 0, -1, -2, -3, -4,    // truth at 0 beats everything: rank 1
          8, 6, 7, 0, 1, 2, 3, -1, -2, -3,     // truth at 1 trails 8 and 7: rank 3
          9, 8, -5, 7, 6, 5, 4, 3, 2, 1,       // truth at 2 trails all nine: rank 10
      });
  std::vector<int> hand_gt = {0, 1, 2};
  RetrievalResult hr = retrieval_metrics(hand, hand_gt, false);
  const bool hand_ok = hr.r_at_1 == 100.0 / 3.0 && hr.r_at_5 == 200.0 / 3.0 &&
                       hr.mean_rank == 14.0 / 3.0 && std::abs(hr.r_at_1 - 33.33) < 0.005 &&
                       std::abs(hr.r_at_5 - 66.67) < 0.005 &&
                       std::abs(hr.mean_rank - 4.667) < 0.0005;

  out.pass = retrieval_fail == 0 && topk_fail == 0 && hand_ok;
  out.summary = fmt("200 random matrices (n <= 32): %d retrieval and %d top-k disagreements "
                    "with the sort oracle; hand case ranks {1,3,10} -> %.2f/%.2f/%.3f %s",
                    retrieval_fail, topk_fail, hr.r_at_1, hr.r_at_5, hr.mean_rank,
                    hand_ok ? "(exact)" : "(WRONG)");
  return out;
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion_7() {
  Outcome out;
  AugmentationConfig aug;
  aug.gamma = 0.3;
  aug.tau = 0.6;
  aug.steps = 50;
  const auto [tp, tb] = timesteps(aug);
  out.pass = tp == 15 && tb == 30;
  out.summary = fmt("strength thresholds 0.3/0.6 over 50 steps -> (%d, %d), want (15, 30)",
                    tp, tb);
  return out;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion_8() {
  Outcome out;
  const ExperimentConfig base = glyph_bench_config();
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  static const std::array<const char*, 5> kVariants = {"host", "aug", "subkernel", "domattn",
                                                       "full"};
  std::map<std::string, double> mean;
  std::vector<CsvRow> rows;
  double slowest = 0.0;
  for (const char* variant : kVariants) {
    const std::string v = variant;
    double total = 0.0;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.aug_enabled = (v == "aug" || v == "full");
      cfg.subkernel_enabled = (v == "subkernel" || v == "full");
      cfg.domattn_enabled = (v == "domattn" || v == "full");
      cfg.seed = seed;
      const auto t0 = Clock::now();
      TrainResult res = train(cfg, {});
      slowest = std::max(slowest, seconds_since(t0));
      total += res.test_report.top1;
      rows.push_back({"ladder:" + v, "test", "top1", res.test_report.top1, seed});
    }
    mean[v] = total / static_cast<double>(seeds.size());
    out.details.push_back(fmt("%-10s mean test top1 %6.2f", variant, mean[v]));
  }
  fs::create_directories(g_out);
  write_text_file(g_out / "ladder.csv", metrics_csv(rows, serialize_config(base)));

  const bool gain_ok = mean["full"] >= mean["host"] + kLadderGain;
  const bool slack_ok = mean["full"] >= mean["aug"] - kLadderSlack &&
                        mean["full"] >= mean["subkernel"] - kLadderSlack &&
                        mean["full"] >= mean["domattn"] - kLadderSlack;
  const bool time_ok = slowest < kRunBudget;
  out.pass = gain_ok && slack_ok && time_ok;
  out.summary = fmt("5-seed ladder: full %.2f vs host %.2f (need +%.0f pt), singles "
                    "%.2f/%.2f/%.2f (full may trail by %.0f pt), slowest run %.0fs "
                    "(budget %.0fs)",
                    mean["full"], mean["host"], kLadderGain, mean["aug"], mean["subkernel"],
                    mean["domattn"], kLadderSlack, slowest, kRunBudget);
  return out;
}

// ---------------------------------------------------------------- criterion 9

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome criterion_9() {
  Outcome out;
  ExperimentConfig cfg = toy_full_config();
  cfg.epochs = 5;
  cfg.seed = 7;
  const fs::path a = g_out / "det_a";
  const fs::path b = g_out / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  train(cfg, a);
  train(cfg, b);
  const bool csv_same = file_bytes(a / "metrics.csv") == file_bytes(b / "metrics.csv");
  const bool ckpt_same = file_bytes(a / "checkpoint.lrva") == file_bytes(b / "checkpoint.lrva");
  const bool log_same = file_bytes(a / "train.log") == file_bytes(b / "train.log");

  evaluate_checkpoint_file(a / "checkpoint.lrva", {}, {"val", "test"}, a / "eval1");
  evaluate_checkpoint_file(a / "checkpoint.lrva", {}, {"val", "test"}, a / "eval2");
  const bool eval_same =
      file_bytes(a / "eval1" / "eval.csv") == file_bytes(a / "eval2" / "eval.csv");

  write_dataset_tree(cfg, a / "tree1");
  write_dataset_tree(cfg, a / "tree2");
  bool tree_same = true;
  for (const auto& entry : fs::recursive_directory_iterator(a / "tree1")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a / "tree1");
    tree_same = tree_same && file_bytes(entry.path()) == file_bytes(a / "tree2" / rel);
  }

  out.pass = csv_same && ckpt_same && log_same && eval_same && tree_same;
  out.summary = fmt("repeat runs byte-identical: metrics %s, checkpoint %s, log %s, "
                    "eval %s, dataset tree %s",
                    csv_same ? "yes" : "NO", ckpt_same ? "yes" : "NO", log_same ? "yes" : "NO",
                    eval_same ? "yes" : "NO", tree_same ? "yes" : "NO");
  return out;
}

// --------------------------------------------------------------- criterion 10

Outcome criterion_10() {
  Outcome out;
  out.soft = true;
  ExperimentConfig base = glyph_bench_config();
  base.domattn_enabled = true;
  const std::vector<std::string> values = {"2", "10", "20"};
  std::vector<CsvRow> rows = sweep(base, "domattn.C", values, {0, 1, 2, 3, 4}, g_out / "sweep");
  std::map<std::string, double> mean;
  for (const CsvRow& r : rows) {
    mean[r.task] += r.value / 5.0;
  }
  const double lo = mean["glyph[domattn.C=2]"];
  const double mid = mean["glyph[domattn.C=10]"];
  const double hi = mean["glyph[domattn.C=20]"];
  out.pass = mid >= lo && mid >= hi;
  out.summary = fmt("map-count sweep (val top1, 5 seeds): C=2 %.2f, C=10 %.2f, C=20 %.2f; "
                    "middle >= endpoints %s [soft criterion, reported only]",
                    lo, mid, hi, out.pass ? "yes" : "NO");
  out.details.push_back("sweep CSV written to " + (g_out / "sweep" / "sweep.csv").string());
  return out;
}

using CriterionFn = Outcome (*)();

}  // namespace
}  // namespace lrva

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (arg == "--out" && i + 1 < argc) {
      lrva::g_out = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--criterion N] [--out DIR]\n";
      return 1;
    }
  }

  static const std::array<lrva::CriterionFn, 10> criteria = {
      lrva::criterion_1, lrva::criterion_2, lrva::criterion_3, lrva::criterion_4,
      lrva::criterion_5, lrva::criterion_6, lrva::criterion_7, lrva::criterion_8,
      lrva::criterion_9, lrva::criterion_10};

  bool all_pass = true;
  for (int n = 1; n <= 10; ++n) {
    if (only != 0 && n != only) continue;
    lrva::Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    const bool hard_fail = !o.pass && !o.soft;
    std::cout << (o.pass ? "PASS" : (o.soft ? "SOFT-FAIL" : "FAIL")) << " criterion " << n
              << ": " << o.summary << "\n";
    for (const std::string& d : o.details) std::cout << "  " << d << "\n";
    all_pass = all_pass && !hard_fail;
  }
  return all_pass ? 0 : 1;
}
