#include "lrva/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lrva {

namespace {

struct Binding {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

int parse_int(const std::string& v) {
  std::size_t used = 0;
  const long long x = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("config: bad integer '" + v + "'");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t used = 0;
  const unsigned long long x = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("config: bad integer '" + v + "'");
  return x;
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("config: bad number '" + v + "'");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

#define LRVA_INT_KEY(name, field)                                              \
  Binding {                                                                    \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_int(v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }      \
  }
#define LRVA_DOUBLE_KEY(name, field)                                              \
  Binding {                                                                       \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_double(v); }, \
        [](const ExperimentConfig& c) { return format_double(c.field); }          \
  }
#define LRVA_BOOL_KEY(name, field)                                              \
  Binding {                                                                     \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
        [](const ExperimentConfig& c) { return c.field ? "true" : "false"; }    \
  }
#define LRVA_STRING_KEY(name, field)                                    \
  Binding {                                                             \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = v; }, \
        [](const ExperimentConfig& c) { return c.field; }               \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> kBindings = {
      LRVA_STRING_KEY("task.kind", task),
      LRVA_STRING_KEY("task.root", data_root),
      LRVA_INT_KEY("task.classes", classes),
      LRVA_INT_KEY("task.train_per_class", train_per_class),
      LRVA_INT_KEY("task.val_per_class", val_per_class),
      LRVA_INT_KEY("task.test_per_class", test_per_class),
      LRVA_INT_KEY("task.train_pairs", train_pairs),
      LRVA_INT_KEY("task.val_pairs", val_pairs),
      LRVA_INT_KEY("task.test_pairs", test_pairs),
      LRVA_DOUBLE_KEY("task.sigma", task_sigma),
      LRVA_BOOL_KEY("task.bidirectional", bidirectional),
      LRVA_INT_KEY("backbone.image_size", backbone.image_size),
      LRVA_INT_KEY("backbone.patch", backbone.patch),
      LRVA_INT_KEY("backbone.d_model", backbone.d_model),
      LRVA_INT_KEY("backbone.n_heads", backbone.n_heads),
      LRVA_INT_KEY("backbone.n_blocks", backbone.n_blocks),
      LRVA_INT_KEY("backbone.mlp_ratio", backbone.mlp_ratio),
      LRVA_STRING_KEY("host.method", host_method),
      LRVA_INT_KEY("host.bottleneck_dim", host_bottleneck_dim),
      LRVA_INT_KEY("host.rank", host_rank),
      LRVA_BOOL_KEY("aug.enabled", aug_enabled),
      LRVA_DOUBLE_KEY("aug.gamma", aug.gamma),
      LRVA_DOUBLE_KEY("aug.tau", aug.tau),
      LRVA_INT_KEY("aug.steps", aug.steps),
      LRVA_INT_KEY("aug.m", aug.m),
      LRVA_STRING_KEY("aug.generator", aug.generator_kind),
      LRVA_DOUBLE_KEY("aug.lambda", aug.lambda),
      LRVA_DOUBLE_KEY("aug.sigma", aug.sigma),
      LRVA_INT_KEY("aug.bank_size", aug.bank_size),
      LRVA_BOOL_KEY("subkernel.enabled", subkernel_enabled),
      LRVA_INT_KEY("subkernel.u", subkernel_u),
      LRVA_INT_KEY("subkernel.v", subkernel_v),
      LRVA_BOOL_KEY("subkernel.stride1", subkernel_stride1),
      LRVA_BOOL_KEY("domattn.enabled", domattn_enabled),
      LRVA_INT_KEY("domattn.C", domattn_maps),
      LRVA_INT_KEY("domattn.block", domattn_block),
      LRVA_DOUBLE_KEY("optim.lr", lr),
      LRVA_DOUBLE_KEY("optim.beta1", beta1),
      LRVA_DOUBLE_KEY("optim.beta2", beta2),
      LRVA_DOUBLE_KEY("optim.eps", adam_eps),
      LRVA_INT_KEY("train.epochs", epochs),
      LRVA_INT_KEY("train.batch", batch),
      LRVA_INT_KEY("probe.steps", probe_steps),
      LRVA_DOUBLE_KEY("probe.lr", probe_lr),
      Binding{"seed",
              [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64(v); },
              [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
  };
  return kBindings;
}

#undef LRVA_INT_KEY
#undef LRVA_DOUBLE_KEY
#undef LRVA_BOOL_KEY
#undef LRVA_STRING_KEY

const Binding& find_binding(const std::string& key) {
  for (const Binding& b : bindings()) {
    if (key == b.key) return b;
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (task != "glyph" && task != "maps" && task != "lite_classification" &&
      task != "lite_retrieval") {
    throw std::invalid_argument("config: unknown task '" + task + "'");
  }
  if ((task == "lite_classification" || task == "lite_retrieval") && data_root.empty()) {
    throw std::invalid_argument("config: task.root required for lite_* tasks");
  }
  backbone.validate();
  if (task == "glyph" && classes < 2) {
    throw std::invalid_argument("config: need at least 2 classes");
  }
  if (host_method != "none" && host_method != "bottleneck" && host_method != "lowrank" &&
      host_method != "probe") {
    throw std::invalid_argument("config: unknown host.method '" + host_method + "'");
  }
  if (host_method == "bottleneck" && host_bottleneck_dim < 1) {
    throw std::invalid_argument("config: host.bottleneck_dim must be >= 1");
  }
  if (host_method == "lowrank" && host_rank < 1) {
    throw std::invalid_argument("config: host.rank must be >= 1");
  }
  if (host_method == "probe" && !is_classification()) {
    throw std::invalid_argument("config: the linear probe needs a classification task");
  }
  if (aug_enabled) {
    aug.validate();
    if (!is_classification()) {
      throw std::invalid_argument(
          "config: the generated-data baseline is wired for classification tasks only");
    }
    if (aug.generator_kind == "manifest" && data_root.empty()) {
      throw std::invalid_argument("config: manifest generator needs task.root");
    }
  }
  if (subkernel_enabled) {
    if (subkernel_u < 1 || subkernel_u > backbone.patch) {
      throw std::invalid_argument("config: subkernel.u must be in [1, patch]");
    }
    if (subkernel_v < 1) throw std::invalid_argument("config: subkernel.v must be >= 1");
    if (backbone.image_size % subkernel_u != 0) {
      throw std::invalid_argument("config: image_size must be divisible by subkernel.u");
    }
    const int p = backbone.image_size / subkernel_u;
    if (p != 2 * backbone.grid()) {
      throw std::invalid_argument(
          "config: sub-kernel grid must pool 2:1 onto the backbone grid "
          "(need image_size/u == 2*image_size/patch, got p=" +
          std::to_string(p) + ")");
    }
  }
  if (domattn_enabled) {
    if (domattn_maps < 1) throw std::invalid_argument("config: domattn.C must be >= 1");
    const int block = resolved_domattn_block();
    if (block < 0 || block >= backbone.n_blocks) {
      throw std::invalid_argument("config: domattn.block out of range");
    }
  }
  if (lr <= 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || adam_eps <= 0.0) {
    throw std::invalid_argument("config: bad optimizer settings");
  }
  if (epochs < 1) throw std::invalid_argument("config: train.epochs must be >= 1");
  if (batch < 1) throw std::invalid_argument("config: train.batch must be >= 1");
  if (probe_steps < 1 || probe_lr <= 0.0) throw std::invalid_argument("config: bad probe settings");
  if (task_sigma <= 0.0) throw std::invalid_argument("config: task.sigma must be > 0");
  if (!is_classification()) {
    if (train_pairs < 2 || val_pairs < 2 || test_pairs < 2) {
      throw std::invalid_argument("config: retrieval needs at least 2 pairs per split");
    }
    if (batch < 2) {
      throw std::invalid_argument("config: retrieval training needs train.batch >= 2");
    }
  } else if (train_per_class < 1 || val_per_class < 1 || test_per_class < 1) {
    throw std::invalid_argument("config: per-class counts must be >= 1");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not key=value: '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    find_binding(key).set(cfg, value);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("config: override must be key=value, got '" + assignment + "'");
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  find_binding(key).set(cfg, value);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const Binding& b : bindings()) {
    out += std::string(b.key) + "=" + b.get(cfg) + "\n";
  }
  return out;
}

}  // namespace lrva
