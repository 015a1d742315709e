#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ssc/core.hpp"
#include "ssc/dataset.hpp"
#include "ssc/eigs.hpp"
#include "ssc/io.hpp"
#include "ssc/layers.hpp"
#include "ssc/optimizer.hpp"
#include "ssc/self_expression.hpp"

namespace ssc {

/// One parsed config value: bool, number, string, or number list.
using ConfigValue = std::variant<bool, double, std::string, std::vector<double>>;

/// Flat key = value map with consumption tracking, so unconsumed (unknown)
/// keys can be rejected by name.
class ConfigMap {
 public:
  void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    const ConfigValue& v = values_.at(key);
    require(std::holds_alternative<std::string>(v), cat("config key '", key, "' must be a string"));
    return std::get<std::string>(v);
  }

  double get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    const ConfigValue& v = values_.at(key);
    require(std::holds_alternative<double>(v), cat("config key '", key, "' must be a number"));
    return std::get<double>(v);
  }

  long long get_int(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const double d = get_double(key, 0.0);
    require(d == std::floor(d), cat("config key '", key, "' must be an integer"));
    return static_cast<long long>(d);
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    const ConfigValue& v = values_.at(key);
    require(std::holds_alternative<bool>(v), cat("config key '", key, "' must be true or false"));
    return std::get<bool>(v);
  }

  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
    if (!has(key)) return fallback;
    consumed_.insert(key);
    const ConfigValue& v = values_.at(key);
    require(std::holds_alternative<std::vector<double>>(v),
            cat("config key '", key, "' must be a list of numbers"));
    std::vector<int> out;
    for (double d : std::get<std::vector<double>>(v)) {
      require(d == std::floor(d), cat("config key '", key, "' must hold integers"));
      out.push_back(static_cast<int>(d));
    }
    return out;
  }

  void reject_unconsumed() const {
    for (const auto& [key, value] : values_)
      require(consumed_.count(key) != 0, cat("unknown config key '", key, "'"));
  }

  /// Stable serialization used for the run-manifest hash.
  std::string canonical_string() const {
    std::string s;
    for (const auto& [key, value] : values_) {
      s += key;
      s += '=';
      if (std::holds_alternative<bool>(value)) {
        s += std::get<bool>(value) ? "true" : "false";
      } else if (std::holds_alternative<double>(value)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(value));
        s += buf;
      } else if (std::holds_alternative<std::string>(value)) {
        s += std::get<std::string>(value);
      } else {
        for (double d : std::get<std::vector<double>>(value)) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.17g,", d);
          s += buf;
        }
      }
      s += '\n';
    }
    return s;
  }

 private:
  std::map<std::string, ConfigValue> values_;
  std::set<std::string> consumed_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline ConfigValue parse_config_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  require(!v.empty(), cat("config line ", line_no, ": empty value"));
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    require(v.size() >= 2 && v.back() == '"',
            cat("config line ", line_no, ": unterminated string"));
    return v.substr(1, v.size() - 2);
  }
  if (v.front() == '[') {
    require(v.back() == ']', cat("config line ", line_no, ": unterminated list"));
    std::vector<double> items;
    std::string body = v.substr(1, v.size() - 2);
    std::size_t pos = 0;
    while (pos < body.size()) {
      std::size_t comma = body.find(',', pos);
      if (comma == std::string::npos) comma = body.size();
      const std::string item = trim(body.substr(pos, comma - pos));
      if (!item.empty()) {
        try {
          std::size_t used = 0;
          items.push_back(std::stod(item, &used));
          require(used == item.size(), "");
        } catch (const std::exception&) {
          fail("config line ", line_no, ": bad list element '", item, "'");
        }
      }
      pos = comma + 1;
    }
    return items;
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    require(used == v.size(), "");
    return d;
  } catch (const std::exception&) {
    fail("config line ", line_no, ": bad value '", v, "' (strings need quotes)");
  }
}

}  // namespace detail

/// Parses the flat key = value format: one assignment per line, `#` comments,
/// quoted strings, numbers, booleans, and [n, n, ...] number lists.
inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line.resize(i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, cat("config line ", line_no, ": expected key = value"));
    const std::string key = detail::trim(line.substr(0, eq));
    require(!key.empty(), cat("config line ", line_no, ": empty key"));
    map.set(key, detail::parse_config_value(line.substr(eq + 1), line_no));
  }
  return map;
}

inline ConfigMap parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

/// Applies one `key=value` command-line override using the config value
/// grammar (bare words are treated as strings for convenience).
inline void apply_override(ConfigMap& map, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  require(eq != std::string::npos, cat("override '", assignment, "': expected key=value"));
  const std::string key = detail::trim(assignment.substr(0, eq));
  const std::string raw = detail::trim(assignment.substr(eq + 1));
  require(!key.empty() && !raw.empty(), cat("override '", assignment, "': empty key or value"));
  try {
    map.set(key, detail::parse_config_value(raw, 0));
  } catch (const Error&) {
    map.set(key, raw);  // bare string
  }
}

/// Full experiment record: dataset source, architecture, objective, schedule,
/// folds, and reporting options.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // dataset source
  std::string dataset = "synth";  // synth | synth-images | idx | image-dir | csv
  int k = 3;
  int d = 4;
  std::uint64_t data_seed = 7;
  int synth_ambient = 30;
  int synth_per_class = 50;
  double synth_noise = 0.0;
  double synth_outlier_frac = 0.0;
  double synth_outlier_mag = 0.0;
  int synth_image_size = 16;
  std::string idx_images, idx_labels;
  std::string image_dir;
  std::string image_ext = ".png";
  std::string csv_path, csv_labels;

  // architecture (empty channel list = identity encoder for shallow runs)
  std::vector<int> conv_channels;
  std::vector<int> conv_kernels;
  std::vector<int> conv_strides;
  Padding conv_padding = Padding::kSame;

  // objective
  SxError error = SxError::kCim;
  SxReg reg = SxReg::kBd;
  LossWeights weights;
  std::string sigma_mode = "median";  // median | fixed
  double sigma_value = 1.0;
  CimConfig::Distance cim_distance = CimConfig::Distance::kSquaredEuclidean;
  DegreeMode degree_mode = DegreeMode::kFull;
  EigMethod eig_method = EigMethod::kAuto;
  PostprocessConfig pp;

  // schedule
  int ae_epochs = 0;
  int dsc_epochs = 0;
  int t_max = 0;
  int t0 = 1;
  int warmup = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr_start = 1e-3;
  double lr_min = 1e-6;
  int plateau_patience = 20;
  double plateau_factor = 0.5;
  double plateau_min_delta = 1e-5;
  int early_stop_patience = 60;
  double early_stop_min_delta = 1e-5;

  // folds
  int num_folds = 1;
  FoldRegime fold_regime = FoldRegime::kTrainOnFold;
  double train_fraction = 0.7;

  // misc
  int kmeans_restarts = 20;
  bool fixed_timing = false;

  std::uint64_t config_hash = 0;

  void validate() const {
    require(k >= 1, "config: k must be >= 1");
    require(d >= 1, "config: d must be >= 1");
    require(warmup >= 0, "config: warmup must be >= 0");
    require(t0 >= 1, "config: t0 must be >= 1");
    require(t_max >= 0 && ae_epochs >= 0 && dsc_epochs >= 0, "config: epoch budgets must be >= 0");
    require(lr_min <= lr_start, "config: lr_min must be <= lr_start");
    require(lr_min > 0.0, "config: lr_min must be > 0");
    require(num_folds >= 1, "config: num_folds must be >= 1");
    require(conv_channels.size() == conv_kernels.size() &&
                conv_channels.size() == conv_strides.size(),
            "config: conv_channels/conv_kernels/conv_strides lengths differ");
    require(sigma_mode == "median" || sigma_mode == "fixed",
            "config: sigma_mode must be median or fixed");
    if (sigma_mode == "fixed") require(sigma_value > 0.0, "config: sigma_value must be > 0");
    weights.validate();
    pp.validate();
  }

  CimConfig cim_config(double sigma) const {
    CimConfig c;
    c.sigma = sigma;
    c.distance = cim_distance;
    return c;
  }

  EigOptions eig_options() const {
    EigOptions e;
    e.method = eig_method;
    return e;
  }

  SelfExpressionConfig sx_config(double sigma) const {
    SelfExpressionConfig s;
    s.error = error;
    s.reg = reg;
    s.gamma = weights.gamma;
    s.cim = cim_config(sigma);
    s.k = k;
    s.degree_mode = degree_mode;
    s.eig.method = eig_method;
    return s;
  }
};

inline SxError sx_error_from_string(const std::string& s) {
  if (s == "cim") return SxError::kCim;
  if (s == "mse") return SxError::kMse;
  fail("unknown error measure '", s, "' (expected cim or mse)");
}

inline SxReg sx_reg_from_string(const std::string& s) {
  if (s == "bd") return SxReg::kBd;
  if (s == "l2") return SxReg::kL2;
  fail("unknown regularizer '", s, "' (expected bd or l2)");
}

inline const char* sx_error_name(SxError e) { return e == SxError::kCim ? "cim" : "mse"; }
inline const char* sx_reg_name(SxReg r) { return r == SxReg::kBd ? "bd" : "l2"; }

/// Builds the config from a parsed map, consuming every key it understands
/// and rejecting the rest by name.
inline ExperimentConfig config_from_map(ConfigMap map) {
  ExperimentConfig c;
  c.name = map.get_string("name", c.name);
  c.out_dir = map.get_string("out_dir", c.out_dir);
  c.seed = static_cast<std::uint64_t>(map.get_int("seed", 1));

  c.dataset = map.get_string("dataset", c.dataset);
  c.k = static_cast<int>(map.get_int("k", c.k));
  c.d = static_cast<int>(map.get_int("d", c.d));
  c.data_seed = static_cast<std::uint64_t>(map.get_int("data_seed", 7));
  c.synth_ambient = static_cast<int>(map.get_int("synth_ambient", c.synth_ambient));
  c.synth_per_class = static_cast<int>(map.get_int("synth_per_class", c.synth_per_class));
  c.synth_noise = map.get_double("synth_noise", c.synth_noise);
  c.synth_outlier_frac = map.get_double("synth_outlier_frac", c.synth_outlier_frac);
  c.synth_outlier_mag = map.get_double("synth_outlier_mag", c.synth_outlier_mag);
  c.synth_image_size = static_cast<int>(map.get_int("synth_image_size", c.synth_image_size));
  c.idx_images = map.get_string("idx_images", "");
  c.idx_labels = map.get_string("idx_labels", "");
  c.image_dir = map.get_string("image_dir", "");
  c.image_ext = map.get_string("image_ext", c.image_ext);
  c.csv_path = map.get_string("csv_path", "");
  c.csv_labels = map.get_string("csv_labels", "");

  c.conv_channels = map.get_int_list("conv_channels", {});
  c.conv_kernels = map.get_int_list("conv_kernels", {});
  c.conv_strides = map.get_int_list("conv_strides", {});
  const std::string pad = map.get_string("conv_padding", "same");
  require(pad == "same" || pad == "valid", "config: conv_padding must be same or valid");
  c.conv_padding = pad == "same" ? Padding::kSame : Padding::kValid;

  c.error = sx_error_from_string(map.get_string("error", "cim"));
  c.reg = sx_reg_from_string(map.get_string("reg", "bd"));
  c.weights.lambda1 = map.get_double("lambda1", 1.0);
  c.weights.lambda2 = map.get_double("lambda2", 1.0);
  c.weights.lambda3 = map.get_double("lambda3", 1.0);
  c.weights.lambda4 = map.get_double("lambda4", 1.0);
  c.weights.lambda5 = map.get_double("lambda5", 1.0);
  c.weights.lambda6 = map.get_double("lambda6", 1.0);
  c.weights.gamma = map.get_double("gamma", 1.0);
  c.sigma_mode = map.get_string("sigma_mode", c.sigma_mode);
  c.sigma_value = map.get_double("sigma_value", c.sigma_value);
  const std::string dist = map.get_string("cim_distance", "squared");
  require(dist == "squared" || dist == "euclidean",
          "config: cim_distance must be squared or euclidean");
  c.cim_distance = dist == "squared" ? CimConfig::Distance::kSquaredEuclidean
                                     : CimConfig::Distance::kEuclidean;
  const std::string dm = map.get_string("degree_mode", "full");
  require(dm == "full" || dm == "frozen", "config: degree_mode must be full or frozen");
  c.degree_mode = dm == "full" ? DegreeMode::kFull : DegreeMode::kFrozen;
  const std::string em = map.get_string("eig_method", "auto");
  if (em == "auto") {
    c.eig_method = EigMethod::kAuto;
  } else if (em == "dense") {
    c.eig_method = EigMethod::kDense;
  } else if (em == "lanczos") {
    c.eig_method = EigMethod::kLanczos;
  } else {
    fail("config: eig_method must be auto, dense, or lanczos");
  }
  c.pp.keep_ratio = map.get_double("pp_keep_ratio", 1.0);
  c.pp.svd_rank = static_cast<int>(map.get_int("pp_rank", 0));

  c.ae_epochs = static_cast<int>(map.get_int("ae_epochs", 0));
  c.dsc_epochs = static_cast<int>(map.get_int("dsc_epochs", 0));
  c.t_max = static_cast<int>(map.get_int("t_max", 0));
  c.t0 = static_cast<int>(map.get_int("t0", 1));
  c.warmup = static_cast<int>(map.get_int("warmup", 0));
  c.optimizer = optimizer_kind_from_string(map.get_string("optimizer", "adam"));
  c.lr_start = map.get_double("lr_start", c.lr_start);
  c.lr_min = map.get_double("lr_min", c.lr_min);
  c.plateau_patience = static_cast<int>(map.get_int("plateau_patience", c.plateau_patience));
  c.plateau_factor = map.get_double("plateau_factor", c.plateau_factor);
  c.plateau_min_delta = map.get_double("plateau_min_delta", c.plateau_min_delta);
  c.early_stop_patience =
      static_cast<int>(map.get_int("early_stop_patience", c.early_stop_patience));
  c.early_stop_min_delta = map.get_double("early_stop_min_delta", c.early_stop_min_delta);

  c.num_folds = static_cast<int>(map.get_int("num_folds", c.num_folds));
  c.fold_regime = fold_regime_from_string(map.get_string("fold_regime", "train-on-fold"));
  c.train_fraction = map.get_double("train_fraction", c.train_fraction);

  c.kmeans_restarts = static_cast<int>(map.get_int("kmeans_restarts", c.kmeans_restarts));
  c.fixed_timing = map.get_bool("fixed_timing", false);

  map.reject_unconsumed();
  c.config_hash = fnv1a(map.canonical_string());
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  ConfigMap map = parse_config_file(path);
  for (const std::string& o : overrides) apply_override(map, o);
  return config_from_map(map);
}

/// Materializes the configured dataset source.
inline Dataset load_dataset(const ExperimentConfig& c) {
  if (c.dataset == "synth") {
    Dataset ds = synth_subspaces(c.k, c.d, c.synth_ambient, c.synth_per_class, c.synth_noise,
                                 c.synth_outlier_frac, c.synth_outlier_mag, c.data_seed);
    ds.name = c.name;
    return ds;
  }
  if (c.dataset == "synth-images") {
    Dataset ds = synth_images(c.k, c.synth_per_class, c.synth_image_size, c.data_seed);
    ds.name = c.name;
    return ds;
  }
  if (c.dataset == "idx") {
    require(!c.idx_images.empty() && !c.idx_labels.empty(),
            "config: idx dataset needs idx_images and idx_labels");
    return load_idx_dataset(c.idx_images, c.idx_labels, c.d);
  }
  if (c.dataset == "image-dir") {
    require(!c.image_dir.empty(), "config: image-dir dataset needs image_dir");
    return load_image_dir(c.image_dir, c.image_ext, c.d);
  }
  if (c.dataset == "csv") {
    require(!c.csv_path.empty() && !c.csv_labels.empty(),
            "config: csv dataset needs csv_path and csv_labels");
    return load_csv_dataset(c.csv_path, c.csv_labels, c.d);
  }
  fail("unknown dataset kind '", c.dataset, "'");
}

}  // namespace ssc
