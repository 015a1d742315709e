#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "ssc/core.hpp"
#include "ssc/io.hpp"
#include "ssc/tensor.hpp"

namespace ssc {

/// A labeled sample collection. Ground-truth labels are carried here for
/// evaluation and stratification only; training code receives a TrainingView,
/// which has no labels at all.
struct Dataset {
  std::string name;
  Tensor samples;           // [N, ...], values in [0, 1] for image data
  std::vector<int> labels;  // length N, values in [0, k)
  int k = 0;
  int d = 1;                // presumed subspace dimension per class

  std::size_t size() const { return samples.empty() ? 0 : samples.dim(0); }

  void validate() const {
    require(k >= 1, "Dataset: k must be >= 1");
    require(d >= 1, "Dataset: d must be >= 1");
    require(labels.size() == size(), "Dataset: labels/samples length mismatch");
    for (int l : labels) require(l >= 0 && l < k, cat("Dataset: label ", l, " out of [0,", k, ")"));
  }
};

/// What the trainer is allowed to see: samples and the cluster count.
struct TrainingView {
  Tensor samples;
  int k = 0;
};

inline Tensor select_samples(const Tensor& samples, const std::vector<std::size_t>& indices) {
  require(samples.rank() >= 2, "select_samples: need batched tensor");
  std::vector<std::size_t> shape = samples.shape();
  shape[0] = indices.size();
  Tensor out(shape, 0.0);
  const std::size_t stride = samples.numel() / samples.dim(0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] < samples.dim(0), "select_samples: index out of range");
    std::copy_n(samples.data() + indices[r] * stride, stride, out.data() + r * stride);
  }
  return out;
}

inline TrainingView make_training_view(const Dataset& ds, const std::vector<std::size_t>& indices) {
  return TrainingView{select_samples(ds.samples, indices), ds.k};
}

inline TrainingView make_training_view(const Dataset& ds) {
  return TrainingView{ds.samples, ds.k};
}

inline std::vector<int> select_labels(const std::vector<int>& labels,
                                      const std::vector<std::size_t>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic union-of-subspaces data

/// Samples class i as B_i w with B_i a seeded orthonormal basis and w standard
/// normal, plus optional Gaussian noise, plus impulsive corruption: exactly
/// round(outlier_frac * numel) distinct entries replaced by uniform draws from
/// [-outlier_mag, outlier_mag]. Samples are stored class-block ordered as an
/// [N, ambient_dim] tensor.
inline Dataset synth_subspaces(int k, int d_sub, int ambient_dim, int n_per_class,
                               double noise_sigma, double outlier_frac, double outlier_mag,
                               std::uint64_t seed) {
  require(k >= 1, "synth_subspaces: k must be >= 1");
  require(d_sub >= 1 && d_sub < ambient_dim, "synth_subspaces: need 1 <= d_sub < ambient_dim");
  require(n_per_class > d_sub, "synth_subspaces: need n_per_class > d_sub");
  require(noise_sigma >= 0.0 && outlier_frac >= 0.0 && outlier_frac <= 1.0 && outlier_mag >= 0.0,
          "synth_subspaces: bad noise/outlier parameters");

  const std::size_t n = static_cast<std::size_t>(k) * static_cast<std::size_t>(n_per_class);
  const std::size_t dim = static_cast<std::size_t>(ambient_dim);
  Dataset ds;
  ds.name = "synth";
  ds.k = k;
  ds.d = d_sub;
  ds.samples = Tensor({n, dim}, 0.0);
  ds.labels.resize(n);

  Rng basis_rng(Rng::derive(seed, 1));
  Rng coeff_rng(Rng::derive(seed, 2));
  Rng noise_rng(Rng::derive(seed, 3));
  for (int c = 0; c < k; ++c) {
    Eigen::MatrixXd G(ambient_dim, d_sub);
    for (Eigen::Index i = 0; i < G.rows(); ++i)
      for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = basis_rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd B = qr.householderQ() * Eigen::MatrixXd::Identity(ambient_dim, d_sub);

    for (int s = 0; s < n_per_class; ++s) {
      Eigen::VectorXd w(d_sub);
      for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = coeff_rng.normal();
      Eigen::VectorXd x = B * w;
      const std::size_t row = static_cast<std::size_t>(c) * n_per_class + static_cast<std::size_t>(s);
      for (std::size_t j = 0; j < dim; ++j)
        ds.samples(row, j) = x(static_cast<Eigen::Index>(j)) +
                             (noise_sigma > 0.0 ? noise_sigma * noise_rng.normal() : 0.0);
      ds.labels[row] = c;
    }
  }

  const std::size_t corrupt = static_cast<std::size_t>(
      std::llround(outlier_frac * static_cast<double>(ds.samples.numel())));
  if (corrupt > 0) {
    Rng outlier_rng(Rng::derive(seed, 4));
    std::vector<std::size_t> order(ds.samples.numel());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < corrupt; ++i) {
      const std::size_t j = i + outlier_rng.uniform_int(order.size() - i);
      std::swap(order[i], order[j]);
      ds.samples[order[i]] = outlier_rng.uniform(-outlier_mag, outlier_mag);
    }
  }
  ds.validate();
  return ds;
}

/// Tiny image dataset for the end-to-end path: each class occupies a disjoint
/// horizontal band of the image and spans a 2-dim nonnegative pattern
/// subspace inside it. Pixels are quantized to 8 bits and scaled to [0, 1].
inline Dataset synth_images(int k, int n_per_class, int image_size, std::uint64_t seed) {
  require(k >= 1 && n_per_class >= 1, "synth_images: k and n_per_class must be >= 1");
  require(image_size >= 2 * k, "synth_images: image too small for k disjoint bands");

  const std::size_t n = static_cast<std::size_t>(k) * static_cast<std::size_t>(n_per_class);
  const std::size_t hw = static_cast<std::size_t>(image_size);
  Dataset ds;
  ds.name = "synth-images";
  ds.k = k;
  ds.d = 2;
  ds.samples = Tensor({n, 1, hw, hw}, 0.0);
  ds.labels.resize(n);

  Rng pattern_rng(Rng::derive(seed, 11));
  Rng coeff_rng(Rng::derive(seed, 12));
  const std::size_t band = hw / static_cast<std::size_t>(k);
  for (int c = 0; c < k; ++c) {
    const std::size_t y0 = static_cast<std::size_t>(c) * band;
    const std::size_t y1 = (c + 1 == k) ? hw : y0 + band;
    // Two nonnegative patterns on disjoint pixel sets within the class band.
    Tensor p({hw, hw}, 0.0), q({hw, hw}, 0.0);
    for (std::size_t y = y0; y < y1; ++y)
      for (std::size_t x = 0; x < hw; ++x) {
        const double v = 0.25 + 0.75 * pattern_rng.uniform();
        if ((y + x) % 2 == 0) {
          p(y, x) = v;
        } else {
          q(y, x) = v;
        }
      }

    for (int s = 0; s < n_per_class; ++s) {
      const double a1 = 0.15 + 0.85 * coeff_rng.uniform();
      const double a2 = 0.15 + 0.85 * coeff_rng.uniform();
      const std::size_t row = static_cast<std::size_t>(c) * n_per_class + static_cast<std::size_t>(s);
      for (std::size_t y = 0; y < hw; ++y)
        for (std::size_t x = 0; x < hw; ++x) {
          const double v = std::min(1.0, a1 * p(y, x) + a2 * q(y, x));
          ds.samples(row, 0, y, x) = std::round(255.0 * v) / 255.0;
        }
      ds.labels[row] = c;
    }
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// File-backed datasets

/// IDX tensor with unsigned-byte payloads scaled to [0, 1]; float payloads
/// pass through unscaled.
inline Tensor load_idx(const std::string& path) {
  int type = 0;
  Tensor t = read_idx(path, &type);
  if (type == 0x08) {
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] /= 255.0;
  }
  return t;
}

inline Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                                int d) {
  Dataset ds;
  ds.name = std::filesystem::path(images_path).stem().string();
  Tensor imgs = load_idx(images_path);
  require(imgs.rank() >= 2, cat("idx ", images_path, ": need batched payload"));
  if (imgs.rank() == 3) imgs = imgs.reshaped({imgs.dim(0), 1, imgs.dim(1), imgs.dim(2)});
  ds.samples = std::move(imgs);
  ds.labels = read_idx_labels(labels_path);
  require(ds.labels.size() == ds.samples.dim(0),
          cat("idx: ", ds.samples.dim(0), " images vs ", ds.labels.size(), " labels"));
  int mx = 0;
  for (int l : ds.labels) mx = std::max(mx, l);
  ds.k = mx + 1;
  ds.d = d;
  ds.validate();
  return ds;
}

/// Directory of class subdirectories of grayscale images (.png or .pgm).
/// Classes and files are sorted lexicographically for determinism.
inline Dataset load_image_dir(const std::string& root, const std::string& extension, int d) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), cat("image dir ", root, " does not exist"));
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  require(!class_dirs.empty(), cat("image dir ", root, ": no class subdirectories"));

  Dataset ds;
  ds.name = fs::path(root).filename().string();
  ds.k = static_cast<int>(class_dirs.size());
  ds.d = d;

  std::vector<Tensor> images;
  for (int c = 0; c < ds.k; ++c) {
    const fs::path dir = fs::path(root) / class_dirs[static_cast<std::size_t>(c)];
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == extension)
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    require(!files.empty(),
            cat("image dir: class '", class_dirs[static_cast<std::size_t>(c)],
                "' has zero samples with extension ", extension));
    for (const std::string& f : files) {
      Tensor img = (extension == ".pgm") ? read_pgm(f) : read_png_gray(f);
      if (!images.empty())
        require(img.same_shape(images.front()),
                cat("image dir: ", f, " has size ", img.shape_string(), ", expected ",
                    images.front().shape_string(), " (uniform size required)"));
      images.push_back(std::move(img));
      ds.labels.push_back(c);
    }
  }

  const std::size_t h = images.front().dim(0), w = images.front().dim(1);
  ds.samples = Tensor({images.size(), 1, h, w}, 0.0);
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t p = 0; p < h * w; ++p) ds.samples[i * h * w + p] = images[i][p] / 255.0;
  ds.validate();
  return ds;
}

/// CSV feature matrix, one sample per row, '.' decimal separator, optional
/// non-numeric header row. Labels come from a companion file with one integer
/// per line.
inline Eigen::MatrixXd load_csv_matrix(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  bool first = true;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(cell[used])) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      require(first, cat("csv ", path, ": non-numeric cell outside header row"));
      first = false;
      continue;
    }
    first = false;
    if (!rows.empty())
      require(row.size() == rows.front().size(), cat("csv ", path, ": ragged row"));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), cat("csv ", path, ": no data rows"));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Dataset load_csv_dataset(const std::string& features_path, const std::string& labels_path,
                                int d) {
  const Eigen::MatrixXd m = load_csv_matrix(features_path);
  Dataset ds;
  ds.name = std::filesystem::path(features_path).stem().string();
  ds.samples = Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, 0.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      ds.samples(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);

  std::istringstream lines(read_text_file(labels_path));
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ds.labels.push_back(std::stoi(line));
  }
  int mx = 0;
  for (int l : ds.labels) mx = std::max(mx, l);
  ds.k = mx + 1;
  ds.d = d;
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Stratified folds

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// (a) kTrainOnFold: fold f trains, all other folds test. (b) kWithinFold:
/// fold f is split train_fraction / rest internally, per class.
enum class FoldRegime { kTrainOnFold, kWithinFold };

struct FoldPlan {
  int num_folds = 0;
  std::uint64_t seed = 0;
  FoldRegime regime = FoldRegime::kTrainOnFold;
  std::vector<Fold> folds;
};

inline FoldRegime fold_regime_from_string(const std::string& s) {
  if (s == "train-on-fold") return FoldRegime::kTrainOnFold;
  if (s == "within-fold") return FoldRegime::kWithinFold;
  fail("unknown fold regime '", s, "' (expected train-on-fold or within-fold)");
}

/// Deals each class round-robin across folds after a seeded shuffle, so
/// per-class counts across folds differ by at most one.
inline FoldPlan stratified_folds(const std::vector<int>& labels, int k, int num_folds,
                                 FoldRegime regime, double train_fraction, std::uint64_t seed) {
  require(num_folds >= 1, "stratified_folds: num_folds must be >= 1");
  require(train_fraction > 0.0 && train_fraction < 1.0 + 1e-12,
          "stratified_folds: train_fraction in (0,1]");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < k, "stratified_folds: label out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int c = 0; c < k; ++c)
    require(by_class[static_cast<std::size_t>(c)].size() >= static_cast<std::size_t>(num_folds),
            cat("stratified_folds: class ", c, " has ",
                by_class[static_cast<std::size_t>(c)].size(), " samples, fewer than ", num_folds,
                " folds"));

  // Per-class, per-fold membership.
  std::vector<std::vector<std::vector<std::size_t>>> dealt(
      static_cast<std::size_t>(num_folds),
      std::vector<std::vector<std::size_t>>(static_cast<std::size_t>(k)));
  for (int c = 0; c < k; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    Rng rng(Rng::derive(seed, 0xF01D0000ull + static_cast<std::uint64_t>(c)));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    for (std::size_t i = 0; i < idx.size(); ++i)
      dealt[i % static_cast<std::size_t>(num_folds)][static_cast<std::size_t>(c)].push_back(idx[i]);
  }

  FoldPlan plan;
  plan.num_folds = num_folds;
  plan.seed = seed;
  plan.regime = regime;
  plan.folds.resize(static_cast<std::size_t>(num_folds));
  for (int f = 0; f < num_folds; ++f) {
    Fold& fold = plan.folds[static_cast<std::size_t>(f)];
    if (regime == FoldRegime::kTrainOnFold) {
      for (int c = 0; c < k; ++c)
        for (std::size_t i : dealt[static_cast<std::size_t>(f)][static_cast<std::size_t>(c)])
          fold.train.push_back(i);
      for (int g = 0; g < num_folds; ++g) {
        if (g == f) continue;
        for (int c = 0; c < k; ++c)
          for (std::size_t i : dealt[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)])
            fold.test.push_back(i);
      }
    } else {
      for (int c = 0; c < k; ++c) {
        const auto& members = dealt[static_cast<std::size_t>(f)][static_cast<std::size_t>(c)];
        const std::size_t n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < members.size(); ++i)
          (i < n_train ? fold.train : fold.test).push_back(members[i]);
      }
      require(!fold.test.empty(),
              cat("stratified_folds: fold ", f, " has no test samples at train_fraction ",
                  train_fraction));
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.test.begin(), fold.test.end());
    require(!fold.train.empty(), cat("stratified_folds: fold ", f, " has no train samples"));
  }
  return plan;
}

}  // namespace ssc
