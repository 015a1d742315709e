#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "ssc/affinity.hpp"
#include "ssc/eigs.hpp"
#include "ssc/losses.hpp"

namespace ssc {

struct KMeansConfig {
  int k = 0;
  int max_iter = 300;
  int restarts = 20;
  double tol = 1e-10;
  std::uint64_t seed = 0;

  void validate() const {
    require(k >= 1, "KMeansConfig: k must be >= 1");
    require(max_iter >= 1, "KMeansConfig: max_iter must be >= 1");
    require(restarts >= 1, "KMeansConfig: restarts must be >= 1");
  }
};

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x d, row per cluster
  double inertia = std::numeric_limits<double>::infinity();
  int best_restart = -1;
};

namespace detail {

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& X, int k, Rng& rng) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd centers(k, X.cols());
  centers.row(0) = X.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (X.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2(i);
        if (r <= 0.0) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = X.row(pick);
    d2 = d2.cwiseMin((X.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

struct LloydOutcome {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
};

inline LloydOutcome lloyd(const Eigen::MatrixXd& X, Eigen::MatrixXd centers,
                          const KMeansConfig& cfg) {
  const Eigen::Index n = X.rows();
  const int k = cfg.k;
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd dist_to_own(n);

  for (int it = 0; it < cfg.max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (X.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (X.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist_to_own(i) = best_d;
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += X.row(i);
      counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    double moved = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        Eigen::RowVectorXd nc = sums.row(c) / counts(c);
        moved = std::max(moved, (nc - centers.row(c)).norm());
        centers.row(c) = nc;
      } else {
        // Re-seed an emptied cluster at the point farthest from its centroid.
        Eigen::Index far = 0;
        dist_to_own.maxCoeff(&far);
        centers.row(c) = X.row(far);
        dist_to_own(far) = 0.0;
        moved = std::numeric_limits<double>::infinity();
      }
    }
    if (!changed && moved <= cfg.tol) break;
  }

  LloydOutcome out;
  out.labels = std::move(labels);
  out.centroids = std::move(centers);
  for (Eigen::Index i = 0; i < n; ++i)
    out.inertia += (X.row(i) - out.centroids.row(out.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return out;
}

}  // namespace detail

/// Seeded k-means over row points: k-means++ starts, Lloyd refinement, best
/// inertia over restarts (first restart wins ties).
inline KMeansResult kmeans(const Eigen::MatrixXd& X, const KMeansConfig& cfg) {
  cfg.validate();
  require(X.rows() >= cfg.k, "kmeans: fewer points than clusters");
  require(X.allFinite(), "kmeans: non-finite input");
  KMeansResult best;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(r)));
    detail::LloydOutcome o = detail::lloyd(X, detail::kmeanspp_init(X, cfg.k, rng), cfg);
    if (o.inertia < best.inertia) {
      best.labels = std::move(o.labels);
      best.centroids = std::move(o.centroids);
      best.inertia = o.inertia;
      best.best_restart = r;
    }
  }
  return best;
}

struct SpectralConfig {
  int k = 0;
  EigOptions eig;
  int kmeans_restarts = 20;
  int kmeans_max_iter = 300;
  std::uint64_t seed = 0;

  void validate() const { require(k >= 1, "SpectralConfig: k must be >= 1"); }
};

struct SpectralResult {
  std::vector<int> labels;
  Eigen::MatrixXd embedding;   // row-normalized eigenvector rows, n x k
  Eigen::VectorXd eigenvalues; // k smallest Laplacian eigenvalues
};

/// Spectral clustering of a nonnegative symmetric affinity: embed each node
/// in the k smallest eigenvectors of the normalized Laplacian, normalize the
/// rows, and run k-means on them.
inline SpectralResult spectral_clustering(const Eigen::MatrixXd& A, const SpectralConfig& cfg) {
  cfg.validate();
  require(A.rows() == A.cols(), "spectral_clustering: affinity must be square");
  require(A.rows() >= cfg.k, "spectral_clustering: fewer nodes than clusters");

  const Eigen::MatrixXd L = normalized_laplacian(A);
  const EigResult e = smallest_eigs(L, cfg.k, cfg.eig);

  SpectralResult out;
  out.eigenvalues = e.values;
  out.embedding = e.vectors;
  for (Eigen::Index i = 0; i < out.embedding.rows(); ++i) {
    const double nrm = out.embedding.row(i).norm();
    if (nrm > 1e-12) out.embedding.row(i) /= nrm;
  }

  KMeansConfig km;
  km.k = cfg.k;
  km.restarts = cfg.kmeans_restarts;
  km.max_iter = cfg.kmeans_max_iter;
  km.seed = Rng::derive(cfg.seed, 0x6b6d65616e73ULL);
  out.labels = kmeans(out.embedding, km).labels;
  return out;
}

/// Spectral clustering of a learned representation matrix through its
/// symmetric affinity.
inline SpectralResult spectral_clustering_from_c(const Eigen::MatrixXd& C,
                                                 const SpectralConfig& cfg) {
  return spectral_clustering(symmetric_affinity(C), cfg);
}

}  // namespace ssc
