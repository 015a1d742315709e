#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ssc/affinity.hpp"
#include "ssc/block_diagonal.hpp"
#include "ssc/eigs.hpp"
#include "ssc/evaluate.hpp"
#include "ssc/grad_check.hpp"
#include "ssc/hungarian.hpp"
#include "ssc/pseudo_labels.hpp"
#include "ssc/spectral.hpp"

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  ssc::Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

// Affinity of two disjoint all-ones blocks of the given sizes.
Eigen::MatrixXd two_blocks(Eigen::Index a, Eigen::Index b) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(a + b, a + b);
  A.topLeftCorner(a, a).setOnes();
  A.bottomRightCorner(b, b).setOnes();
  return A;
}

// Complete-graph affinity without self-loops.
Eigen::MatrixXd complete_graph(Eigen::Index n) {
  return Eigen::MatrixXd::Ones(n, n) - Eigen::MatrixXd::Identity(n, n);
}

// Random connected nonnegative affinity: sparse random weights over a ring.
Eigen::MatrixXd random_affinity(Eigen::Index n, std::uint64_t seed) {
  ssc::Rng rng(seed);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.08) A(i, j) = A(j, i) = rng.uniform();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    A(i, j) = A(j, i) = 0.5;
  }
  return A;
}

double brute_force_min_cost(const Eigen::MatrixXd& cost) {
  std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < cost.rows(); ++i) acc += cost(i, perm[std::size_t(i)]);
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& assign) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) acc += cost(i, assign[std::size_t(i)]);
  return acc;
}

}  // namespace

TEST_CASE("symmetric affinity and Laplacian ground cases", "[spectral][affinity]") {
  // C = 0: empty graph, Laplacian is the identity
  const Eigen::MatrixXd A0 = ssc::symmetric_affinity(Eigen::MatrixXd::Zero(4, 4));
  REQUIRE(A0.norm() == 0.0);
  const Eigen::MatrixXd L0 = ssc::normalized_laplacian(A0);
  REQUIRE((L0 - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);

  Eigen::MatrixXd C(2, 2);
  C << 0.0, 4.0, -2.0, 0.0;
  const Eigen::MatrixXd A = ssc::symmetric_affinity(C);
  REQUIRE(A(0, 1) == 3.0);  // (|4| + |-2|) / 2
  REQUIRE(A(1, 0) == 3.0);
  REQUIRE(A(0, 0) == 0.0);
}

TEST_CASE("disconnected blocks give a two-dimensional Laplacian nullspace", "[spectral][affinity]") {
  const Eigen::MatrixXd L = ssc::normalized_laplacian(two_blocks(2, 2));
  const ssc::EigResult e = ssc::dense_smallest_eigs(L, 4);
  REQUIRE(std::abs(e.values(0)) < 1e-12);
  REQUIRE(std::abs(e.values(1)) < 1e-12);
  REQUIRE(e.values(2) > 0.5);  // spectral gap separates the component count
}

TEST_CASE("normalized Laplacian spectrum stays in [0, 2]", "[spectral][affinity]") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Eigen::MatrixXd A = ssc::symmetric_affinity(random_matrix(12, 12, seed));
    REQUIRE((A - A.transpose()).norm() < 1e-14);
    const Eigen::MatrixXd L = ssc::normalized_laplacian(A);
    REQUIRE((L - L.transpose()).norm() == 0.0);
    const ssc::EigResult e = ssc::dense_smallest_eigs(L, 12);
    REQUIRE(e.values(0) > -1e-10);
    REQUIRE(e.values(11) < 2.0 + 1e-10);
  }
}

TEST_CASE("isolated nodes sit at eigenvalue one", "[spectral][affinity]") {
  Eigen::MatrixXd A = two_blocks(2, 2);
  A.conservativeResize(5, 5);
  A.row(4).setZero();
  A.col(4).setZero();
  const Eigen::MatrixXd L = ssc::normalized_laplacian(A);
  Eigen::VectorXd e4 = Eigen::VectorXd::Zero(5);
  e4(4) = 1.0;
  REQUIRE((L * e4 - e4).norm() == 0.0);  // indicator of the isolated node

  REQUIRE_THROWS_AS(ssc::normalized_laplacian(-two_blocks(2, 2)), ssc::Error);
}

TEST_CASE("connected components of a thresholded affinity", "[spectral][affinity]") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(5, 5);
  A(0, 1) = A(1, 0) = 1.0;
  A(1, 2) = A(2, 1) = 0.3;
  A(3, 4) = A(4, 3) = 0.05;
  REQUIRE(ssc::connected_components(A) == std::vector<int>{0, 0, 0, 1, 1});
  REQUIRE(ssc::count_components(A) == 2);
  REQUIRE(ssc::count_components(A, 0.1) == 3);  // the weak edge is cut
  REQUIRE(ssc::count_components(Eigen::MatrixXd::Zero(3, 3)) == 3);
}

TEST_CASE("eigensolver ground cases", "[spectral][eigs]") {
  const Eigen::MatrixXd I4 = Eigen::MatrixXd::Identity(4, 4);
  const ssc::EigResult e = ssc::smallest_eigs(I4, 2);
  REQUIRE(e.values(0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(e.values(1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(e.converged);

  // complete graph on 4 nodes: spectrum {0, 4/3, 4/3, 4/3}
  const Eigen::MatrixXd L = ssc::normalized_laplacian(complete_graph(4));
  const ssc::EigResult k4 = ssc::dense_smallest_eigs(L, 4);
  REQUIRE(k4.values(0) == Catch::Approx(0.0).margin(1e-12));
  for (int i = 1; i < 4; ++i) REQUIRE(k4.values(i) == Catch::Approx(4.0 / 3.0).epsilon(1e-12));

  REQUIRE_THROWS_AS(ssc::dense_smallest_eigs(I4, 5), ssc::Error);
  REQUIRE_THROWS_AS(ssc::dense_smallest_eigs(Eigen::MatrixXd::Zero(2, 3), 1), ssc::Error);
}

TEST_CASE("iterative and dense eigensolvers agree on a 100-node graph", "[spectral][eigs]") {
  const Eigen::MatrixXd L = ssc::normalized_laplacian(random_affinity(100, 404));
  const int k = 5;

  ssc::EigOptions dense_opt;
  dense_opt.method = ssc::EigMethod::kDense;
  const ssc::EigResult d = ssc::smallest_eigs(L, k, dense_opt);
  REQUIRE(d.used_dense);

  ssc::EigOptions lanczos_opt;
  lanczos_opt.method = ssc::EigMethod::kLanczos;
  const ssc::EigResult l = ssc::smallest_eigs(L, k, lanczos_opt);
  REQUIRE(l.converged);

  for (int i = 0; i < k; ++i) REQUIRE(std::abs(l.values(i) - d.values(i)) <= 1e-8);

  // orthonormal vectors with certified residuals
  REQUIRE((l.vectors.transpose() * l.vectors - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-8);
  const double scale = std::max(1.0, L.norm());
  for (int i = 0; i < k; ++i)
    REQUIRE((L * l.vectors.col(i) - l.values(i) * l.vectors.col(i)).norm() < 1e-6 * scale);
}

TEST_CASE("eigensolver determinism and ascending order", "[spectral][eigs]") {
  const Eigen::MatrixXd L = ssc::normalized_laplacian(random_affinity(60, 77));
  ssc::EigOptions opt;
  opt.method = ssc::EigMethod::kLanczos;
  const ssc::EigResult a = ssc::smallest_eigs(L, 4, opt);
  const ssc::EigResult b = ssc::smallest_eigs(L, 4, opt);
  REQUIRE((a.values - b.values).norm() == 0.0);
  REQUIRE((a.vectors - b.vectors).norm() == 0.0);
  for (int i = 1; i < 4; ++i) REQUIRE(a.values(i) >= a.values(i - 1) - 1e-14);
}

TEST_CASE("block-diagonal norm vanishes exactly on component-rich graphs", "[spectral][bd]") {
  // three positive blocks of sizes 3, 2, 3: bd at k = 3 is 0
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(8, 8);
  auto fill_block = [&](Eigen::Index from, Eigen::Index to) {
    for (Eigen::Index i = from; i < to; ++i)
      for (Eigen::Index j = from; j < to; ++j)
        if (i != j) C(i, j) = 0.5 + 0.1 * double(i + j);
  };
  fill_block(0, 3);
  fill_block(3, 5);
  fill_block(5, 8);
  REQUIRE(ssc::bd_norm(C, 3) < 1e-10);
  REQUIRE(ssc::bd_norm(C, 2) < 1e-10);  // >= 2 components also covers k = 2
  REQUIRE(ssc::bd_norm(C, 4) > 1e-3);   // only 3 components exist

  // fully connected graph: bd at k = 2 picks up the Fiedler value 4/3
  const Eigen::MatrixXd K4 = complete_graph(4);
  REQUIRE(ssc::bd_norm(K4, 2) == Catch::Approx(4.0 / 3.0).epsilon(1e-10));
  // k = N sums the whole spectrum, the Laplacian trace: N without isolated nodes
  REQUIRE(ssc::bd_norm(K4, 4) == Catch::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("block-diagonal norm is permutation equivariant", "[spectral][bd]") {
  const Eigen::MatrixXd C = random_matrix(9, 9, 55);
  ssc::Rng rng(56);
  std::vector<Eigen::Index> perm(9);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  for (std::size_t i = 9; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(9, 9);
  for (Eigen::Index i = 0; i < 9; ++i) P(i, perm[std::size_t(i)]) = 1.0;
  const Eigen::MatrixXd Cp = P * C * P.transpose();
  for (int k : {1, 2, 4}) REQUIRE(std::abs(ssc::bd_norm(Cp, k) - ssc::bd_norm(C, k)) <= 1e-8);
}

TEST_CASE("block-diagonal subgradient is stationary inside flat blocks", "[spectral][bd]") {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(6, 6);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (i != j) {
        C(i, j) = 0.4 + 0.05 * double(i);
        C(i + 3, j + 3) = 0.7 + 0.05 * double(j);
      }
  const ssc::BdResult r = ssc::bd_norm_and_subgradient(C, 2);
  REQUIRE(r.value < 1e-10);
  // zero eigenvalues are stationary under within-component weight changes
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j)
      if (C(i, j) != 0.0) REQUIRE(std::abs(r.grad(i, j)) < 1e-6);
  // entries at zero keep the zero subgradient
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 3; j < 6; ++j) REQUIRE(r.grad(i, j) == 0.0);
}

TEST_CASE("block-diagonal subgradient matches finite differences with frozen degrees",
          "[spectral][bd]") {
  Eigen::MatrixXd C = random_matrix(8, 8, 91);
  const int k = 2;
  const ssc::BdResult r = ssc::bd_norm_and_subgradient(C, k, ssc::DegreeMode::kFrozen);

  // FD path freezes D^(-1/2) at the unperturbed point, matching the analytic
  // stop-gradient convention.
  const Eigen::VectorXd d0 = ssc::degree_vector(ssc::symmetric_affinity(C));
  Eigen::VectorXd dis0(8);
  for (Eigen::Index i = 0; i < 8; ++i) dis0(i) = d0(i) > 0.0 ? 1.0 / std::sqrt(d0(i)) : 0.0;
  auto frozen_value = [&] {
    const Eigen::MatrixXd A = ssc::symmetric_affinity(C);
    Eigen::MatrixXd L = -(dis0.asDiagonal() * A * dis0.asDiagonal());
    L.diagonal().array() += 1.0;
    L = 0.5 * (L + L.transpose());
    return ssc::dense_smallest_eigs(L, k).values.sum();
  };
  const auto check = ssc::check_gradient(frozen_value, C, r.grad);
  INFO("worst rel err " << check.max_rel_err << " at " << check.worst_index);
  REQUIRE(check.ok(1e-3));
}

TEST_CASE("a small step against the subgradient lowers the norm", "[spectral][bd]") {
  const Eigen::MatrixXd C = random_matrix(7, 7, 131);
  const int k = 2;
  const double before = ssc::bd_norm(C, k);
  const ssc::BdResult r = ssc::bd_norm_and_subgradient(C, k);
  bool any_decrease = false;
  for (double step : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const Eigen::MatrixXd moved = C - step * r.grad;
    if (ssc::bd_norm(moved, k) < before) any_decrease = true;
  }
  REQUIRE(any_decrease);
}

TEST_CASE("spectral embedding separates disconnected cliques", "[spectral]") {
  const Eigen::MatrixXd A = two_blocks(4, 4);
  ssc::SpectralConfig cfg;
  cfg.k = 2;
  cfg.seed = 7;
  const ssc::SpectralResult r = ssc::spectral_clustering(A, cfg);

  // embedded points collapse within a clique and stay apart across
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      REQUIRE((r.embedding.row(i) - r.embedding.row(j)).norm() < 1e-8);
      REQUIRE((r.embedding.row(4 + i) - r.embedding.row(4 + j)).norm() < 1e-8);
      REQUIRE((r.embedding.row(i) - r.embedding.row(4 + j)).norm() > 0.1);
    }
  const std::vector<int> truth{0, 0, 0, 0, 1, 1, 1, 1};
  REQUIRE(ssc::clustering_accuracy(r.labels, truth, 2) == 1.0);
}

TEST_CASE("single-cluster embedding is constant", "[spectral]") {
  const Eigen::MatrixXd A = random_affinity(10, 17);  // ring keeps it connected
  ssc::SpectralConfig cfg;
  cfg.k = 1;
  const ssc::SpectralResult r = ssc::spectral_clustering(A, cfg);
  for (Eigen::Index i = 1; i < 10; ++i)
    REQUIRE((r.embedding.row(i) - r.embedding.row(0)).norm() < 1e-6);
  REQUIRE(std::all_of(r.labels.begin(), r.labels.end(), [](int l) { return l == 0; }));
}

TEST_CASE("spectral partition is permutation equivariant", "[spectral]") {
  const Eigen::MatrixXd A = two_blocks(3, 5);
  std::vector<int> truth(8, 0);
  for (int i = 3; i < 8; ++i) truth[std::size_t(i)] = 1;

  std::vector<Eigen::Index> perm{5, 2, 7, 0, 4, 6, 1, 3};
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(8, 8);
  for (Eigen::Index i = 0; i < 8; ++i) P(i, perm[std::size_t(i)]) = 1.0;
  const Eigen::MatrixXd Ap = P * A * P.transpose();
  std::vector<int> truth_p(8);
  for (Eigen::Index i = 0; i < 8; ++i) truth_p[std::size_t(i)] = truth[std::size_t(perm[std::size_t(i)])];

  ssc::SpectralConfig cfg;
  cfg.k = 2;
  cfg.seed = 3;
  REQUIRE(ssc::clustering_accuracy(ssc::spectral_clustering(A, cfg).labels, truth, 2) == 1.0);
  REQUIRE(ssc::clustering_accuracy(ssc::spectral_clustering(Ap, cfg).labels, truth_p, 2) == 1.0);
}

TEST_CASE("k-means recovers separated blobs", "[spectral][kmeans]") {
  ssc::Rng rng(8);
  const int per = 15;
  Eigen::MatrixXd X(3 * per, 2);
  std::vector<int> truth(3 * per);
  const double cx[3] = {0.0, 10.0, -8.0};
  const double cy[3] = {0.0, 9.0, 7.0};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per; ++i) {
      const Eigen::Index row = c * per + i;
      X(row, 0) = cx[c] + 0.3 * rng.normal();
      X(row, 1) = cy[c] + 0.3 * rng.normal();
      truth[std::size_t(row)] = c;
    }

  ssc::KMeansConfig cfg;
  cfg.k = 3;
  cfg.seed = 21;
  const ssc::KMeansResult r = ssc::kmeans(X, cfg);
  REQUIRE(ssc::clustering_accuracy(r.labels, truth, 3) == 1.0);
  REQUIRE(r.inertia < 3 * per * 0.5);

  const ssc::KMeansResult again = ssc::kmeans(X, cfg);
  REQUIRE(r.labels == again.labels);
  REQUIRE(r.best_restart == again.best_restart);
}

TEST_CASE("k-means with one cluster per point has zero inertia", "[spectral][kmeans]") {
  const Eigen::MatrixXd X = random_matrix(6, 3, 97);
  ssc::KMeansConfig cfg;
  cfg.k = 6;
  cfg.seed = 1;
  const ssc::KMeansResult r = ssc::kmeans(X, cfg);
  REQUIRE(r.inertia == Catch::Approx(0.0).margin(1e-18));
  std::vector<int> sorted = r.labels;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == std::vector<int>{0, 1, 2, 3, 4, 5});  // all clusters used

  cfg.k = 7;
  REQUIRE_THROWS_AS(ssc::kmeans(X, cfg), ssc::Error);
}

TEST_CASE("pseudo-labels from a block-diagonal representation", "[spectral][pseudo]") {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(9, 9);
  for (Eigen::Index b = 0; b < 3; ++b)
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 3; ++j)
        if (i != j) C(3 * b + i, 3 * b + j) = 0.3 + 0.1 * double(i);

  ssc::PostprocessConfig pp;  // identity cleanup
  const ssc::PseudoLabelState st = ssc::make_pseudo_labels(C, 3, pp, 19);
  const std::vector<int> truth{0, 0, 0, 1, 1, 1, 2, 2, 2};
  REQUIRE(ssc::clustering_accuracy(st.labels, truth, 3) == 1.0);
  REQUIRE(st.count_nonempty(3) == 3);
  REQUIRE(st.centroids.rows() == 3);
  REQUIRE(st.centroids.cols() == 3);
  REQUIRE(st.centroids.norm() == 0.0);
  for (std::size_t i = 0; i < 9; ++i) REQUIRE(st.q_onehot(Eigen::Index(i), st.labels[i]) == 1.0);

  const ssc::PseudoLabelState again = ssc::make_pseudo_labels(C, 3, pp, 19);
  REQUIRE(st.labels == again.labels);
}

TEST_CASE("label alignment maximizes overlap with the previous epoch", "[spectral][pseudo]") {
  const std::vector<int> previous{0, 0, 1, 1, 2, 2};
  const std::vector<int> fresh{2, 2, 0, 0, 1, 1};  // same partition, rotated names
  REQUIRE(ssc::align_labels(previous, fresh, 3) == previous);

  // one point moved cluster: alignment keeps the majority mapping
  const std::vector<int> moved{2, 2, 0, 0, 1, 0};
  const std::vector<int> aligned = ssc::align_labels(previous, moved, 3);
  REQUIRE(aligned == std::vector<int>{0, 0, 1, 1, 2, 1});

  REQUIRE_THROWS_AS(ssc::align_labels({0, 1}, {0}, 2), ssc::Error);
  REQUIRE_THROWS_AS(ssc::align_labels({0, 5}, {0, 1}, 2), ssc::Error);
}

TEST_CASE("assignment solver matches exhaustive search", "[spectral][hungarian]") {
  Eigen::MatrixXd toy(2, 2);
  toy << 1.0, 2.0, 2.0, 1.0;
  REQUIRE(ssc::solve_assignment(toy) == std::vector<int>{0, 1});

  ssc::Rng rng(3);
  for (int trial = 0; trial < 120; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng.uniform_int(4));  // up to 5x5
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = double(rng.uniform_int(50));
    const std::vector<int> assign = ssc::solve_assignment(cost);

    std::vector<bool> used(std::size_t(n), false);
    for (int j : assign) {
      REQUIRE(!used[std::size_t(j)]);  // a valid permutation
      used[std::size_t(j)] = true;
    }
    REQUIRE(assignment_cost(cost, assign) == brute_force_min_cost(cost));
  }
}

TEST_CASE("max-weight assignment negates the cost solver", "[spectral][hungarian]") {
  Eigen::MatrixXd w(3, 3);
  w << 5.0, 1.0, 0.0, 0.0, 4.0, 1.0, 1.0, 0.0, 9.0;
  REQUIRE(ssc::solve_assignment_max(w) == std::vector<int>{0, 1, 2});
}

TEST_CASE("clustering accuracy oracles", "[spectral][evaluate]") {
  REQUIRE(ssc::clustering_accuracy({0, 1, 0, 1}, {0, 1, 0, 1}, 2) == 1.0);
  // a global label swap costs nothing
  REQUIRE(ssc::clustering_accuracy({1, 0, 1, 0}, {0, 1, 0, 1}, 2) == 1.0);
  REQUIRE(ssc::clustering_accuracy({0, 0, 1, 1}, {0, 1, 1, 1}, 2) == 0.75);

  REQUIRE_THROWS_AS(ssc::clustering_accuracy({}, {}, 2), ssc::Error);
  REQUIRE_THROWS_AS(ssc::clustering_accuracy({0}, {0, 1}, 2), ssc::Error);
  REQUIRE_THROWS_AS(ssc::clustering_accuracy({0, 3}, {0, 1}, 2), ssc::Error);
}

TEST_CASE("clustering accuracy is invariant under prediction renaming", "[spectral][evaluate]") {
  ssc::Rng rng(23);
  std::vector<int> truth(30), pred(30);
  for (std::size_t i = 0; i < 30; ++i) {
    truth[i] = int(rng.uniform_int(4));
    pred[i] = int(rng.uniform_int(4));
  }
  const double base = ssc::clustering_accuracy(pred, truth, 4);
  const int sigma[4] = {2, 3, 1, 0};
  std::vector<int> renamed(30);
  for (std::size_t i = 0; i < 30; ++i) renamed[i] = sigma[pred[i]];
  REQUIRE(ssc::clustering_accuracy(renamed, truth, 4) == base);
}
