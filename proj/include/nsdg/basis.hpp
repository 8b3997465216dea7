#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nsdg {

template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

template <typename Scalar>
struct QuadratureRule {
  Points2<Scalar> points;  // 2 x n (volume) or 1-row stored in row 0 (edge)
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;
  int exactness_degree = 0;

  int size() const { return static_cast<int>(weights.size()); }
};

// Nodes and weights of the n-point Gauss-Jacobi rule for (1-x)^alpha (1+x)^beta on [-1,1].
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
gauss_jacobi(int n, Scalar alpha, Scalar beta) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat T = Mat::Zero(n, n);
  const Scalar ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    const Scalar s = 2 * k + ab;
    T(k, k) = (k == 0) ? (beta - alpha) / (ab + 2) : (beta * beta - alpha * alpha) / (s * (s + 2));
    if (k + 1 < n) {
      const Scalar m = k + 1;
      const Scalar t = 2 * m + ab;
      const Scalar b = 4 * m * (m + alpha) * (m + beta) * (m + ab) / (t * t * (t + 1) * (t - 1));
      T(k, k + 1) = T(k + 1, k) = std::sqrt(b);
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(T);
  using std::lgamma;
  const Scalar mu0 = std::exp((ab + 1) * std::log(Scalar(2)) + lgamma(alpha + 1) + lgamma(beta + 1) - lgamma(ab + 2));
  Vec x = eig.eigenvalues();
  Vec w = mu0 * eig.eigenvectors().row(0).transpose().array().square().matrix();
  return {x, w};
}

// Gauss rule on [0,1] exact to the given degree; points stored in row 0.
template <typename Scalar = double>
QuadratureRule<Scalar> edge_quadrature(int degree) {
  if (degree < 0 || degree > 25) throw std::invalid_argument("edge_quadrature: unsupported degree");
  const int n = std::max(1, (degree + 2) / 2);
  auto [x, w] = gauss_jacobi<Scalar>(n, 0, 0);
  QuadratureRule<Scalar> q;
  q.points = Points2<Scalar>::Zero(2, n);
  q.points.row(0) = ((x.array() + 1) / 2).transpose();
  q.weights = w / 2;
  q.exactness_degree = 2 * n - 1;
  return q;
}

// Collapsed-coordinate (Stroud conical product) rule on {x,y >= 0, x+y <= 1}.
template <typename Scalar = double>
QuadratureRule<Scalar> triangle_quadrature(int degree) {
  if (degree < 0 || degree > 12) throw std::invalid_argument("triangle_quadrature: degree must be in [0,12]");
  const int n = std::max(1, (degree + 2) / 2);
  auto [xi, wx] = gauss_jacobi<Scalar>(n, 0, 0);
  auto [eta, we] = gauss_jacobi<Scalar>(n, 1, 0);
  QuadratureRule<Scalar> q;
  q.points.resize(2, n * n);
  q.weights.resize(n * n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i, ++k) {
      const Scalar y = (1 + eta(j)) / 2;
      q.points(0, k) = (1 + xi(i)) * (1 - y) / 2;
      q.points(1, k) = y;
      q.weights(k) = wx(i) * we(j) / 8;
    }
  q.exactness_degree = 2 * n - 1;
  return q;
}

// Values and reference gradients of a set of functions at a set of points.
template <typename Scalar>
struct Tabulation {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat values;  // points x functions
  Mat dx;
  Mat dy;
};

// Orthonormal modal (Dubiner) basis of P_k on the reference triangle.
template <typename Scalar = double>
class ReferenceBasis {
 public:
  static constexpr int kMaxDegree = 4;

  explicit ReferenceBasis(int k) : k_(k) {
    if (k < 0 || k > kMaxDegree) throw std::invalid_argument("orthonormal_basis: degree must be in [0,4]");
    for (int d = 0; d <= k; ++d)
      for (int p = 0; p <= d; ++p) modes_.emplace_back(p, d - p);
  }

  int degree() const { return k_; }
  int size() const { return static_cast<int>(modes_.size()); }
  static int mode_count(int k) { return (k + 1) * (k + 2) / 2; }
  const std::vector<std::pair<int, int>>& modes() const { return modes_; }

  Tabulation<Scalar> tabulate(const Points2<Scalar>& pts) const {
    const int np = static_cast<int>(pts.cols());
    Tabulation<Scalar> t;
    t.values.resize(np, size());
    t.dx.resize(np, size());
    t.dy.resize(np, size());
    std::vector<Scalar> L(k_ + 1), Lx(k_ + 1), Ly(k_ + 1), J(k_ + 1), Jd(k_ + 1);
    for (int i = 0; i < np; ++i) {
      const Scalar x = pts(0, i), y = pts(1, i);
      scaled_legendre(x, y, L, Lx, Ly);
      for (int m = 0; m < size(); ++m) {
        const auto [p, q] = modes_[m];
        jacobi(q, Scalar(2 * p + 1), 2 * y - 1, J, Jd);
        const Scalar c = std::sqrt(Scalar((2 * p + 1) * (2 * p + 2 * q + 2)));
        t.values(i, m) = c * L[p] * J[q];
        t.dx(i, m) = c * Lx[p] * J[q];
        t.dy(i, m) = c * (Ly[p] * J[q] + L[p] * 2 * Jd[q]);
      }
    }
    return t;
  }

 private:
  // L_p(x,y) = (1-y)^p P_p((2x-1+y)/(1-y)) and its gradient, polynomial in (x,y).
  void scaled_legendre(Scalar x, Scalar y, std::vector<Scalar>& L, std::vector<Scalar>& Lx,
                       std::vector<Scalar>& Ly) const {
    const Scalar s = 2 * x - 1 + y, t2 = (1 - y) * (1 - y), t2y = -2 * (1 - y);
    L[0] = 1;
    Lx[0] = 0;
    Ly[0] = 0;
    if (k_ >= 1) {
      L[1] = s;
      Lx[1] = 2;
      Ly[1] = 1;
    }
    for (int n = 1; n < k_; ++n) {
      const Scalar a = Scalar(2 * n + 1) / (n + 1), b = Scalar(n) / (n + 1);
      L[n + 1] = a * s * L[n] - b * t2 * L[n - 1];
      Lx[n + 1] = a * (2 * L[n] + s * Lx[n]) - b * t2 * Lx[n - 1];
      Ly[n + 1] = a * (L[n] + s * Ly[n]) - b * (t2y * L[n - 1] + t2 * Ly[n - 1]);
    }
  }

  // P_n^{(alpha,0)}(x) and derivative for n = 0..q.
  static void jacobi(int q, Scalar alpha, Scalar x, std::vector<Scalar>& P, std::vector<Scalar>& D) {
    P[0] = 1;
    D[0] = 0;
    if (q >= 1) {
      P[1] = ((alpha + 2) * x + alpha) / 2;
      D[1] = (alpha + 2) / 2;
    }
    for (int n = 2; n <= q; ++n) {
      const Scalar c1 = 2 * n * (n + alpha) * (2 * n + alpha - 2);
      const Scalar c2 = (2 * n + alpha - 1) * (2 * n + alpha) * (2 * n + alpha - 2);
      const Scalar c3 = (2 * n + alpha - 1) * alpha * alpha;
      const Scalar c4 = 2 * (n + alpha - 1) * (n - 1) * (2 * n + alpha);
      P[n] = ((c2 * x + c3) * P[n - 1] - c4 * P[n - 2]) / c1;
      D[n] = (c2 * P[n - 1] + (c2 * x + c3) * D[n - 1] - c4 * D[n - 2]) / c1;
    }
  }

  int k_;
  std::vector<std::pair<int, int>> modes_;
};

template <typename Scalar = double>
ReferenceBasis<Scalar> orthonormal_basis(int k) {
  return ReferenceBasis<Scalar>(k);
}

// Equispaced Lagrange nodes (i/k, j/k), i + j <= k.
template <typename Scalar = double>
Points2<Scalar> lagrange_nodes(int k) {
  Points2<Scalar> pts(2, ReferenceBasis<Scalar>::mode_count(k));
  int n = 0;
  for (int j = 0; j <= k; ++j)
    for (int i = 0; i + j <= k; ++i, ++n) {
      pts(0, n) = k == 0 ? Scalar(1) / 3 : Scalar(i) / k;
      pts(1, n) = k == 0 ? Scalar(1) / 3 : Scalar(j) / k;
    }
  return pts;
}

template <typename Scalar>
struct AffineMap {
  Eigen::Matrix<Scalar, 2, 1> origin;
  Eigen::Matrix<Scalar, 2, 2> jacobian;
  Eigen::Matrix<Scalar, 2, 2> inverse;
  Scalar det = 0;  // signed

  Eigen::Matrix<Scalar, 2, 1> operator()(const Eigen::Matrix<Scalar, 2, 1>& ref) const {
    return origin + jacobian * ref;
  }
  Eigen::Matrix<Scalar, 2, 1> to_reference(const Eigen::Matrix<Scalar, 2, 1>& x) const {
    return inverse * (x - origin);
  }
  Scalar abs_det() const { return std::abs(det); }
};

template <typename Scalar>
AffineMap<Scalar> affine_map(const Eigen::Matrix<Scalar, 2, 1>& a, const Eigen::Matrix<Scalar, 2, 1>& b,
                             const Eigen::Matrix<Scalar, 2, 1>& c) {
  AffineMap<Scalar> m;
  m.origin = a;
  m.jacobian.col(0) = b - a;
  m.jacobian.col(1) = c - a;
  m.det = m.jacobian.determinant();
  using std::abs;
  const Scalar scale = (b - a).squaredNorm() + (c - a).squaredNorm();
  if (!(abs(m.det) > 1e-14 * scale)) throw std::invalid_argument("map_to_physical: degenerate triangle");
  m.inverse = m.jacobian.inverse();
  return m;
}

template <typename Scalar>
struct PhysicalPoint {
  Eigen::Matrix<Scalar, 2, 1> x;
  Eigen::Matrix<Scalar, 2, 2> jacobian;
  Scalar abs_det;
};

template <typename Scalar>
PhysicalPoint<Scalar> map_to_physical(const Eigen::Matrix<Scalar, 2, 1>& a, const Eigen::Matrix<Scalar, 2, 1>& b,
                                      const Eigen::Matrix<Scalar, 2, 1>& c, const Eigen::Matrix<Scalar, 2, 1>& ref) {
  const auto m = affine_map(a, b, c);
  return {m(ref), m.jacobian, m.abs_det()};
}

}  // namespace nsdg
