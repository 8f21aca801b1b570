#pragma once

// Reference computations that share no code with the library.

#include "mmtopo/interp_tree.hpp"
#include "mmtopo/materials.hpp"
#include "mmtopo/polytope.hpp"

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline double tri_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

/// Wachspress weights of a counter-clockwise polygon by the triangle-area formula
/// w_i = A(v_{i-1}, v_i, v_{i+1}) / (A(p, v_{i-1}, v_i) A(p, v_i, v_{i+1})), normalized.
inline Eigen::VectorXd wachspress_polygon(const std::vector<Eigen::Vector2d>& v, const Eigen::Vector2d& p) {
  const auto n = static_cast<int>(v.size());
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    const auto& prev = v[static_cast<std::size_t>((i + n - 1) % n)];
    const auto& cur = v[static_cast<std::size_t>(i)];
    const auto& next = v[static_cast<std::size_t>((i + 1) % n)];
    w[i] = tri_area(prev, cur, next) / (tri_area(p, prev, cur) * tri_area(p, cur, next));
  }
  return w / w.sum();
}

inline Eigen::Vector2d project_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  const Eigen::Vector2d d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return a + t * d;
}

inline bool inside_polygon(const std::vector<Eigen::Vector2d>& v, const Eigen::Vector2d& p) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (tri_area(v[i], v[(i + 1) % v.size()], p) < 0.0) return false;
  return true;
}

/// Nearest point by dense sampling of the polygon (fan of triangles) refined by
/// exact projection onto the edge nearest to the best sample.
inline Eigen::Vector2d project_polygon(const std::vector<Eigen::Vector2d>& v, const Eigen::Vector2d& p, int samples = 200) {
  if (inside_polygon(v, p)) return p;
  Eigen::Vector2d best = v[0];
  double best_d = std::numeric_limits<double>::infinity();
  const Eigen::Vector2d c0 = v[0];
  for (std::size_t t = 1; t + 1 < v.size(); ++t) {
    for (int i = 0; i <= samples; ++i) {
      for (int j = 0; i + j <= samples; ++j) {
        const double a = static_cast<double>(i) / samples, b = static_cast<double>(j) / samples;
        const Eigen::Vector2d q = c0 + a * (v[t] - c0) + b * (v[t + 1] - c0);
        const double d = (q - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = q;
        }
      }
    }
  }
  // The sampled optimum lies on or next to the active edge; finish exactly there.
  double diameter = 0.0;
  for (const auto& a : v)
    for (const auto& b : v) diameter = std::max(diameter, (a - b).norm());
  const double reach = 3.0 * diameter / samples;
  Eigen::Vector2d exact = best;
  double exact_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::Vector2d q = project_segment(v[i], v[(i + 1) % v.size()], p);
    if ((q - best).norm() > reach) continue;
    const double d = (q - p).squaredNorm();
    if (d < exact_d) {
      exact_d = d;
      exact = q;
    }
  }
  return exact;
}

/// Central finite differences of f: R^d -> R^m, one column per coordinate.
template <class F>
Eigen::MatrixXd central_jacobian(F&& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd up = x, down = x;
    up[k] += h;
    down[k] -= h;
    jac.col(k) = (f(up) - f(down)) / (2.0 * h);
  }
  return jac;
}

/// Leaf with scalar test value kappa: polarization (kappa, kappa/2) and current kappa.
inline mmtopo::MaterialModel scalar_leaf(const std::string& name, double kappa) {
  return mmtopo::constant_model(name, Eigen::Vector2d(kappa, 0.5 * kappa), kappa);
}

/// Random tree of depth <= max_depth with at most max_leaves leaves. Leaves are
/// constant laws with random values, with an occasional saturating steel leaf.
inline std::vector<mmtopo::InterpTree::NodeSpec> random_tree_spec(std::mt19937_64& rng, int max_depth = 3,
                                                                   int max_leaves = 20) {
  using mmtopo::InterpTree;
  using mmtopo::NeveuLabel;
  using mmtopo::Polytope;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 99);
  std::vector<InterpTree::NodeSpec> spec;
  int leaves = 0;
  int counter = 0;

  auto random_polytope = [&](int budget) {
    const int choice = pick(rng) % 4;
    if (budget <= 2 || choice == 0) return Polytope::segment(unit(rng) - 1.5, unit(rng) + 1.5);
    if (choice == 3 && budget >= 5) return Polytope::diamond(std::min(budget - 2, 3 + pick(rng) % 3), 0.5 + 0.5 * std::abs(unit(rng)));
    return Polytope::regular_polygon(std::min(budget, 3 + pick(rng) % 5), 0.5 + std::abs(unit(rng)));
  };
  auto make_leaf = [&](const NeveuLabel& label) {
    ++leaves;
    const std::string name = "leaf" + std::to_string(counter++);
    if (pick(rng) < 20) {
      spec.push_back({label, std::nullopt,
                      mmtopo::MaterialModel(name, mmtopo::FroelichLaw{1.0 + std::abs(unit(rng)), 0.5 + 0.4 * std::abs(unit(rng))}, 0.0)});
    } else {
      spec.push_back({label, std::nullopt, mmtopo::constant_model(name, Eigen::Vector2d(unit(rng), unit(rng)), 1e6 * unit(rng))});
    }
  };
  // `ceiling` bounds the global leaf count once this subtree is complete.
  std::function<void(const NeveuLabel&, int, int)> grow = [&](const NeveuLabel& label, int depth, int ceiling) {
    const Polytope poly = random_polytope(std::max(2, ceiling - leaves));
    spec.push_back({label, poly, std::nullopt});
    const auto n = static_cast<int>(poly.vertex_count());
    for (int i = 1; i <= n; ++i) {
      const int later = n - i;  // siblings after this one need a leaf each
      const int room = ceiling - later - leaves;
      if (depth + 1 < max_depth && room >= 2 && pick(rng) < 35) grow(label.child(i), depth + 1, ceiling - later);
      else make_leaf(label.child(i));
    }
  };
  grow(NeveuLabel{}, 0, max_leaves);
  return spec;
}

}  // namespace oracle
