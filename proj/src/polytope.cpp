#include "mmtopo/polytope.hpp"

#include "mmtopo/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace mmtopo {

namespace {

// Relative step toward the centroid used for gradients at non-simple vertices.
constexpr double kVertexNudge = 1e-9;

double det2(const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return a.x() * b.y() - a.y() * b.x(); }

double det3(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return a.dot(b.cross(c));
}

Eigen::Vector3d closest_on_segment(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return a + t * d;
}

}  // namespace

Eigen::Vector3d Polytope::pad(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  if (p.size() != dim_) {
    throw Error(Errc::InvalidParameters, "point of dimension " + std::to_string(p.size()) +
                                             " passed to a polytope of dimension " + std::to_string(dim_));
  }
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int k = 0; k < dim_; ++k) out[k] = p[k];
  return out;
}

Eigen::VectorXd Polytope::unpad(const Eigen::Vector3d& p) const { return p.head(dim_); }

Eigen::VectorXd Polytope::vertex(std::size_t i) const { return unpad(vertices_.at(i)); }

Polytope Polytope::make(int dim, const std::vector<Eigen::VectorXd>& vertices,
                        const std::optional<std::vector<std::vector<int>>>& faces) {
  if (dim < 1 || dim > 3) throw Error(Errc::InvalidParameters, "polytope dimension must be 1, 2 or 3");
  if (vertices.size() < 2) throw Error(Errc::DegenerateGeometry, "a polytope needs at least two vertices");

  Polytope poly;
  poly.dim_ = dim;
  double scale = 1.0;
  for (const auto& v : vertices) {
    if (v.size() != dim) throw Error(Errc::InvalidParameters, "vertex dimension mismatch");
    if (!v.allFinite()) throw Error(Errc::DegenerateGeometry, "non-finite vertex");
    Eigen::Vector3d padded = Eigen::Vector3d::Zero();
    padded.head(dim) = v;
    poly.vertices_.push_back(padded);
    scale = std::max(scale, v.cwiseAbs().maxCoeff());
  }
  const double eps = 1e-12 * scale;
  poly.inside_tol_ = eps;
  const auto& V = poly.vertices_;
  const std::size_t n = V.size();

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((V[i] - V[j]).norm() <= eps)
        throw Error(Errc::DegenerateGeometry, "coincident vertices " + std::to_string(i) + " and " + std::to_string(j));

  if (dim == 1) {
    if (n != 2) throw Error(Errc::NonConvexInput, "a 1D polytope has exactly two vertices");
    for (int i = 0; i < 2; ++i) {
      Facet f;
      const double sign = V[i].x() > V[1 - i].x() ? 1.0 : -1.0;
      f.normal = Eigen::Vector3d(sign, 0.0, 0.0);
      f.offset = sign * V[i].x();
      f.loop = {i};
      poly.facets_.push_back(f);
    }
    std::ostringstream os;
    os << "segment[" << V[0].x() << "," << V[1].x() << "]";
    poly.name_ = os.str();
  } else if (dim == 2) {
    if (n < 3) throw Error(Errc::DegenerateGeometry, "a polygon needs at least three vertices");
    double area2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) area2 += det2(V[i], V[(i + 1) % n]);
    if (std::abs(area2) <= eps * scale) throw Error(Errc::DegenerateGeometry, "polygon has zero area");
    if (area2 < 0.0) throw Error(Errc::NonConvexInput, "polygon vertices must be counter-clockwise");
    double turning = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d e0 = V[(i + 1) % n] - V[i];
      const Eigen::Vector3d e1 = V[(i + 2) % n] - V[(i + 1) % n];
      const double cross = det2(e0, e1);
      if (cross <= eps * e0.norm()) {
        throw Error(Errc::NonConvexInput, "vertex " + std::to_string((i + 1) % n) + " is not extreme");
      }
      turning += std::atan2(cross, e0.dot(e1));
    }
    if (std::abs(turning - 2.0 * std::numbers::pi) > 1e-6)
      throw Error(Errc::NonConvexInput, "polygon winds more than once");
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d e = V[(i + 1) % n] - V[i];
      Facet f;
      f.normal = Eigen::Vector3d(e.y(), -e.x(), 0.0).normalized();
      f.offset = f.normal.dot(V[i]);
      f.loop = {static_cast<int>(i), static_cast<int>((i + 1) % n)};
      poly.facets_.push_back(f);
    }
    poly.name_ = "polygon(n=" + std::to_string(n) + ")";
  } else {
    if (n < 4) throw Error(Errc::DegenerateGeometry, "a polyhedron needs at least four vertices");
    double max_vol = 0.0;
    for (std::size_t j = 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l)
          max_vol = std::max(max_vol, std::abs(det3(V[j] - V[0], V[k] - V[0], V[l] - V[0])));
    if (max_vol <= eps * scale * scale) throw Error(Errc::DegenerateGeometry, "polyhedron has zero volume");

    // Brute-force hull: n is at most a few dozen.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) {
          Eigen::Vector3d normal = (V[j] - V[i]).cross(V[k] - V[i]);
          if (normal.norm() <= eps * scale) continue;
          normal.normalize();
          double offset = normal.dot(V[i]);
          bool below = true, above = true;
          for (const auto& v : V) {
            const double s = normal.dot(v) - offset;
            below = below && s <= eps;
            above = above && s >= -eps;
          }
          if (!below && !above) continue;
          if (!below) {
            normal = -normal;
            offset = -offset;
          }
          const bool known = std::any_of(poly.facets_.begin(), poly.facets_.end(), [&](const Facet& f) {
            return (f.normal - normal).norm() <= 1e-9 && std::abs(f.offset - offset) <= eps;
          });
          if (known) continue;
          Facet f;
          f.normal = normal;
          f.offset = offset;
          Eigen::Vector3d center = Eigen::Vector3d::Zero();
          for (std::size_t m = 0; m < n; ++m) {
            if (std::abs(normal.dot(V[m]) - offset) <= eps) {
              f.loop.push_back(static_cast<int>(m));
              center += V[m];
            }
          }
          center /= static_cast<double>(f.loop.size());
          const Eigen::Vector3d e1 = (V[f.loop.front()] - center).normalized();
          const Eigen::Vector3d e2 = normal.cross(e1);
          std::sort(f.loop.begin(), f.loop.end(), [&](int a, int b) {
            const Eigen::Vector3d da = V[a] - center, db = V[b] - center;
            return std::atan2(da.dot(e2), da.dot(e1)) < std::atan2(db.dot(e2), db.dot(e1));
          });
          poly.facets_.push_back(std::move(f));
        }

    for (std::size_t m = 0; m < n; ++m) {
      std::vector<Eigen::Vector3d> normals;
      for (const auto& f : poly.facets_)
        if (std::find(f.loop.begin(), f.loop.end(), static_cast<int>(m)) != f.loop.end()) normals.push_back(f.normal);
      double rank3 = 0.0;
      for (std::size_t a = 0; a < normals.size(); ++a)
        for (std::size_t b = a + 1; b < normals.size(); ++b)
          for (std::size_t c = b + 1; c < normals.size(); ++c)
            rank3 = std::max(rank3, std::abs(det3(normals[a], normals[b], normals[c])));
      if (rank3 <= 1e-9) throw Error(Errc::NonConvexInput, "vertex " + std::to_string(m) + " is not extreme");
    }

    if (faces) {
      std::set<std::set<int>> given, hull;
      for (const auto& f : *faces) given.insert(std::set<int>(f.begin(), f.end()));
      for (const auto& f : poly.facets_) hull.insert(std::set<int>(f.loop.begin(), f.loop.end()));
      if (given != hull) throw Error(Errc::NonConvexInput, "supplied faces do not match the convex hull");
    }
    poly.name_ = "polyhedron(n=" + std::to_string(n) + ", faces=" + std::to_string(poly.facets_.size()) + ")";
  }

  for (const auto& f : poly.facets_) poly.face_loops_.push_back(f.loop);
  poly.build_terms();
  return poly;
}

void Polytope::build_terms() {
  const std::size_t n = vertices_.size();
  terms_.assign(n, {});
  vertex_degree_.assign(n, 0);
  centroid3_.setZero();
  for (const auto& v : vertices_) centroid3_ += v / static_cast<double>(n);
  for (std::size_t m = 0; m < n; ++m) {
    std::vector<int> incident;
    for (std::size_t f = 0; f < facets_.size(); ++f) {
      const auto& loop = facets_[f].loop;
      if (std::find(loop.begin(), loop.end(), static_cast<int>(m)) != loop.end()) incident.push_back(static_cast<int>(f));
    }
    vertex_degree_[m] = incident.size();
    auto& terms = terms_[m];
    if (dim_ == 1) {
      terms.push_back({incident, 1.0});
    } else if (dim_ == 2) {
      // Incident edges are (m-1, m); their normals turn counter-clockwise.
      const int prev = static_cast<int>((m + n - 1) % n), next = static_cast<int>(m);
      terms.push_back({{prev, next}, det2(facets_[prev].normal, facets_[next].normal)});
    } else {
      Eigen::Vector3d axis = Eigen::Vector3d::Zero();
      for (int f : incident) axis += facets_[f].normal;
      axis.normalize();
      const Eigen::Vector3d e1 = (facets_[incident.front()].normal - axis * axis.dot(facets_[incident.front()].normal)).normalized();
      const Eigen::Vector3d e2 = axis.cross(e1);
      std::sort(incident.begin(), incident.end(), [&](int a, int b) {
        const auto& na = facets_[a].normal;
        const auto& nb = facets_[b].normal;
        return std::atan2(na.dot(e2), na.dot(e1)) < std::atan2(nb.dot(e2), nb.dot(e1));
      });
      for (std::size_t j = 1; j + 1 < incident.size(); ++j) {
        const int a = incident[0], b = incident[j], c = incident[j + 1];
        terms.push_back({{a, b, c}, det3(facets_[a].normal, facets_[b].normal, facets_[c].normal)});
      }
    }
    double total = 0.0;
    for (const auto& t : terms) total += t.coefficient;
    const double sign = total < 0.0 ? -1.0 : 1.0;
    for (auto& t : terms) {
      t.coefficient *= sign;
      if (t.coefficient < -1e-12) throw Error(Errc::DegenerateGeometry, "inconsistent fan orientation at a vertex");
    }
  }
}

Polytope Polytope::segment(double v0, double v1) {
  return make(1, {Eigen::VectorXd::Constant(1, v0), Eigen::VectorXd::Constant(1, v1)});
}

Polytope Polytope::regular_polygon(int n, double radius) {
  if (n < 3) throw Error(Errc::InvalidParameters, "regular polygon needs n >= 3");
  if (!(radius > 0.0)) throw Error(Errc::InvalidParameters, "regular polygon radius must be positive");
  std::vector<Eigen::VectorXd> vertices;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    vertices.push_back(Eigen::Vector2d(radius * std::cos(t), radius * std::sin(t)));
  }
  return make(2, vertices);
}

Polytope Polytope::diamond(int equator_vertices, double apex_height) {
  if (equator_vertices < 3) throw Error(Errc::InvalidParameters, "diamond equator needs at least 3 vertices");
  if (!(apex_height > 0.0)) throw Error(Errc::InvalidParameters, "diamond apex height must be positive");
  std::vector<Eigen::VectorXd> vertices;
  for (int k = 0; k < equator_vertices; ++k) {
    const double t = 2.0 * std::numbers::pi * k / equator_vertices;
    vertices.push_back(Eigen::Vector3d(std::cos(t), std::sin(t), 0.0));
  }
  vertices.push_back(Eigen::Vector3d(0.0, 0.0, apex_height));
  vertices.push_back(Eigen::Vector3d(0.0, 0.0, -apex_height));
  return make(3, vertices);
}

double Polytope::min_facet_distance(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  const Eigen::Vector3d x = pad(p);
  double d = std::numeric_limits<double>::infinity();
  for (const auto& f : facets_) d = std::min(d, f.offset - f.normal.dot(x));
  return d;
}

bool Polytope::contains(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  return min_facet_distance(p) >= -inside_tol_;
}

BarycentricResult Polytope::barycentric(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  const Eigen::Vector3d x = pad(p);
  for (const auto& f : facets_) {
    const double h = f.offset - f.normal.dot(x);
    if (!(h >= -inside_tol_)) {
      throw Error(Errc::PointOutsidePolytope, "point lies outside " + name_ + " (facet distance " +
                                                  std::to_string(h) + ")");
    }
  }
  // Every term vanishes at a vertex shared by more than dim facets; there the
  // weights are the Kronecker delta and the gradients their limit along the
  // direction to the centroid.
  for (std::size_t m = 0; m < vertices_.size(); ++m) {
    if (vertex_degree_[m] <= static_cast<std::size_t>(dim_) || (x - vertices_[m]).norm() > inside_tol_) continue;
    BarycentricResult out = evaluate(vertices_[m] + kVertexNudge * (centroid3_ - vertices_[m]));
    out.weights.setZero();
    out.weights[static_cast<Eigen::Index>(m)] = 1.0;
    return out;
  }
  return evaluate(x);
}

BarycentricResult Polytope::evaluate(const Eigen::Vector3d& x) const {
  const std::size_t nf = facets_.size();
  const std::size_t n = vertices_.size();
  std::vector<double> h(nf);
  for (std::size_t f = 0; f < nf; ++f) h[f] = facets_[f].offset - facets_[f].normal.dot(x);

  Eigen::VectorXd w(n);
  Eigen::Matrix3Xd dw(3, n);
  std::vector<int> others;
  std::vector<double> prefix, suffix;
  others.reserve(nf);
  for (std::size_t m = 0; m < n; ++m) {
    double value = 0.0;
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (const auto& term : terms_[m]) {
      others.clear();
      for (std::size_t f = 0; f < nf; ++f)
        if (std::find(term.facets.begin(), term.facets.end(), static_cast<int>(f)) == term.facets.end())
          others.push_back(static_cast<int>(f));
      const std::size_t k = others.size();
      prefix.assign(k + 1, 1.0);
      suffix.assign(k + 1, 1.0);
      for (std::size_t j = 0; j < k; ++j) prefix[j + 1] = prefix[j] * h[others[j]];
      for (std::size_t j = k; j > 0; --j) suffix[j - 1] = suffix[j] * h[others[j - 1]];
      value += term.coefficient * prefix[k];
      // d h_f / dx = -normal_f
      for (std::size_t j = 0; j < k; ++j)
        grad -= term.coefficient * prefix[j] * suffix[j + 1] * facets_[others[j]].normal;
    }
    w[m] = value;
    dw.col(m) = grad;
  }

  const double total = w.sum();
  const Eigen::Vector3d dtotal = dw.rowwise().sum();
  BarycentricResult out;
  out.weights = w / total;
  out.gradients.resize(dim_, n);
  for (std::size_t m = 0; m < n; ++m) {
    const Eigen::Vector3d g = (dw.col(m) - out.weights[m] * dtotal) / total;
    out.gradients.col(m) = g.head(dim_);
  }
  return out;
}

Eigen::VectorXd Polytope::project(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  if (contains(p)) return Eigen::VectorXd(p);
  const Eigen::Vector3d x = pad(p);
  if (dim_ == 1) {
    const double lo = std::min(vertices_[0].x(), vertices_[1].x());
    const double hi = std::max(vertices_[0].x(), vertices_[1].x());
    return Eigen::VectorXd::Constant(1, std::clamp(x.x(), lo, hi));
  }

  Eigen::Vector3d best = x;
  double best_dist = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::Vector3d& q) {
    const double d = (q - x).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = q;
    }
  };

  if (dim_ == 2) {
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) consider(closest_on_segment(x, vertices_[i], vertices_[(i + 1) % n]));
  } else {
    for (const auto& f : facets_) {
      const double h = f.offset - f.normal.dot(x);
      const Eigen::Vector3d q = x + h * f.normal;
      bool inside = true;
      const std::size_t k = f.loop.size();
      for (std::size_t j = 0; j < k && inside; ++j) {
        const Eigen::Vector3d& a = vertices_[f.loop[j]];
        const Eigen::Vector3d& b = vertices_[f.loop[(j + 1) % k]];
        inside = (b - a).cross(q - a).dot(f.normal) >= 0.0;
      }
      if (inside) {
        consider(q);
      } else {
        for (std::size_t j = 0; j < k; ++j)
          consider(closest_on_segment(x, vertices_[f.loop[j]], vertices_[f.loop[(j + 1) % k]]));
      }
    }
  }
  return unpad(best);
}

Eigen::VectorXd Polytope::centroid() const {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& v : vertices_) c += v;
  return unpad(c / static_cast<double>(vertices_.size()));
}

Eigen::VectorXd Polytope::sample_interior(std::optional<std::uint64_t> seed) const {
  const Eigen::VectorXd c = centroid();
  if (!seed) return c;
  std::mt19937_64 rng(*seed);
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd weights(vertices_.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights[i] = expo(rng) + 1e-12;
  weights /= weights.sum();
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < vertices_.size(); ++i) q += weights[static_cast<Eigen::Index>(i)] * vertices_[i];
  const Eigen::VectorXd point = unpad(q);
  return c + 0.999 * (point - c);
}

std::string Polytope::describe() const { return name_; }

}  // namespace mmtopo
