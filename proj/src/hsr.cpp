#include "snn/hsr.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace snn {

namespace {
using ConstMap = Eigen::Map<const Eigen::VectorXd>;
}

HsrIndex::HsrIndex(const std::vector<Vector>& points, HsrBackend backend)
    : d_(points.empty() ? -1 : static_cast<int>(points.front().size())),
      backend_(backend) {
  for (const auto& p : points)
    if (static_cast<int>(p.size()) != d_)
      throw ShapeError("HsrIndex: ragged point dimensions");
  coords_.resize(points.size() * static_cast<std::size_t>(std::max(d_, 0)));
  live_.assign(points.size(), 1);
  leaf_of_.assign(points.size(), -1);
  for (std::size_t i = 0; i < points.size(); ++i)
    Eigen::Map<Eigen::VectorXd>(&coords_[i * d_], d_) = points[i];
  live_count_ = points.size();
  if (backend_ == HsrBackend::BallTree && live_count_ > 0) rebuild();
}

bool HsrIndex::contains(int id) const {
  return id >= 0 && id < static_cast<int>(live_.size()) && live_[id];
}

const double* HsrIndex::point(int id) const {
  if (!contains(id)) throw MissingIdError("HsrIndex::point: id not live");
  return &coords_[static_cast<std::size_t>(id) * d_];
}

void HsrIndex::ensure_id(int id) {
  if (id < 0) throw std::invalid_argument("HsrIndex: negative id");
  if (id >= static_cast<int>(live_.size())) {
    live_.resize(id + 1, 0);
    leaf_of_.resize(id + 1, -1);
    coords_.resize(static_cast<std::size_t>(id + 1) * d_, 0.0);
  }
}

std::vector<int> HsrIndex::query(const HalfSpace& h) const {
  std::vector<int> out;
  if (d_ < 0) return out;
  if (static_cast<int>(h.a.size()) != d_)
    throw ShapeError("HsrIndex::query: dimension mismatch");
  if (backend_ == HsrBackend::BruteForce) {
    for (int id = 0; id < static_cast<int>(live_.size()); ++id) {
      if (!live_[id]) continue;
      ++predicate_evals_;
      if (h.a.dot(ConstMap(&coords_[static_cast<std::size_t>(id) * d_], d_)) > h.b)
        out.push_back(id);
    }
    return out;  // already ascending
  }
  if (root_ >= 0) query_node(root_, h, out);
  std::sort(out.begin(), out.end());
  return out;
}

void HsrIndex::query_node(int node, const HalfSpace& h,
                          std::vector<int>& out) const {
  const Node& n = nodes_[node];
  const double proj = h.a.dot(n.center);
  if (proj + n.radius <= h.b) return;  // fully outside
  if (proj - n.radius > h.b) {         // fully inside
    report_subtree(node, out);
    return;
  }
  if (n.is_leaf()) {
    for (int id : n.ids) {
      ++predicate_evals_;
      if (h.a.dot(ConstMap(&coords_[static_cast<std::size_t>(id) * d_], d_)) > h.b)
        out.push_back(id);
    }
    return;
  }
  query_node(n.left, h, out);
  query_node(n.right, h, out);
}

void HsrIndex::report_subtree(int node, std::vector<int>& out) const {
  const Node& n = nodes_[node];
  if (n.is_leaf()) {
    predicate_evals_ += n.ids.size();
    out.insert(out.end(), n.ids.begin(), n.ids.end());
    return;
  }
  report_subtree(n.left, out);
  report_subtree(n.right, out);
}

void HsrIndex::insert(int id, const Vector& point) {
  if (d_ < 0) d_ = static_cast<int>(point.size());
  if (static_cast<int>(point.size()) != d_)
    throw ShapeError("HsrIndex::insert: dimension mismatch");
  ensure_id(id);
  if (live_[id]) throw DuplicateIdError("HsrIndex::insert: id already live");
  Eigen::Map<Eigen::VectorXd>(&coords_[static_cast<std::size_t>(id) * d_], d_) =
      point;
  live_[id] = 1;
  ++live_count_;
  if (backend_ == HsrBackend::BallTree) insert_into_tree(id);
}

void HsrIndex::insert_into_tree(int id) {
  ConstMap p(&coords_[static_cast<std::size_t>(id) * d_], d_);
  if (root_ < 0) {
    Node leaf;
    leaf.center = p;
    leaf.radius = 0.0;
    leaf.ids.push_back(id);
    nodes_.push_back(std::move(leaf));
    root_ = static_cast<int>(nodes_.size()) - 1;
    leaf_of_[id] = root_;
    return;
  }
  int cur = root_;
  while (true) {
    Node& n = nodes_[cur];
    n.radius = std::max(n.radius, (p - n.center).norm());
    if (n.is_leaf()) break;
    double dl = (p - nodes_[n.left].center).squaredNorm();
    double dr = (p - nodes_[n.right].center).squaredNorm();
    cur = dl <= dr ? n.left : n.right;
  }
  nodes_[cur].ids.push_back(id);
  leaf_of_[id] = cur;
  if (nodes_[cur].ids.size() > 4 * kLeafCapacity) {
    rebuild();
  } else if (nodes_[cur].ids.size() > kLeafCapacity) {
    split_leaf(cur);
  }
}

void HsrIndex::split_leaf(int node) {
  std::vector<int> ids = nodes_[node].ids;
  const int n = static_cast<int>(ids.size());
  // split coordinate: maximum variance over the leaf's points
  int axis = 0;
  double best_var = -1.0;
  for (int c = 0; c < d_; ++c) {
    double s = 0.0, s2 = 0.0;
    for (int id : ids) {
      double v = coords_[static_cast<std::size_t>(id) * d_ + c];
      s += v;
      s2 += v * v;
    }
    double var = s2 / n - (s / n) * (s / n);
    if (var > best_var) {
      best_var = var;
      axis = c;
    }
  }
  if (best_var <= 0.0) return;  // degenerate leaf, keep oversized
  auto coord = [&](int id) {
    return coords_[static_cast<std::size_t>(id) * d_ + axis];
  };
  int mid = n / 2;
  std::nth_element(ids.begin(), ids.begin() + mid, ids.end(),
                   [&](int a, int b) { return coord(a) < coord(b); });
  auto make_leaf = [&](std::vector<int> leaf_ids) {
    Node leaf;
    leaf.center = Vector::Zero(d_);
    for (int id : leaf_ids)
      leaf.center += ConstMap(&coords_[static_cast<std::size_t>(id) * d_], d_);
    leaf.center /= static_cast<double>(leaf_ids.size());
    leaf.radius = 0.0;
    for (int id : leaf_ids) {
      double dist =
          (ConstMap(&coords_[static_cast<std::size_t>(id) * d_], d_) - leaf.center)
              .norm();
      leaf.radius = std::max(leaf.radius, dist);
    }
    leaf.ids = std::move(leaf_ids);
    nodes_.push_back(std::move(leaf));
    return static_cast<int>(nodes_.size()) - 1;
  };
  int left = make_leaf({ids.begin(), ids.begin() + mid});
  int right = make_leaf({ids.begin() + mid, ids.end()});
  for (int id : nodes_[left].ids) leaf_of_[id] = left;
  for (int id : nodes_[right].ids) leaf_of_[id] = right;
  nodes_[node].ids.clear();
  nodes_[node].ids.shrink_to_fit();
  nodes_[node].left = left;
  nodes_[node].right = right;
}

void HsrIndex::erase(int id) {
  if (!contains(id)) throw MissingIdError("HsrIndex::erase: id not live");
  live_[id] = 0;
  --live_count_;
  ++deletions_since_build_;
  if (backend_ == HsrBackend::BruteForce) return;
  int leaf = leaf_of_[id];
  auto& ids = nodes_[leaf].ids;
  ids.erase(std::find(ids.begin(), ids.end(), id));
  leaf_of_[id] = -1;
  if (deletions_since_build_ * 2 > live_count_) rebuild();
}

int HsrIndex::build(std::vector<int>& ids, int begin, int end) {
  Node node;
  const int n = end - begin;
  node.center = Vector::Zero(d_);
  for (int i = begin; i < end; ++i)
    node.center += ConstMap(&coords_[static_cast<std::size_t>(ids[i]) * d_], d_);
  node.center /= static_cast<double>(n);
  node.radius = 0.0;
  for (int i = begin; i < end; ++i) {
    double dist =
        (ConstMap(&coords_[static_cast<std::size_t>(ids[i]) * d_], d_) -
         node.center)
            .norm();
    node.radius = std::max(node.radius, dist);
  }

  bool leaf = n <= kLeafCapacity;
  int axis = 0;
  if (!leaf) {
    double best_var = -1.0;
    for (int c = 0; c < d_; ++c) {
      double s = 0.0, s2 = 0.0;
      for (int i = begin; i < end; ++i) {
        double v = coords_[static_cast<std::size_t>(ids[i]) * d_ + c];
        s += v;
        s2 += v * v;
      }
      double var = s2 / n - (s / n) * (s / n);
      if (var > best_var) {
        best_var = var;
        axis = c;
      }
    }
    if (best_var <= 0.0) leaf = true;  // all points identical
  }

  if (leaf) {
    node.ids.assign(ids.begin() + begin, ids.begin() + end);
    nodes_.push_back(std::move(node));
    int idx = static_cast<int>(nodes_.size()) - 1;
    for (int id : nodes_[idx].ids) leaf_of_[id] = idx;
    return idx;
  }

  int mid = begin + n / 2;
  auto coord = [&](int id) {
    return coords_[static_cast<std::size_t>(id) * d_ + axis];
  };
  std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end,
                   [&](int a, int b) { return coord(a) < coord(b); });
  nodes_.push_back(std::move(node));
  int idx = static_cast<int>(nodes_.size()) - 1;
  int left = build(ids, begin, mid);
  int right = build(ids, mid, end);
  nodes_[idx].left = left;
  nodes_[idx].right = right;
  return idx;
}

void HsrIndex::rebuild() {
  nodes_.clear();
  root_ = -1;
  deletions_since_build_ = 0;
  ++rebuilds_;
  std::vector<int> ids;
  ids.reserve(live_count_);
  for (int id = 0; id < static_cast<int>(live_.size()); ++id)
    if (live_[id]) ids.push_back(id);
  std::fill(leaf_of_.begin(), leaf_of_.end(), -1);
  if (!ids.empty()) root_ = build(ids, 0, static_cast<int>(ids.size()));
}

void HsrIndex::dump_tree(std::ostream& os) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    os << (n.is_leaf() ? "leaf " : "node ") << i << " center";
    for (int c = 0; c < d_; ++c) os << ' ' << n.center[c];
    os << " radius " << n.radius;
    if (n.is_leaf()) {
      os << " ids";
      for (int id : n.ids) os << ' ' << id;
    } else {
      os << " children " << n.left << ' ' << n.right;
    }
    os << '\n';
  }
}

}  // namespace snn
