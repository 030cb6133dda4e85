#include "snn/network.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace snn {

TwoLayerNet init_net(int d, int m, double B, Rng& rng) {
  if (d < 1 || m < 1 || B <= 0.0)
    throw std::invalid_argument("init_net: require d >= 1, m >= 1, B > 0");
  TwoLayerNet net;
  net.d = d;
  net.m = m;
  net.W.resize(2 * m, d);
  net.a.resize(2 * m);
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < d; ++j) net.W(r, j) = rng.gaussian();
    net.a[r] = (rng.next_u64() & 1u) ? B : -B;
  }
  net.W.bottomRows(m) = net.W.topRows(m);
  net.a.tail(m) = -net.a.head(m);
  return net;
}

double forward_dense(const TwoLayerNet& net, const Vector& x) {
  if (static_cast<int>(x.size()) != net.d)
    throw ShapeError("forward_dense: dimension mismatch");
  Vector z = net.W * x;
  const double scale = 1.0 / std::sqrt(2.0 * net.m);
  double sum = 0.0;
  for (int r = 0; r < net.neurons(); ++r)
    sum += net.a[r] * shifted_relu(z[r], net.b0);
  return scale * sum;
}

double forward_sparse(const TwoLayerNet& net, const Vector& x,
                      const FireSet& fire) {
  if (static_cast<int>(x.size()) != net.d)
    throw ShapeError("forward_sparse: dimension mismatch");
  const double scale = 1.0 / std::sqrt(2.0 * net.m);
  double sum = 0.0;
  for (int r : fire) {
    double z = net.W.row(r).dot(x);
    assert(z > net.b0 && "forward_sparse: stale fire set");
    sum += net.a[r] * shifted_relu(z, net.b0);
  }
  return scale * sum;
}

FireSet fire_set_dense(const TwoLayerNet& net, const Vector& x) {
  if (static_cast<int>(x.size()) != net.d)
    throw ShapeError("fire_set_dense: dimension mismatch");
  Vector z = net.W * x;
  FireSet fire;
  for (int r = 0; r < net.neurons(); ++r)
    if (z[r] > net.b0) fire.push_back(r);
  return fire;
}

Vector per_sample_residuals(const TwoLayerNet& net, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("per_sample_residuals: empty batch");
  Vector res(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    res[i] = forward_dense(net, batch[i].x) - batch[i].y;
  return res;
}

double l2_loss(const TwoLayerNet& net, const Batch& batch) {
  return 0.5 * per_sample_residuals(net, batch).squaredNorm();
}

SparseGradient sparse_gradient(const TwoLayerNet& net, const Batch& batch,
                               const std::vector<FireSet>& fire_sets) {
  if (fire_sets.size() != batch.size())
    throw ShapeError("sparse_gradient: one fire set per sample required");
  const double scale = 1.0 / std::sqrt(2.0 * net.m);
  // residual u_i - y_i via the sparse forward, then scatter onto fired rows
  std::map<int, Vector> rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double resid = forward_sparse(net, batch[i].x, fire_sets[i]) - batch[i].y;
    for (int r : fire_sets[i]) {
      auto [it, inserted] = rows.try_emplace(r, Vector::Zero(net.d));
      it->second += (scale * net.a[r] * resid) * batch[i].x;
    }
  }
  SparseGradient grad;
  grad.rows.assign(rows.begin(), rows.end());
  return grad;
}

namespace {
constexpr std::uint64_t kMagic = 0x32764c454e4e32ull;  // "2NNEL v2"-ish tag
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_net(const TwoLayerNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_net: cannot open " + path);
  write_pod(os, kMagic);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint32_t>(net.d));
  write_pod(os, static_cast<std::uint32_t>(net.m));
  double B = net.m > 0 ? std::abs(net.a[0]) : 0.0;
  write_pod(os, B);
  write_pod(os, net.b0);
  for (int r = 0; r < net.neurons(); ++r)
    for (int j = 0; j < net.d; ++j) write_pod(os, net.W(r, j));
  for (int r = 0; r < net.neurons(); ++r) write_pod(os, net.a[r]);
  if (!os) throw std::runtime_error("save_net: write failed on " + path);
}

TwoLayerNet load_net(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_net: cannot open " + path);
  std::uint64_t magic = 0;
  std::uint32_t version = 0, d = 0, m = 0;
  read_pod(is, magic);
  read_pod(is, version);
  if (magic != kMagic || version != kVersion)
    throw std::runtime_error("load_net: bad magic or version in " + path);
  read_pod(is, d);
  read_pod(is, m);
  double B = 0.0, b0 = 0.0;
  read_pod(is, B);
  read_pod(is, b0);
  TwoLayerNet net;
  net.d = static_cast<int>(d);
  net.m = static_cast<int>(m);
  net.b0 = b0;
  net.W.resize(2 * net.m, net.d);
  net.a.resize(2 * net.m);
  for (int r = 0; r < net.neurons(); ++r)
    for (int j = 0; j < net.d; ++j) read_pod(is, net.W(r, j));
  for (int r = 0; r < net.neurons(); ++r) read_pod(is, net.a[r]);
  if (!is) throw std::runtime_error("load_net: truncated file " + path);
  return net;
}

}  // namespace snn
