#include "chebotarev/continua.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace chebotarev {

AnchorSet::AnchorSet(const Surface& s, std::vector<cplx> points) : pts_(std::move(points)) {
  for (std::size_t i = 0; i < pts_.size(); ++i) {
    if (!std::isfinite(pts_[i].real()) || !std::isfinite(pts_[i].imag()))
      throw InputError("anchor " + std::to_string(i) + " is not finite");
    if (s.is_torus() && s.distance(pts_[i], s.infinity_coord()) <= 1e-12)
      throw InputError("anchor " + std::to_string(i) + " coincides with infinity");
    for (std::size_t j = 0; j < i; ++j)
      if (s.distance(pts_[i], pts_[j]) <= 1e-12)
        throw InputError("anchors " + std::to_string(j) + " and " + std::to_string(i) + " coincide");
  }
}

ConnectivityPattern::ConnectivityPattern(int n, std::vector<HomotopyLabel> labels) : n_(n) {
  for (const auto& l : labels) {
    if (l.i < 0 || l.j < 0 || l.i >= n || l.j >= n) throw InputError("inadmissible pattern");
    HomotopyLabel c = l;
    if (c.i > c.j || (c.i == c.j && (c.m < 0 || (c.m == 0 && c.n < 0)))) c = c.inverse();
    bool dup = false;
    for (const auto& e : labels_)
      if (e.i == c.i && e.j == c.j && e.m == c.m && e.n == c.n) dup = true;
    if (!dup) labels_.push_back(c);
  }
}

int ConnectivityPattern::max_winding() const {
  int w = 0;
  for (const auto& l : labels_) w = std::max({w, std::abs(l.m), std::abs(l.n)});
  return w;
}

bool ConnectivityPattern::admissible() const {
  if (n_ < 1) return false;
  std::vector<bool> seen(n_, false);
  for (const auto& l : labels_) {
    // A loop e_i -> e_i with trivial winding is the trivial class.
    if (l.i == l.j && l.m == 0 && l.n == 0) continue;
    seen[l.i] = seen[l.j] = true;
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

void ConnectivityPattern::validate() const {
  if (!admissible()) throw InputError("inadmissible pattern");
}

std::vector<HomotopyLabel> ConnectivityPattern::entry(int i, int j) const {
  std::vector<HomotopyLabel> out;
  for (const auto& l : labels_) {
    if (l.i == i && l.j == j) out.push_back(l);
    else if (l.i == j && l.j == i) out.push_back(l.inverse());
  }
  return out;
}

// ---- PolyContinuum ----

int PolyContinuum::add_node(cplx z, int anchor) {
  nodes.push_back(z);
  anchor_of.push_back(anchor);
  return static_cast<int>(nodes.size()) - 1;
}

void PolyContinuum::add_edge(int a, int b, Lift shift) { edges.push_back({a, b, shift}); }

int PolyContinuum::node_of_anchor(int anchor) const {
  for (std::size_t k = 0; k < anchor_of.size(); ++k)
    if (anchor_of[k] == anchor) return static_cast<int>(k);
  return -1;
}

cplx PolyContinuum::edge_start(const Surface&, std::size_t e) const { return nodes[edges[e].a]; }

cplx PolyContinuum::edge_end(const Surface& s, std::size_t e) const {
  const auto& ed = edges[e];
  return nodes[ed.b] + s.lattice(ed.shift.m, ed.shift.n);
}

double PolyContinuum::edge_length(const Surface& s, std::size_t e) const {
  return std::abs(edge_end(s, e) - edge_start(s, e));
}

double PolyContinuum::total_length(const Surface& s) const {
  double t = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) t += edge_length(s, e);
  return t;
}

double PolyContinuum::max_edge_length(const Surface& s) const {
  double t = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) t = std::max(t, edge_length(s, e));
  return t;
}

std::vector<cplx> PolyContinuum::sample(const Surface& s, double step) const {
  std::vector<cplx> out(nodes.begin(), nodes.end());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const cplx a = edge_start(s, e), b = edge_end(s, e);
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / step)));
    for (int k = 1; k < n; ++k) out.push_back(a + (b - a) * (double(k) / n));
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<int> PolyContinuum::component_ids(int* count) const {
  UnionFind uf(static_cast<int>(nodes.size()));
  for (const auto& e : edges) uf.unite(e.a, e.b);
  std::vector<int> id(nodes.size());
  std::unordered_map<int, int> relabel;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const int r = uf.find(static_cast<int>(k));
    auto it = relabel.find(r);
    if (it == relabel.end()) it = relabel.emplace(r, static_cast<int>(relabel.size())).first;
    id[k] = it->second;
  }
  if (count) *count = static_cast<int>(relabel.size());
  return id;
}

int PolyContinuum::component_count() const {
  int c = 0;
  component_ids(&c);
  return c;
}

int PolyContinuum::component_count_bfs() const {
  std::vector<std::vector<int>> adj(nodes.size());
  for (const auto& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<bool> seen(nodes.size(), false);
  int count = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (seen[k]) continue;
    ++count;
    std::queue<int> q;
    q.push(static_cast<int>(k));
    seen[k] = true;
    while (!q.empty()) {
      const int x = q.front();
      q.pop();
      for (int y : adj[x])
        if (!seen[y]) {
          seen[y] = true;
          q.push(y);
        }
    }
  }
  return count;
}

void PolyContinuum::validate(const Surface& s, const AnchorSet& anchors, double h) const {
  if (anchor_of.size() != nodes.size()) throw InputError("anchor flags do not match nodes");
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const int k = node_of_anchor(static_cast<int>(a));
    if (k < 0) throw InputError("continuum misses anchor " + std::to_string(a));
    if (s.distance(nodes[k], anchors[a]) > 1e-9)
      throw InputError("anchor node " + std::to_string(a) + " is displaced");
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    if (ed.a < 0 || ed.b < 0 || ed.a >= (int)nodes.size() || ed.b >= (int)nodes.size())
      throw InputError("edge references a missing node");
    if (h > 0.0 && edge_length(s, e) > h * (1.0 + 1e-9)) throw InputError("edge longer than mesh");
    if (s.is_torus()) {
      const cplx a = edge_start(s, e), b = edge_end(s, e);
      const cplx inf = s.nearest_lift(s.infinity_coord(), 0.5 * (a + b));
      if (point_segment_distance(inf, a, b) < 1e-9) throw InputError("edge passes through infinity");
    }
  }
}

// ---- geometry ----

double point_segment_distance(cplx z, cplx a, cplx b) {
  const cplx d = b - a;
  const double L2 = std::norm(d);
  if (L2 == 0.0) return std::abs(z - a);
  const double t = std::clamp(((z - a) * std::conj(d)).real() / L2, 0.0, 1.0);
  return std::abs(z - (a + t * d));
}

namespace {
double cross(cplx u, cplx v) { return u.real() * v.imag() - u.imag() * v.real(); }
}  // namespace

double segment_segment_distance(cplx a, cplx b, cplx c, cplx d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

// ---- covering-space connectivity ----

namespace {

struct Cover {
  int W = 0;        // translates (m, n) with |m|, |n| <= W
  int T = 1;        // (2W+1)^2
  int nodes = 0;
  int tindex(int m, int n) const { return (n + W) * (2 * W + 1) + (m + W); }
  bool inside(int m, int n) const { return std::abs(m) <= W && std::abs(n) <= W; }
  int id(int node, int m, int n) const { return node * T + tindex(m, n); }
};

struct LiftedSegment {
  cplx a, b;
  int na, nb;       // lifted node ids of the endpoints
  int edge;         // base edge
  int tm, tn;       // translate of the start
};

// Union-find over lifted nodes; merges through edges and through segments
// closer than merge_dist. Optionally reports base-edge pairs that touch.
UnionFind cover_union_find(const Surface& s, const PolyContinuum& K, const Cover& cv,
                           double merge_dist, std::vector<std::pair<int, int>>* touching) {
  UnionFind uf(cv.nodes * cv.T);
  std::vector<LiftedSegment> segs;
  for (std::size_t e = 0; e < K.edges.size(); ++e) {
    const auto& ed = K.edges[e];
    const cplx a0 = K.edge_start(s, e), b0 = K.edge_end(s, e);
    for (int n = -cv.W; n <= cv.W; ++n)
      for (int m = -cv.W; m <= cv.W; ++m) {
        const int m2 = m + ed.shift.m, n2 = n + ed.shift.n;
        if (!cv.inside(m2, n2)) continue;
        const cplx t = s.lattice(m, n);
        LiftedSegment ls{a0 + t, b0 + t, cv.id(ed.a, m, n), cv.id(ed.b, m2, n2), (int)e, m, n};
        uf.unite(ls.na, ls.nb);
        segs.push_back(ls);
      }
  }
  if (merge_dist <= 0.0 || segs.empty()) return uf;
  // Spatial hash on segment bounding boxes.
  double cell = merge_dist;
  for (const auto& sg : segs) cell = std::max(cell, std::abs(sg.b - sg.a));
  auto key = [](long long i, long long j) { return (i << 32) ^ (j & 0xffffffffLL); };
  std::unordered_map<long long, std::vector<int>> grid;
  auto cells_of = [&](const LiftedSegment& sg, double pad, auto&& fn) {
    const double x0 = std::min(sg.a.real(), sg.b.real()) - pad, x1 = std::max(sg.a.real(), sg.b.real()) + pad;
    const double y0 = std::min(sg.a.imag(), sg.b.imag()) - pad, y1 = std::max(sg.a.imag(), sg.b.imag()) + pad;
    for (long long i = (long long)std::floor(x0 / cell); i <= (long long)std::floor(x1 / cell); ++i)
      for (long long j = (long long)std::floor(y0 / cell); j <= (long long)std::floor(y1 / cell); ++j)
        fn(key(i, j));
  };
  for (int k = 0; k < (int)segs.size(); ++k)
    cells_of(segs[k], 0.0, [&](long long c) { grid[c].push_back(k); });
  std::vector<int> stamp(segs.size(), -1);
  for (int k = 0; k < (int)segs.size(); ++k) {
    cells_of(segs[k], merge_dist, [&](long long c) {
      auto it = grid.find(c);
      if (it == grid.end()) return;
      for (int o : it->second) {
        if (o <= k || stamp[o] == k) continue;
        stamp[o] = k;
        if (segment_segment_distance(segs[k].a, segs[k].b, segs[o].a, segs[o].b) <= merge_dist) {
          uf.unite(segs[k].na, segs[o].na);
          if (touching) touching->push_back({segs[k].edge, segs[o].edge});
        }
      }
    });
  }
  return uf;
}

}  // namespace

bool contains_class(const Surface& s, const PolyContinuum& K, const AnchorSet& anchors,
                    const HomotopyLabel& label, double eps, int window) {
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  const int ni = K.node_of_anchor(label.i), nj = K.node_of_anchor(label.j);
  if (ni < 0 || nj < 0) return false;
  Cover cv;
  cv.nodes = static_cast<int>(K.nodes.size());
  if (!s.is_torus()) {
    cv.W = 0;
    cv.T = 1;
    UnionFind uf = cover_union_find(s, K, cv, 2.0 * eps, nullptr);
    return uf.find(cv.id(ni, 0, 0)) == uf.find(cv.id(nj, 0, 0));
  }
  // Node coordinates may be lifts of the anchors; account for their offsets.
  const Lift oi = s.lattice_coordinates(K.nodes[ni] - anchors[label.i], 1e-6);
  const Lift oj = s.lattice_coordinates(K.nodes[nj] - anchors[label.j], 1e-6);
  int W = window;
  if (W < 0) W = std::max(std::abs(label.m), std::abs(label.n)) + 1;
  W += std::max({std::abs(oi.m), std::abs(oi.n), std::abs(oj.m), std::abs(oj.n)});
  cv.W = W;
  cv.T = (2 * W + 1) * (2 * W + 1);
  UnionFind uf = cover_union_find(s, K, cv, 2.0 * eps, nullptr);
  // Start at e_i itself (node i translated by -oi), target e_j + m + n tau.
  const int start = cv.id(ni, -oi.m, -oi.n);
  const int tm = label.m - oj.m, tn = label.n - oj.n;
  if (!cv.inside(tm, tn)) return false;
  return uf.find(start) == uf.find(cv.id(nj, tm, tn));
}

int fattened_component_count(const Surface& s, const PolyContinuum& K, double eps) {
  const int nn = static_cast<int>(K.nodes.size());
  UnionFind base(nn);
  for (const auto& e : K.edges) base.unite(e.a, e.b);
  Cover cv;
  cv.nodes = nn;
  cv.W = s.is_torus() ? 1 : 0;
  cv.T = (2 * cv.W + 1) * (2 * cv.W + 1);
  std::vector<std::pair<int, int>> touching;
  cover_union_find(s, K, cv, 2.0 * eps, &touching);
  for (auto [e, f] : touching) base.unite(K.edges[e].a, K.edges[f].a);
  // Isolated nodes (no edges) within 2 eps of each other or of an edge.
  for (int k = 0; k < nn; ++k)
    for (int l = 0; l < k; ++l)
      if (s.distance(K.nodes[k], K.nodes[l]) <= 2.0 * eps) base.unite(k, l);
  for (int k = 0; k < nn; ++k)
    for (std::size_t e = 0; e < K.edges.size(); ++e) {
      const cplx a = K.edge_start(s, e), b = K.edge_end(s, e);
      const cplx z = s.nearest_lift(K.nodes[k], 0.5 * (a + b));
      if (point_segment_distance(z, a, b) <= 2.0 * eps) base.unite(k, K.edges[e].a);
    }
  int count = 0;
  for (int k = 0; k < nn; ++k)
    if (base.find(k) == k) ++count;
  return count;
}

bool exceeds_pattern(const Surface& s, const PolyContinuum& K, const AnchorSet& anchors,
                     const ConnectivityPattern& P, double eps) {
  P.validate();
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  for (const auto& l : P.labels())
    if (!contains_class(s, K, anchors, l, eps, P.max_winding() + 1)) return false;
  return fattened_component_count(s, K, eps) <= P.class_count();
}

std::vector<cplx> fatten(const Surface& s, const PolyContinuum& K, double eps) {
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  const double step = eps / 4.0;
  std::vector<cplx> out;
  const int rings = 4;
  auto disk = [&](cplx c) {
    out.push_back(c);
    for (int r = 1; r <= rings; ++r) {
      const double rad = eps * r / rings;
      const int m = std::max(6, static_cast<int>(std::ceil(2.0 * kPi * rad / step)));
      for (int k = 0; k < m; ++k) out.push_back(c + std::polar(rad, 2.0 * kPi * k / m));
    }
  };
  for (cplx z : K.nodes) disk(z);
  for (std::size_t e = 0; e < K.edges.size(); ++e) {
    const cplx a = K.edge_start(s, e), b = K.edge_end(s, e);
    const double L = std::abs(b - a);
    if (L == 0.0) continue;
    const cplx t = (b - a) / L, nrm = kI * t;
    const int na = std::max(1, static_cast<int>(std::ceil(L / step)));
    for (int i = 0; i <= na; ++i)
      for (int j = -rings; j <= rings; ++j)
        out.push_back(a + t * (L * i / na) + nrm * (eps * j / rings));
  }
  return out;
}

PolyContinuum refine(const Surface& s, const PolyContinuum& K, double h_new) {
  if (!(h_new > 0.0)) throw InputError("mesh must be positive");
  PolyContinuum R;
  R.nodes = K.nodes;
  R.anchor_of = K.anchor_of;
  for (std::size_t e = 0; e < K.edges.size(); ++e) {
    const auto& ed = K.edges[e];
    const cplx a = K.edge_start(s, e), b = K.edge_end(s, e);
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / h_new - 1e-12)));
    int prev = ed.a;
    for (int k = 1; k < n; ++k) {
      const int id = R.add_node(a + (b - a) * (double(k) / n));
      R.add_edge(prev, id);
      prev = id;
    }
    R.add_edge(prev, ed.b, ed.shift);
  }
  return R;
}

}  // namespace chebotarev
