#include "fragflow/blossom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <limits>

namespace fragflow::matching {

namespace {

using int64 = long long;
constexpr int64 kInf = std::numeric_limits<int64>::max() / 4;

// Dense O(n^3) maximum-weight matching (not necessarily perfect) with
// blossom shrinking and integer duals. Vertices are 1-based; ids above n
// denote shrunken blossoms. Edge weights must be positive integers.
struct BlossomSolver {
  int n, n_x = 0, t = 0;
  struct E {
    int u = 0, v = 0;
    int64 w = 0;
  };
  std::vector<std::vector<E>> g;
  std::vector<int64> lab;
  std::vector<int> match, slack, st, pa, S, vis;
  std::vector<std::vector<int>> flower, flower_from;
  std::deque<int> q;

  explicit BlossomSolver(int n_atoms) : n(n_atoms) {
    int m = n * 2 + 1;
    g.assign(m, std::vector<E>(m));
    for (int u = 0; u < m; ++u)
      for (int v = 0; v < m; ++v) g[u][v] = E{u, v, 0};
    lab.assign(m, 0);
    match.assign(m, 0);
    slack.assign(m, 0);
    st.assign(m, 0);
    pa.assign(m, 0);
    S.assign(m, -1);
    vis.assign(m, 0);
    flower.assign(m, {});
    flower_from.assign(m, std::vector<int>(n + 1, 0));
  }

  int64 e_delta(const E& e) const { return lab[e.u] + lab[e.v] - g[e.u][e.v].w * 2; }

  void update_slack(int u, int x) {
    if (!slack[x] || e_delta(g[u][x]) < e_delta(g[slack[x]][x])) slack[x] = u;
  }
  void set_slack(int x) {
    slack[x] = 0;
    for (int u = 1; u <= n; ++u)
      if (g[u][x].w > 0 && st[u] != x && S[st[u]] == 0) update_slack(u, x);
  }
  void q_push(int x) {
    if (x <= n) {
      q.push_back(x);
    } else {
      for (int y : flower[x]) q_push(y);
    }
  }
  void set_st(int x, int b) {
    st[x] = b;
    if (x > n)
      for (int y : flower[x]) set_st(y, b);
  }
  int get_pr(int b, int xr) {
    int pr = static_cast<int>(std::find(flower[b].begin(), flower[b].end(), xr) -
                              flower[b].begin());
    if (pr % 2 == 1) {
      std::reverse(flower[b].begin() + 1, flower[b].end());
      return static_cast<int>(flower[b].size()) - pr;
    }
    return pr;
  }
  void set_match(int u, int v) {
    match[u] = g[u][v].v;
    if (u <= n) return;
    E e = g[u][v];
    int xr = flower_from[u][e.u];
    int pr = get_pr(u, xr);
    for (int i = 0; i < pr; ++i) set_match(flower[u][i], flower[u][i ^ 1]);
    set_match(xr, v);
    std::rotate(flower[u].begin(), flower[u].begin() + pr, flower[u].end());
  }
  void augment(int u, int v) {
    for (;;) {
      int xnv = st[match[u]];
      set_match(u, v);
      if (!xnv) return;
      set_match(xnv, st[pa[xnv]]);
      u = st[pa[xnv]];
      v = xnv;
    }
  }
  int get_lca(int u, int v) {
    for (++t; u || v; std::swap(u, v)) {
      if (u == 0) continue;
      if (vis[u] == t) return u;
      vis[u] = t;
      u = st[match[u]];
      if (u) u = st[pa[u]];
    }
    return 0;
  }
  void add_blossom(int u, int lca, int v) {
    int b = n + 1;
    while (b <= n_x && st[b]) ++b;
    if (b > n_x) ++n_x;
    lab[b] = 0;
    S[b] = 0;
    match[b] = match[lca];
    flower[b].clear();
    flower[b].push_back(lca);
    for (int x = u, y; x != lca; x = st[pa[y]]) {
      flower[b].push_back(x);
      y = st[match[x]];
      flower[b].push_back(y);
      q_push(y);
    }
    std::reverse(flower[b].begin() + 1, flower[b].end());
    for (int x = v, y; x != lca; x = st[pa[y]]) {
      flower[b].push_back(x);
      y = st[match[x]];
      flower[b].push_back(y);
      q_push(y);
    }
    set_st(b, b);
    for (int x = 1; x <= n_x; ++x) g[b][x].w = g[x][b].w = 0;
    for (int x = 1; x <= n; ++x) flower_from[b][x] = 0;
    for (int xs : flower[b]) {
      for (int x = 1; x <= n_x; ++x)
        if (g[b][x].w == 0 || e_delta(g[xs][x]) < e_delta(g[b][x])) {
          g[b][x] = g[xs][x];
          g[x][b] = g[x][xs];
        }
      for (int x = 1; x <= n; ++x)
        if (flower_from[xs][x]) flower_from[b][x] = xs;
    }
    set_slack(b);
  }
  void expand_blossom(int b) {
    for (int x : flower[b]) set_st(x, x);
    int xr = flower_from[b][g[b][pa[b]].u];
    int pr = get_pr(b, xr);
    for (int i = 0; i < pr; i += 2) {
      int xs = flower[b][i], xns = flower[b][i + 1];
      pa[xs] = g[xns][xs].u;
      S[xs] = 1;
      S[xns] = 0;
      slack[xs] = 0;
      set_slack(xns);
      q_push(xns);
    }
    S[xr] = 1;
    pa[xr] = pa[b];
    for (size_t i = pr + 1; i < flower[b].size(); ++i) {
      S[flower[b][i]] = -1;
      set_slack(flower[b][i]);
    }
    st[b] = 0;
  }
  bool on_found_edge(const E& e) {
    int u = st[e.u], v = st[e.v];
    if (S[v] == -1) {
      pa[v] = e.u;
      S[v] = 1;
      int nu = st[match[v]];
      slack[v] = slack[nu] = 0;
      S[nu] = 0;
      q_push(nu);
    } else if (S[v] == 0) {
      int lca = get_lca(u, v);
      if (!lca) {
        augment(u, v);
        augment(v, u);
        return true;
      }
      add_blossom(u, lca, v);
    }
    return false;
  }
  bool matching() {
    std::fill(S.begin(), S.begin() + n_x + 1, -1);
    std::fill(slack.begin(), slack.begin() + n_x + 1, 0);
    q.clear();
    for (int x = 1; x <= n_x; ++x)
      if (st[x] == x && !match[x]) {
        pa[x] = 0;
        S[x] = 0;
        q_push(x);
      }
    if (q.empty()) return false;
    for (;;) {
      while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        if (S[st[u]] == 1) continue;
        for (int v = 1; v <= n; ++v)
          if (g[u][v].w > 0 && st[u] != st[v]) {
            if (e_delta(g[u][v]) == 0) {
              if (on_found_edge(g[u][v])) return true;
            } else {
              update_slack(u, st[v]);
            }
          }
      }
      int64 d = kInf;
      for (int b = n + 1; b <= n_x; ++b)
        if (st[b] == b && S[b] == 1) d = std::min(d, lab[b] / 2);
      for (int x = 1; x <= n_x; ++x)
        if (st[x] == x && slack[x]) {
          if (S[x] == -1)
            d = std::min(d, e_delta(g[slack[x]][x]));
          else if (S[x] == 0)
            d = std::min(d, e_delta(g[slack[x]][x]) / 2);
        }
      for (int u = 1; u <= n; ++u) {
        if (S[st[u]] == 0) {
          if (lab[u] <= d) return false;  // free-vertex dual exhausted
          lab[u] -= d;
        } else if (S[st[u]] == 1) {
          lab[u] += d;
        }
      }
      for (int b = n + 1; b <= n_x; ++b)
        if (st[b] == b) {
          if (S[b] == 0)
            lab[b] += d * 2;
          else if (S[b] == 1)
            lab[b] -= d * 2;
        }
      for (int x = 1; x <= n_x; ++x)
        if (st[x] == x && slack[x] && st[slack[x]] != x &&
            e_delta(g[slack[x]][x]) == 0)
          if (on_found_edge(g[slack[x]][x])) return true;
      for (int b = n + 1; b <= n_x; ++b)
        if (st[b] == b && S[b] == 1 && lab[b] == 0) expand_blossom(b);
    }
  }
  void solve() {
    n_x = n;
    int64 w_max = 0;
    for (int u = 1; u <= n; ++u) {
      st[u] = u;
      flower_from[u][u] = u;
      for (int v = 1; v <= n; ++v) w_max = std::max(w_max, g[u][v].w);
    }
    for (int u = 1; u <= n; ++u) lab[u] = w_max;
    while (matching()) {
    }
  }
};

}  // namespace

std::vector<int> max_weight_matching(int n, const std::vector<WeightedEdge>& edges) {
  std::vector<int> mate(n, -1);
  if (n < 2 || edges.empty()) return mate;

  double w_abs = 0.0;
  for (const auto& e : edges) w_abs = std::max(w_abs, std::abs(e.w));
  if (w_abs == 0.0) return mate;
  double scale = static_cast<double>(1LL << 40) / w_abs;

  BlossomSolver solver(n);
  bool any = false;
  for (const auto& e : edges) {
    if (e.u == e.v || e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) continue;
    int64 w = std::llround(e.w * scale);
    if (w <= 0) continue;  // nonpositive edges never improve the maximum
    int u = e.u + 1, v = e.v + 1;
    if (w > solver.g[u][v].w) {
      solver.g[u][v].w = w;
      solver.g[v][u].w = w;
    }
    any = true;
  }
  if (!any) return mate;
  solver.solve();
  for (int u = 1; u <= n; ++u)
    if (solver.match[u]) mate[u - 1] = solver.match[u] - 1;
  return mate;
}

std::vector<int> max_cardinality_matching(int n,
                                          const std::vector<std::pair<int, int>>& edges) {
  std::vector<WeightedEdge> we;
  we.reserve(edges.size());
  for (auto [u, v] : edges) we.push_back({u, v, 1.0});
  return max_weight_matching(n, we);
}

}  // namespace fragflow::matching
