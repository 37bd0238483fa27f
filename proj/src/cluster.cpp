#include "archrec/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "archrec/common.hpp"
#include "archrec/embed.hpp"

namespace archrec::cluster {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void OpticsConfig::validate() const {
  if (min_cluster_size < 2) throw Error("cluster", "min_cluster_size must be >= 2");
  if (!(xi > 0.0 && xi < 1.0)) throw Error("cluster", "xi must be in (0, 1)");
  if (!(max_eps > 0.0)) throw Error("cluster", "max_eps must be positive");
}

OpticsOrdering optics_order(const Eigen::MatrixXd& points, const OpticsConfig& cfg) {
  return optics_order_from_distances(embed::pairwise_distances(points), cfg);
}

OpticsOrdering optics_order_from_distances(const Eigen::MatrixXd& dist, const OpticsConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(dist.rows());
  if (n < cfg.min_cluster_size) throw Error("cluster", "fewer points than min_cluster_size");

  OpticsOrdering out;
  out.reachability.assign(n, kInf);
  out.core_distance.assign(n, kInf);
  out.predecessor.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(n);
    for (int j = 0; j < n; ++j) row[j] = dist(i, j);
    std::nth_element(row.begin(), row.begin() + (cfg.min_cluster_size - 1), row.end());
    const double core = row[cfg.min_cluster_size - 1];
    out.core_distance[i] = core <= cfg.max_eps ? core : kInf;
  }

  // Seeds keyed by (reachability, index) so the smallest index wins ties;
  // unreached points enter with infinite reachability.
  std::set<std::pair<double, int>> seeds;
  for (int i = 0; i < n; ++i) seeds.emplace(kInf, i);
  std::vector<bool> processed(n, false);
  while (!seeds.empty()) {
    const int p = seeds.begin()->second;
    seeds.erase(seeds.begin());
    processed[p] = true;
    out.order.push_back(p);
    if (std::isinf(out.core_distance[p])) continue;
    for (int q = 0; q < n; ++q) {
      if (processed[q] || dist(p, q) > cfg.max_eps) continue;
      const double reach = std::max(out.core_distance[p], dist(p, q));
      if (reach < out.reachability[q]) {
        seeds.erase({out.reachability[q], q});
        out.reachability[q] = reach;
        out.predecessor[q] = p;
        seeds.emplace(reach, q);
      }
    }
  }
  return out;
}

namespace {

struct SteepDownArea {
  int start;
  int end;
  double mib;
};

int extend_region(const std::vector<bool>& steep, const std::vector<bool>& xward, int start, int min_samples) {
  const int n = static_cast<int>(steep.size());
  int non_xward = 0;
  int end = start;
  for (int i = start; i < n; ++i) {
    if (steep[i]) {
      non_xward = 0;
      end = i;
    } else if (!xward[i]) {
      // Not steep but still moving the same way; tolerate up to
      // min_samples such points in a row.
      if (++non_xward > min_samples) break;
    } else {
      return end;
    }
  }
  return end;
}

void update_filter_sdas(std::vector<SteepDownArea>& sdas, double mib, double xi_complement,
                        const std::vector<double>& r) {
  if (std::isinf(mib)) {
    sdas.clear();
    return;
  }
  std::erase_if(sdas, [&](const SteepDownArea& d) { return mib > r[d.start] * xi_complement; });
  for (auto& d : sdas) d.mib = std::max(d.mib, mib);
}

bool correct_predecessor(const std::vector<double>& r, const std::vector<int>& pred_plot,
                         const std::vector<int>& order, int& s, int& e) {
  while (s < e) {
    if (r[s] > r[e]) return true;
    const int pe = pred_plot[e];
    for (int i = s; i < e; ++i) {
      if (pe == order[i]) return true;
    }
    --e;
  }
  return false;
}

}  // namespace

ClusterAssignment extract_xi_clusters(const OpticsOrdering& ordering, const OpticsConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(ordering.order.size());
  ClusterAssignment out;
  out.labels.assign(n, -1);
  if (n == 0) return out;

  // Reachability plot with a trailing infinity so a cluster can close at the
  // end of the ordering.
  std::vector<double> r(n + 1);
  std::vector<int> pred_plot(n);
  for (int i = 0; i < n; ++i) {
    r[i] = ordering.reachability[ordering.order[i]];
    pred_plot[i] = ordering.predecessor[ordering.order[i]];
  }
  r[n] = kInf;

  const double xi_complement = 1.0 - cfg.xi;
  std::vector<bool> steep_up(n), steep_down(n), down(n), up(n);
  for (int i = 0; i < n; ++i) {
    const double ratio = r[i] / r[i + 1];  // NaN for inf/inf and 0/0
    steep_up[i] = ratio <= xi_complement;
    steep_down[i] = ratio >= 1.0 / xi_complement;
    down[i] = ratio > 1.0;
    up[i] = ratio < 1.0;
  }

  std::vector<SteepDownArea> sdas;
  std::vector<std::pair<int, int>> clusters;
  int index = 0;
  double mib = 0.0;
  for (int steep_index = 0; steep_index < n; ++steep_index) {
    if (!(steep_up[steep_index] || steep_down[steep_index])) continue;
    if (steep_index < index) continue;
    for (int i = index; i <= steep_index; ++i) mib = std::max(mib, r[i]);

    if (steep_down[steep_index]) {
      update_filter_sdas(sdas, mib, xi_complement, r);
      const int d_end = extend_region(steep_down, up, steep_index, cfg.min_cluster_size);
      sdas.push_back({steep_index, d_end, 0.0});
      index = d_end + 1;
      mib = r[index];
      continue;
    }

    update_filter_sdas(sdas, mib, xi_complement, r);
    const int u_start = steep_index;
    const int u_end = extend_region(steep_up, down, u_start, cfg.min_cluster_size);
    index = u_end + 1;
    mib = r[index];

    std::vector<std::pair<int, int>> found;
    for (const auto& d : sdas) {
      int c_start = d.start;
      int c_end = u_end;
      if (r[c_end + 1] * xi_complement < d.mib) continue;

      const double d_max = r[d.start];
      if (d_max * xi_complement >= r[c_end + 1]) {
        while (r[c_start + 1] > r[c_end + 1] && c_start < d.end) ++c_start;
      } else if (r[c_end + 1] * xi_complement >= d_max) {
        while (r[c_end - 1] > d_max && c_end > u_start) --c_end;
      }
      if (cfg.predecessor_correction && !correct_predecessor(r, pred_plot, ordering.order, c_start, c_end)) {
        continue;
      }
      if (c_end - c_start + 1 < cfg.min_cluster_size) continue;
      if (c_start > d.end) continue;
      if (c_end < u_start) continue;
      // A span covering every point separates nothing from anything.
      if (c_start == 0 && c_end == n - 1) continue;
      found.emplace_back(c_start, c_end);
    }
    // Inner (smaller) clusters first.
    clusters.insert(clusters.end(), found.rbegin(), found.rend());
  }

  std::vector<int> plot_labels(n, -1);
  int label = 0;
  for (const auto& [s, e] : clusters) {
    bool free = true;
    for (int i = s; i <= e; ++i) free = free && plot_labels[i] == -1;
    if (!free) continue;
    for (int i = s; i <= e; ++i) plot_labels[i] = label;
    ++label;
  }
  for (int i = 0; i < n; ++i) out.labels[ordering.order[i]] = plot_labels[i];
  out.n_clusters = label;
  out.spans = std::move(clusters);
  return out;
}

ClusterAssignment optics_cluster(const Eigen::MatrixXd& points, const OpticsConfig& cfg) {
  return extract_xi_clusters(optics_order(points, cfg), cfg);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("cluster", "label vectors differ in length");
  const auto n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : joint) index += comb2(v);
  for (const auto& [k, v] : ca) sa += comb2(v);
  for (const auto& [k, v] : cb) sb += comb2(v);
  const double expected = n > 1 ? sa * sb / comb2(n) : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace archrec::cluster
