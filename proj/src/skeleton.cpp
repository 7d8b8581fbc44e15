#include "lcc/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "lcc/errors.hpp"

namespace lcc {

std::vector<Edge> SkeletonGraph::edges() const {
  std::vector<Edge> all = base_edges;
  all.insert(all.end(), extra_links.begin(), extra_links.end());
  return all;
}

Tensor normalized_adjacency(std::size_t n, const std::vector<Edge>& edges) {
  Tensor a({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) a.at({i, i}) = 1.0;
  for (auto [u, v] : edges) {
    a.at({u, v}) = 1.0;
    a.at({v, u}) = 1.0;
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += a.at({i, j});
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a.at({i, j}) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return a;
}

SkeletonGraph SkeletonGraph::build(std::size_t node_count, std::vector<Edge> base_edges,
                                   std::vector<Edge> extra_links, std::size_t root) {
  if (node_count == 0) throw ConfigError("skeleton: node count must be positive");
  if (root >= node_count) throw ConfigError("skeleton: root " + std::to_string(root) + " out of range");
  auto check = [&](const std::vector<Edge>& es) {
    for (auto [u, v] : es) {
      if (u >= node_count || v >= node_count)
        throw ConfigError("skeleton: edge " + std::to_string(u) + "-" + std::to_string(v) +
                          " out of range for " + std::to_string(node_count) + " nodes");
      if (u == v) throw ConfigError("skeleton: self loop at node " + std::to_string(u));
    }
  };
  check(base_edges);
  check(extra_links);

  SkeletonGraph g;
  g.node_count = node_count;
  g.root = root;
  g.base_edges = std::move(base_edges);
  g.extra_links = std::move(extra_links);
  g.bone_parent.assign(node_count, std::nullopt);

  std::vector<std::vector<std::size_t>> adj(node_count);
  for (auto [u, v] : g.base_edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<bool> seen(node_count, false);
  auto bfs = [&](std::size_t start) {
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = true;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto v : adj[u])
        if (!seen[v]) {
          seen[v] = true;
          g.bone_parent[v] = u;
          q.push(v);
        }
    }
  };
  bfs(root);
  for (std::size_t i = 0; i < node_count; ++i)
    if (!seen[i]) bfs(i);

  g.normalized_adjacency = lcc::normalized_adjacency(node_count, g.edges());
  return g;
}

SkeletonSet default_skeletons() {
  SkeletonSet set;
  set[Channel::body] = SkeletonGraph::build(
      17,
      {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {0, 5}, {0, 6}, {5, 6}, {5, 7}, {7, 9}, {6, 8}, {8, 10},
       {5, 11}, {6, 12}, {11, 12}, {11, 13}, {13, 15}, {12, 14}, {14, 16}},
      {{9, 8}, {10, 7}, {9, 0}, {10, 0}}, 0);

  const std::vector<Edge> hand = {{0, 1},   {1, 2},   {2, 3},   {3, 4},   {0, 5},   {5, 6},   {6, 7},
                                  {7, 8},   {5, 9},   {9, 10},  {10, 11}, {11, 12}, {9, 13},  {13, 14},
                                  {14, 15}, {15, 16}, {13, 17}, {0, 17},  {17, 18}, {18, 19}, {19, 20}};
  set[Channel::left_hand] = SkeletonGraph::build(21, hand, {}, 0);
  set[Channel::right_hand] = SkeletonGraph::build(21, hand, {}, 0);

  std::vector<Edge> mouth;
  for (std::size_t i = 0; i < 20; ++i) {
    mouth.emplace_back(i, (i + 1) % 20);
    mouth.emplace_back(20 + i, 20 + (i + 1) % 20);
    if (i % 5 == 0) mouth.emplace_back(i, 20 + i);
  }
  set[Channel::mouth] = SkeletonGraph::build(40, mouth, {}, 0);
  return set;
}

namespace {

struct ChannelSpec {
  std::optional<std::size_t> nodes;
  std::size_t root = 0;
  std::vector<Edge> edges;
  std::vector<Edge> extra;
  bool touched = false;
};

Edge parse_edge(const std::string& tok, std::size_t line) {
  const auto dash = tok.find('-');
  try {
    if (dash == std::string::npos) throw std::invalid_argument(tok);
    std::size_t used = 0;
    const auto u = std::stoul(tok.substr(0, dash), &used);
    if (used != dash) throw std::invalid_argument(tok);
    const auto rest = tok.substr(dash + 1);
    const auto v = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(tok);
    return {u, v};
  } catch (const std::exception&) {
    throw ConfigError("graph config line " + std::to_string(line) + ": bad edge '" + tok +
                      "' (expected a-b)");
  }
}

}  // namespace

SkeletonSet parse_graph_config(const std::string& text) {
  std::array<ChannelSpec, 4> specs;
  std::optional<Channel> current;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::string key;
    if (!(ls >> key)) continue;
    if (key.front() == '[') {
      if (key.back() != ']')
        throw ConfigError("graph config line " + std::to_string(line_no) + ": bad section " + key);
      current = parse_channel(key.substr(1, key.size() - 2));
      if (!current)
        throw ConfigError("graph config line " + std::to_string(line_no) + ": unknown channel " + key);
      specs[static_cast<std::size_t>(*current)].touched = true;
      continue;
    }
    if (!current)
      throw ConfigError("graph config line " + std::to_string(line_no) + ": '" + key + "' outside a [channel] section");
    auto& spec = specs[static_cast<std::size_t>(*current)];
    if (key == "nodes" || key == "root") {
      long long v = -1;
      if (!(ls >> v) || v < 0)
        throw ConfigError("graph config line " + std::to_string(line_no) + ": " + key + " needs a non-negative integer");
      if (key == "nodes")
        spec.nodes = static_cast<std::size_t>(v);
      else
        spec.root = static_cast<std::size_t>(v);
    } else if (key == "edges" || key == "extra") {
      std::string tok;
      while (ls >> tok) (key == "edges" ? spec.edges : spec.extra).push_back(parse_edge(tok, line_no));
    } else {
      throw ConfigError("graph config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }

  SkeletonSet set = default_skeletons();
  for (Channel c : kChannels) {
    const auto& spec = specs[static_cast<std::size_t>(c)];
    if (!spec.touched) continue;
    const std::size_t n = spec.nodes.value_or(channel_nodes(c));
    set[c] = SkeletonGraph::build(n, spec.edges, spec.extra, spec.root);
  }
  return set;
}

SkeletonSet load_graph_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("graph config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_graph_config(ss.str());
}

std::string format_graph_config(const SkeletonSet& set) {
  std::ostringstream os;
  for (Channel c : kChannels) {
    const auto& g = set[c];
    os << '[' << channel_name(c) << "]\nnodes " << g.node_count << "\nroot " << g.root << "\nedges";
    for (auto [u, v] : g.base_edges) os << ' ' << u << '-' << v;
    os << "\nextra";
    for (auto [u, v] : g.extra_links) os << ' ' << u << '-' << v;
    os << "\n\n";
  }
  return os.str();
}

}  // namespace lcc
