#include "crm/graph.hpp"

#include <algorithm>
#include <map>

namespace crm::graph {

void EcosystemGraph::remove_node(const std::string& name) {
  nodes_.erase(name);
  auto prune = [&](std::set<std::pair<std::string, std::string>>& edges) {
    for (auto it = edges.begin(); it != edges.end();) {
      if (it->first == name || it->second == name) it = edges.erase(it);
      else ++it;
    }
  };
  prune(act_edges_);
  prune(sh_edges_);
}

bool EcosystemGraph::reaches(const std::string& from, const std::string& to) const {
  if (from == to) return true;
  std::set<std::string> seen{from};
  std::vector<std::string> frontier{from};
  while (!frontier.empty()) {
    std::string n = frontier.back();
    frontier.pop_back();
    auto expand = [&](const std::set<std::pair<std::string, std::string>>& edges) {
      for (const auto& [a, b] : edges) {
        if (a != n || seen.count(b)) continue;
        if (b == to) return true;
        seen.insert(b);
        frontier.push_back(b);
      }
      return false;
    };
    if (expand(act_edges_) || expand(sh_edges_)) return true;
  }
  return false;
}

std::optional<std::string> EcosystemGraph::can_add_activation(const std::string& parent,
                                                              const std::string& child) const {
  if (!has_node(parent)) return "unknown component " + parent;
  if (!has_node(child)) return "unknown component " + child;
  if (parent == child) return "self-activation of " + parent;
  if (act_edges_.count({parent, child})) return std::nullopt;  // idempotent
  for (const auto& [p, c] : act_edges_) {
    if (c == child && p != parent) {
      return child + " already has activation parent " + p;
    }
  }
  if (reaches(child, parent)) {
    return "activation " + parent + " -> " + child + " would close a cycle";
  }
  return std::nullopt;
}

std::optional<std::string> EcosystemGraph::can_add_sharing(const std::string& provider,
                                                           const std::string& consumer) const {
  if (!has_node(provider)) return "unknown component " + provider;
  if (!has_node(consumer)) return "unknown component " + consumer;
  if (provider == consumer) return "self-wiring of " + provider;
  if (sh_edges_.count({provider, consumer})) return std::nullopt;
  if (reaches(consumer, provider)) {
    return "wiring " + provider + " -> " + consumer + " would close a cycle";
  }
  return std::nullopt;
}

void EcosystemGraph::add_activation(const std::string& parent, const std::string& child) {
  if (auto reason = can_add_activation(parent, child)) throw GraphError(*reason);
  act_edges_.insert({parent, child});
}

void EcosystemGraph::add_sharing(const std::string& provider, const std::string& consumer) {
  if (auto reason = can_add_sharing(provider, consumer)) throw GraphError(*reason);
  sh_edges_.insert({provider, consumer});
}

std::set<std::string> EcosystemGraph::stale_closure(const std::string& changed) const {
  if (!has_node(changed)) throw GraphError("unknown component " + changed);
  std::set<std::string> closure{changed};
  std::vector<std::string> frontier{changed};
  while (!frontier.empty()) {
    std::string n = frontier.back();
    frontier.pop_back();
    auto expand = [&](const std::set<std::pair<std::string, std::string>>& edges) {
      for (const auto& [a, b] : edges) {
        if (a == n && closure.insert(b).second) frontier.push_back(b);
      }
    };
    expand(act_edges_);
    expand(sh_edges_);
  }
  return closure;
}

std::vector<std::string> EcosystemGraph::rebuild_order(const std::set<std::string>& stale) const {
  for (const auto& n : stale) {
    if (!has_node(n)) throw GraphError("unknown component " + n);
  }
  std::map<std::string, int> indegree;
  std::map<std::string, std::set<std::string>> succ;
  for (const auto& n : stale) indegree[n] = 0;
  auto account = [&](const std::set<std::pair<std::string, std::string>>& edges) {
    for (const auto& [a, b] : edges) {
      if (!stale.count(a) || !stale.count(b)) continue;
      if (succ[a].insert(b).second) ++indegree[b];
    }
  };
  account(act_edges_);
  account(sh_edges_);

  std::set<std::string> ready;
  for (const auto& [n, d] : indegree) {
    if (d == 0) ready.insert(n);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string n = *ready.begin();  // lexicographic tie-break
    ready.erase(ready.begin());
    order.push_back(n);
    for (const auto& m : succ[n]) {
      if (--indegree[m] == 0) ready.insert(m);
    }
  }
  if (order.size() != stale.size()) {
    throw GraphError("cycle detected in rebuild set");  // unreachable by invariant
  }
  return order;
}

std::vector<std::string> EcosystemGraph::export_edges() const {
  std::vector<std::string> out;
  for (const auto& [a, b] : act_edges_) out.push_back(a + " -> " + b + " [act]");
  for (const auto& [a, b] : sh_edges_) out.push_back(a + " -> " + b + " [sh]");
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::pair<std::string, std::string>> sharing_edges(
    const std::vector<std::pair<std::string, std::string>>& wiring_endpoints) {
  return {wiring_endpoints.begin(), wiring_endpoints.end()};
}

}  // namespace crm::graph
