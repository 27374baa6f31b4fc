#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crm::graph {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Activation tree plus sharing edges; the combined graph stays acyclic.
class EcosystemGraph {
 public:
  void add_node(const std::string& name) { nodes_.insert(name); }
  bool has_node(const std::string& name) const { return nodes_.count(name) != 0; }
  void remove_node(const std::string& name);
  const std::set<std::string>& nodes() const { return nodes_; }

  // Non-mutating admission checks; a reason means rejection.
  std::optional<std::string> can_add_activation(const std::string& parent,
                                                const std::string& child) const;
  std::optional<std::string> can_add_sharing(const std::string& provider,
                                             const std::string& consumer) const;

  // Throw GraphError on rejection and leave the graph unchanged.
  void add_activation(const std::string& parent, const std::string& child);
  void add_sharing(const std::string& provider, const std::string& consumer);

  const std::set<std::pair<std::string, std::string>>& activation_edges() const {
    return act_edges_;
  }
  const std::set<std::pair<std::string, std::string>>& sharing_edges() const { return sh_edges_; }

  // All components reachable from `changed` in the combined graph, including
  // `changed` itself.
  std::set<std::string> stale_closure(const std::string& changed) const;

  // Topological linearization of `stale` respecting combined edges inside the
  // set; lexicographic among ready nodes for reproducible output.
  std::vector<std::string> rebuild_order(const std::set<std::string>& stale) const;

  // "a -> b [act]" lines, sorted.
  std::vector<std::string> export_edges() const;

 private:
  bool reaches(const std::string& from, const std::string& to) const;

  std::set<std::string> nodes_;
  std::set<std::pair<std::string, std::string>> act_edges_;
  std::set<std::pair<std::string, std::string>> sh_edges_;
};

// One sharing edge per distinct (provider, consumer) wiring endpoint pair.
std::set<std::pair<std::string, std::string>> sharing_edges(
    const std::vector<std::pair<std::string, std::string>>& wiring_endpoints);

}  // namespace crm::graph
