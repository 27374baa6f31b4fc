#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crm/graph.hpp"
#include "crm/relation.hpp"
#include "crm/schema.hpp"

namespace crm::wiring {

// Column-level schema matching from one component's output table into
// another component's input table.
struct ColumnMapping {
  std::string target_column;
  bool is_constant = false;
  std::string source_column;  // projection column of the source output
  Value constant;
};

struct WiringSpec {
  std::string source_component;
  std::string source_output;
  std::string target_component;
  std::string target_input;
  std::vector<ColumnMapping> column_map;

  std::string describe() const {
    return source_component + "." + source_output + " -> " + target_component + "." +
           target_input;
  }
};

// Wiring file format, one block per wiring:
//   WIRE Groups.all_groups -> LiveSearch.data
//     key   <- key
//     text  <- name
//     type  <- 'Group'
//     owner <- owner
std::vector<WiringSpec> parse_wirings(const std::string& text);
std::string serialize(const WiringSpec&);

// Invariant compiled against an output projection; @uid binds at evaluation.
class RestrictionCondition {
 public:
  RestrictionCondition() = default;

  // Resolves a predicate table (declaring-component scope) to its rows over
  // the non-KEY columns, in declaration order.
  using PredResolver = std::function<std::optional<Relation>(const std::string& table)>;

  bool evaluate(const std::vector<Value>& row, const std::string& uid,
                const PredResolver& preds) const;

  bool is_all() const { return inv_.kind == schema::InvariantExpr::Kind::All; }
  const schema::InvariantExpr& expr() const { return inv_; }

 private:
  friend RestrictionCondition compile_restriction(
      const schema::InvariantExpr&, const std::vector<std::string>&,
      const std::map<std::string, std::size_t>&);

  schema::InvariantExpr inv_;
  std::vector<std::string> projection_;
};

// Compiles an invariant: validates column references against the projection
// and predicate tables against the declaring component's table arities
// (column count minus the KEY column). Throws MonitorError(Syntax).
RestrictionCondition compile_restriction(const schema::InvariantExpr& inv,
                                         const std::vector<std::string>& projection,
                                         const std::map<std::string, std::size_t>& pred_arities);

struct CompiledInputView {
  std::string target_component;
  std::string target_input;
  std::vector<WiringSpec> branches;  // one per wiring, in registration order
};

// Catalog window the wiring checker needs, decoupled from the monitor.
struct WiringCatalog {
  std::function<bool(const std::string& component)> is_integrated;
  std::function<const schema::InputTableDecl*(const std::string& component,
                                              const std::string& table)>
      find_input;
  std::function<std::optional<std::vector<std::pair<std::string, schema::ColumnType>>>(
      const std::string& component, const std::string& table)>
      find_output_signature;
};

// Validates endpoints, column-map totality, marker rules, type compatibility
// and combined-graph acyclicity. Empty result means ok.
std::vector<std::string> check_wiring(const WiringSpec& spec, const WiringCatalog& catalog,
                                      const graph::EcosystemGraph& g);

CompiledInputView compile_input_view(const std::string& target_component,
                                     const std::string& target_input,
                                     const std::vector<WiringSpec>& wirings);

// Evaluation plugs back into the engine through this interface; the monitor
// implements it over its catalog and store.
struct OutputInfo {
  const schema::SchemaDecl* decl = nullptr;
  const schema::OutputTableDecl* output = nullptr;
  const RestrictionCondition* restriction = nullptr;
};

class ViewHost {
 public:
  virtual ~ViewHost() = default;

  // Evaluates a SELECT inside a component's namespace. With restricted=true,
  // input tables resolve to invariant-filtered views for `uid`; otherwise to
  // the raw branch union.
  virtual Relation evaluate_in_namespace(const std::string& component,
                                         const sql::SelectStmt& query, const std::string& uid,
                                         bool restricted) const = 0;
  virtual std::optional<OutputInfo> output_info(const std::string& component,
                                                const std::string& output) const = 0;
  virtual std::optional<Relation> predicate_relation(const std::string& component,
                                                     const std::string& table,
                                                     const std::string& uid) const = 0;
};

// The unrestricted output view (the output query itself).
Relation evaluate_unrestricted_output(const ViewHost& host, const std::string& component,
                                      const std::string& output);

// The restricted view: output query rows passing the invariant for `uid`.
Relation evaluate_restricted_output(const ViewHost& host, const std::string& component,
                                    const std::string& output, const std::string& uid);

// Namespaced key for rows flowing through a wiring.
std::string namespaced_key(const std::string& source_component, const Value& key);

// Union of branch rows mapped onto the input table's declared columns.
// Restricted mode applies the source invariants for `uid`. Row meta carries
// src = branch source and a view-scoped item id.
Relation evaluate_input_view(const ViewHost& host, const CompiledInputView& view,
                             const schema::InputTableDecl& decl, const std::string& uid,
                             bool restricted);

}  // namespace crm::wiring
