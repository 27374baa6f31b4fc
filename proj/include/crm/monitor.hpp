#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crm/errors.hpp"
#include "crm/graph.hpp"
#include "crm/relation.hpp"
#include "crm/schema.hpp"
#include "crm/sql_ast.hpp"
#include "crm/store.hpp"
#include "crm/wiring.hpp"

#include <nlohmann/json_fwd.hpp>

namespace crm::engine {

// Per-(f-unit, user) session with hash-authenticated identity.
struct Session {
  std::string funit;
  std::string uid;
  std::string uid_h;  // H(uid | funit | sk), hex
  std::chrono::steady_clock::time_point opened_at;
};

struct CascadeRecord {
  std::string component;
  std::string table;  // logical name
  std::uint64_t row_id = 0;
  std::string key;
  std::string owner;

  std::string describe() const {
    return "cascade delete " + component + "." + table + " key=" + key + " owner=" + owner;
  }
};

struct ExecResult {
  bool is_rows = false;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  std::size_t affected = 0;
  std::vector<std::string> rebuild_order;  // set after a successful modification
  std::vector<CascadeRecord> cascades;
};

// Scope snapshot of one sub-request, for replay against the formal model.
struct CapturedItem {
  std::string id;
  Value owner;
  std::string src;
};

struct CapturedTable {
  std::string model_table;  // physical table name or view identity
  bool is_input = false;
  std::string component;
  std::vector<CapturedItem> items;
};

struct CapturedRequest {
  sql::Op op = sql::Op::Select;
  std::string issuer_user;
  std::string issuer_component;
  std::vector<CapturedTable> tables;
  std::vector<CapturedItem> pending;  // INS rows
};

struct IntegrationReport {
  std::string component;
  std::vector<std::string> signature_lines;  // input/output review listing
};

class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(std::vector<std::string> diagnostics)
      : std::runtime_error(diagnostics.empty() ? "integration failed" : diagnostics.front()),
        diagnostics_(std::move(diagnostics)) {}

  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

// The centralized reference monitor: catalog of integrated f-units, embedded
// row store, wirings, ecosystem graph and the session secret. One writer at
// a time; statements are atomic.
class Monitor : public wiring::ViewHost {
 public:
  Monitor();                              // fresh store, random secret key
  explicit Monitor(std::string secret_key);

  Monitor(Monitor&&) = delete;
  Monitor& operator=(Monitor&&) = delete;

  // --- persistence (single file) ---
  void save_file(const std::filesystem::path& path) const;
  static std::unique_ptr<Monitor> load_file(const std::filesystem::path& path);
  std::string store_fingerprint() const;

  // --- integration ---
  IntegrationReport integrate(const std::string& component, const std::string& db_text);
  void remove_component(const std::string& component);
  bool is_integrated(const std::string& component) const;
  std::vector<std::string> components() const;

  void add_activation(const std::string& parent, const std::string& child);  // throws GraphError
  // Empty result means the wiring was checked and applied.
  std::vector<std::string> add_wiring(const wiring::WiringSpec& spec);
  const std::vector<wiring::WiringSpec>& wirings() const { return wirings_; }

  const graph::EcosystemGraph& ecosystem() const { return graph_; }

  // --- sessions and execution ---
  Session open_session(const std::string& funit, const std::string& uid) const;
  bool verify_uid(const Session& session, const std::string& claimed_funit) const;

  // Prefixing: (component, logical) -> physical storage identifier.
  // Local tables only; this is the query-sandbox name resolution.
  static std::string physical_name(const std::string& component, const std::string& logical);
  static bool valid_name(const std::string& name);

  ExecResult execute(const Session& session, const std::string& sql);
  // As execute, additionally reporting every evaluated sub-request's scope.
  ExecResult execute_captured(const Session& session, const std::string& sql,
                              std::vector<CapturedRequest>* captured);

  // Owner-invariant guard (trigger semantics), evaluated per affected row.
  // Throws MonitorError(Owner) or MonitorError(Identity).
  void guard_owner(const Session& session, sql::Op op, const store::Table& table,
                   const store::StoredRow* old_row, const RowValues* new_row) const;

  // --- catalog access ---
  const schema::SchemaDecl* schema_of(const std::string& component) const;
  std::vector<std::pair<std::string, schema::ColumnType>> output_signature_of(
      const std::string& component, const std::string& output) const;
  const wiring::CompiledInputView* input_view_of(const std::string& component,
                                                 const std::string& input) const;

  store::Store& storage() { return store_; }
  const store::Store& storage() const { return store_; }
  const std::vector<CascadeRecord>& audit_log() const { return audit_log_; }

  // --- wiring::ViewHost ---
  Relation evaluate_in_namespace(const std::string& component, const sql::SelectStmt& query,
                                 const std::string& uid, bool restricted) const override;
  std::optional<wiring::OutputInfo> output_info(const std::string& component,
                                                const std::string& output) const override;
  std::optional<Relation> predicate_relation(const std::string& component,
                                             const std::string& table,
                                             const std::string& uid) const override;

 private:
  struct OutputViewState {
    schema::OutputTableDecl decl;
    std::vector<std::pair<std::string, schema::ColumnType>> signature;
    wiring::RestrictionCondition restriction;
  };

  struct ComponentInfo {
    std::string name;
    std::string db_text;
    schema::SchemaDecl decl;
    std::map<std::string, OutputViewState> outputs;
    std::vector<schema::ForeignKeyDecl> foreign_keys;
  };

  struct ResolvedTarget {
    enum class Kind { Local, Input, Output } kind;
    std::string logical;
    std::string physical;  // Local only
  };

  void integrate_locked(const std::string& component, const std::string& db_text,
                        bool create_tables, IntegrationReport* report);
  schema::Catalog catalog_excluding(const std::string& component) const;
  ResolvedTarget resolve_table(const std::string& component, const std::string& logical) const;
  Relation relation_for(const std::string& component, const std::string& logical,
                        const std::string& uid, bool restricted,
                        CapturedTable* capture) const;
  Relation eval_select_ns(const std::string& component, const sql::SelectStmt& query,
                          const std::string& uid, bool restricted,
                          CapturedRequest* capture) const;
  sql::Expr substitute_subselects(const Session& session, const sql::Expr& expr,
                                  std::vector<CapturedRequest>* captured) const;
  sql::Condition substitute_subselects(const Session& session, const sql::Condition& cond,
                                       std::vector<CapturedRequest>* captured) const;
  ExecResult run_select(const Session& session, const sql::SelectStmt& stmt,
                        std::vector<CapturedRequest>* captured) const;
  ExecResult run_insert(const Session& session, const sql::InsertStmt& stmt,
                        std::vector<CapturedRequest>* captured);
  ExecResult run_update(const Session& session, sql::UpdateStmt stmt,
                        std::vector<CapturedRequest>* captured);
  ExecResult run_delete(const Session& session, const sql::DeleteStmt& stmt,
                        std::vector<CapturedRequest>* captured);
  void check_assignable(const store::Table& table, const std::string& column, Value& value) const;
  std::vector<std::size_t> match_rows(const store::Table& table,
                                      const std::optional<sql::Condition>& where) const;
  std::vector<CascadeRecord> run_cascades();
  std::set<std::string> parent_keys(const std::string& component,
                                    const schema::ForeignKeyDecl& fk) const;
  void finish_modification(const Session& session, ExecResult& result,
                           std::vector<CascadeRecord> cascades);
  void compile_input_views();

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);

  mutable std::mutex mutex_;
  std::string sk_;
  store::Store store_;
  std::map<std::string, ComponentInfo> catalog_;
  std::vector<wiring::WiringSpec> wirings_;
  std::map<std::pair<std::string, std::string>, wiring::CompiledInputView> input_views_;
  graph::EcosystemGraph graph_;
  std::vector<CascadeRecord> audit_log_;
};

}  // namespace crm::engine
