#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crm/sql_ast.hpp"
#include "crm/value.hpp"

namespace crm::model {

using PrincipalId = std::string;

// Names of the two dimensions every universe instantiates. Additional
// dimensions may follow them; the enforcement engine only ever binds these
// two.
inline constexpr const char* kUserDimension = "users";
inline constexpr const char* kComponentDimension = "components";

struct Dimension {
  std::string name;
  std::set<PrincipalId> principals;
};

struct DataItem {
  std::string id;          // globally unique
  std::string home_table;
  RowValues values;
  PrincipalId owner;  // affected principal in the user dimension
  PrincipalId src;    // affected principal in the component dimension
  std::map<std::string, PrincipalId> extra_aff;  // dimensions beyond the two
};

enum class TableKind { Local, Input };

struct TableInfo {
  std::string name;
  TableKind kind = TableKind::Local;
  PrincipalId component;  // owning component (local) or declaring component (input)
};

// Sharing decision for a non-standard dimension: (from, to, item) -> bool.
using SharingFn = std::function<bool(const PrincipalId&, const PrincipalId&, const DataItem&)>;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Universe {
  std::vector<Dimension> dimensions;  // ordered; [0] users, [1] components
  std::map<std::string, TableInfo> tables;
  std::map<std::string, std::vector<DataItem>> data;  // table -> items
  std::map<std::string, SharingFn> extra_sharing;     // keyed by dimension name

  const Dimension* find_dimension(const std::string& name) const;
  const DataItem* find_item(const std::string& id) const;
  std::vector<std::string> local_tables(const PrincipalId& component) const;
  std::vector<std::string> input_tables(const PrincipalId& component) const;
};

struct Request {
  sql::Op op = sql::Op::Select;
  std::set<std::string> scope_tables;
  std::set<std::string> scope_items;   // ids of stored items in scope
  std::vector<DataItem> pending_items; // INS: rows not yet stored
  PrincipalId issuer_user;
  PrincipalId issuer_component;
  std::vector<PrincipalId> extra_issuers;  // aligned with dimensions[2..]

  std::string describe() const;
};

// aff_P_i(d): owner for the user dimension, src for the component dimension,
// extra_aff otherwise. Throws ModelError for an unknown dimension.
PrincipalId affected_principal(const Universe& u, const DataItem& item, const std::string& dim);

// Items affected by the request: stored scope plus INS pending rows.
// Throws ModelError for unknown tables or item ids.
std::vector<const DataItem*> scope_data(const Universe& u, const Request& r);

// sh_U per Eqs. (1)-(2): holds for every item stored in a local or input
// table. `from` must be the item's owner.
bool shares_user(const Universe& u, const PrincipalId& from, const PrincipalId& to,
                 const DataItem& d);

// sh_C: holds iff some input table of `to` contains the item. `from` must be
// the item's src.
bool shares_component(const Universe& u, const PrincipalId& from, const PrincipalId& to,
                      const DataItem& d);

// The main access control policy over all dimensions.
bool req_valid(const Universe& u, const Request& r);

// The two-dimensional operational sandbox, Eq. (3).
bool sb(const Universe& u, const Request& r);

struct SoundnessReport {
  std::vector<Request> violations;  // sb true but req_valid false
  std::size_t evaluations = 0;
  std::size_t requests_checked = 0;
  bool budget_exceeded = false;

  bool sound() const { return violations.empty() && !budget_exceeded; }
};

inline constexpr std::size_t kDefaultSoundnessBudget = 100000;

// Checks sb => req_valid over the given requests. Each request costs two
// policy evaluations; exceeding the budget stops with a partial report.
SoundnessReport soundness_check(const Universe& u, const std::vector<Request>& requests,
                                std::size_t budget = kDefaultSoundnessBudget);

// Exhaustive request generator for bounded universes: every op, issuer pair
// and table subset (singletons plus the full set), with whole-table scopes,
// per-item scopes, and INS pending-row variants.
std::vector<Request> enumerate_requests(const Universe& u);

// Plain-text fixture loader (tests and the soundness CLI). Format:
//   dimension users alice bob
//   dimension components Groups
//   table groups local Groups
//   gid owner src name
//   g1 alice Groups Chess
// Tokens are whitespace-separated; quote values containing spaces with
// single quotes; bare integers load as integer values; # starts a comment.
Universe load_universe(const std::string& text);

}  // namespace crm::model
