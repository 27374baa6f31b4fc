#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crm/model.hpp"

using namespace crm;
using namespace crm::model;

namespace {

// The two-component, two-user fixture most examples run against: Groups owns
// a local table, LiveSearch declares an input table fed by Groups and
// Messaging rows.
const char* kFixture = R"(
dimension users alice bob
dimension components Groups Messaging LiveSearch

table groups local Groups
gid owner src name
g1 alice Groups Chess
g2 bob Groups Go
g3 alice Groups Bridge

table conversations local Messaging
mid owner src msg
m1 alice Messaging 'Lunch tomorrow?'

table data input LiveSearch
key owner src text
Groups:g1 alice Groups Chess
Messaging:m1 alice Messaging 'Lunch tomorrow?'
)";

Universe fixture() { return load_universe(kFixture); }

Request select_over(const Universe& u, const std::string& table, const std::string& user,
                    const std::string& comp) {
  Request r;
  r.op = sql::Op::Select;
  r.scope_tables = {table};
  for (const auto& item : u.data.at(table)) r.scope_items.insert(item.id);
  r.issuer_user = user;
  r.issuer_component = comp;
  return r;
}

}  // namespace

TEST_CASE("affected_principal reads owner and src") {
  Universe u = fixture();
  const DataItem& d = u.data.at("groups")[0];
  CHECK(affected_principal(u, d, kUserDimension) == "alice");
  CHECK(affected_principal(u, d, kComponentDimension) == "Groups");
  CHECK_THROWS_AS(affected_principal(u, d, "devices"), ModelError);
}

TEST_CASE("rows in local tables are attributed to the owning component") {
  Universe u = fixture();
  for (const auto& d : u.data.at("groups")) {
    CHECK(affected_principal(u, d, kComponentDimension) == "Groups");
  }
}

TEST_CASE("scope_data returns exactly the referenced items") {
  Universe u = fixture();
  Request r = select_over(u, "groups", "alice", "Groups");
  r.scope_items = {"groups#0"};  // predicate matched one of three rows
  auto scope = scope_data(u, r);
  REQUIRE(scope.size() == 1);
  CHECK(scope[0]->id == "groups#0");

  SUBCASE("empty table gives an empty scope") {
    u.data["groups"].clear();
    r.scope_items.clear();
    CHECK(scope_data(u, r).empty());
  }
  SUBCASE("unknown table is a scope error") {
    r.scope_tables = {"nope"};
    CHECK_THROWS_AS(scope_data(u, r), ModelError);
  }
}

TEST_CASE("input table fed by two wirings scopes items from both sources") {
  Universe u = fixture();
  Request r = select_over(u, "data", "alice", "LiveSearch");
  auto scope = scope_data(u, r);
  REQUIRE(scope.size() == 2);
  std::set<std::string> srcs;
  for (const auto* d : scope) srcs.insert(d->src);
  CHECK(srcs == std::set<std::string>{"Groups", "Messaging"});
}

TEST_CASE("shares_user holds for every stored item") {
  Universe u = fixture();
  for (const auto& [table, items] : u.data) {
    for (const auto& d : items) {
      CHECK(shares_user(u, d.owner, "bob", d));
      CHECK(shares_user(u, d.owner, "alice", d));
    }
  }
  const DataItem& d = u.data.at("groups")[0];
  CHECK_THROWS_AS(shares_user(u, "bob", "alice", d), ModelError);  // from != owner
}

TEST_CASE("shares_component follows input-table membership") {
  Universe u = fixture();
  const DataItem& wired = u.data.at("data")[0];  // Groups row inside LiveSearch.data
  CHECK(shares_component(u, "Groups", "LiveSearch", wired));
  CHECK_FALSE(shares_component(u, "Groups", "Messaging", wired));

  const DataItem& local_only = u.data.at("groups")[1];
  CHECK_FALSE(shares_component(u, "Groups", "LiveSearch", local_only));
}

TEST_CASE("req_valid covers the four sharing cases") {
  Universe u = fixture();

  // No sharing: alice reads her own groups row via Groups
  Request r = select_over(u, "groups", "alice", "Groups");
  r.scope_items = {"groups#0"};
  CHECK(req_valid(u, r));

  // Cross-component sharing: Groups row read via LiveSearch's input table
  Request wired = select_over(u, "data", "alice", "LiveSearch");
  wired.scope_items = {"data#0"};  // the Groups-provided row, owned by alice
  CHECK(req_valid(u, wired));

  // Cross-user sharing: bob's group row read in Groups scope (Eq. 1 sharing)
  Request cross_user = select_over(u, "groups", "alice", "Groups");
  cross_user.scope_items = {"groups#1"};
  CHECK(req_valid(u, cross_user));

  // No component sharing: alice's groups row accessed by Messaging
  Request invalid = select_over(u, "groups", "alice", "Messaging");
  invalid.scope_items = {"groups#0"};
  CHECK_FALSE(req_valid(u, invalid));
}

TEST_CASE("req_valid rejects unshared pending items") {
  Universe u = fixture();
  Request r;
  r.op = sql::Op::Insert;
  r.scope_tables = {"groups"};
  r.issuer_user = "alice";
  r.issuer_component = "Groups";
  DataItem pending;
  pending.id = "pending:groups#0";
  pending.owner = "bob";  // not the issuer, not stored, hence unshared
  pending.src = "Groups";
  r.pending_items.push_back(pending);
  CHECK_FALSE(req_valid(u, r));

  r.pending_items[0].owner = "alice";
  CHECK(req_valid(u, r));
}

TEST_CASE("sb enforces Eq. 3") {
  Universe u = fixture();

  SUBCASE("INS into own local table with own rows") {
    Request r;
    r.op = sql::Op::Insert;
    r.scope_tables = {"groups"};
    r.issuer_user = "alice";
    r.issuer_component = "Groups";
    DataItem pending;
    pending.id = "p0";
    pending.owner = "alice";
    pending.src = "Groups";
    r.pending_items.push_back(pending);
    CHECK(sb(u, r));
    r.pending_items[0].owner = "bob";  // 3B
    CHECK_FALSE(sb(u, r));
  }

  SUBCASE("SEL over own input table is permitted (3C)") {
    Request r = select_over(u, "data", "bob", "LiveSearch");
    CHECK(sb(u, r));
    r.issuer_component = "Groups";  // someone else's input table
    CHECK_FALSE(sb(u, r));
  }

  SUBCASE("UPD touching a foreign-owned row fails 3B") {
    Request r = select_over(u, "groups", "alice", "Groups");
    r.op = sql::Op::Update;
    r.scope_items = {"groups#1"};  // bob's row
    CHECK_FALSE(sb(u, r));
    r.scope_items = {"groups#0"};
    CHECK(sb(u, r));
  }

  SUBCASE("modifications must stay within local tables (3A)") {
    Request r = select_over(u, "data", "alice", "LiveSearch");
    r.op = sql::Op::Delete;
    CHECK_FALSE(sb(u, r));
  }
}

TEST_CASE("soundness holds on consistent universes") {
  Universe u = fixture();
  auto report = soundness_check(u, enumerate_requests(u));
  CHECK(report.violations.empty());
  CHECK_FALSE(report.budget_exceeded);
  CHECK(report.requests_checked > 0);
}

TEST_CASE("corrupted src is caught by the soundness check") {
  Universe u = fixture();
  u.data["groups"][0].src = "Messaging";  // hand-corrupted provenance
  auto report = soundness_check(u, enumerate_requests(u));
  CHECK_FALSE(report.violations.empty());
}

TEST_CASE("empty universe produces an empty report") {
  Universe u;
  u.dimensions.push_back({kUserDimension, {"alice"}});
  u.dimensions.push_back({kComponentDimension, {"Groups"}});
  auto report = soundness_check(u, enumerate_requests(u));
  CHECK(report.violations.empty());
}

TEST_CASE("budget exhaustion yields a partial report") {
  Universe u = fixture();
  auto requests = enumerate_requests(u);
  REQUIRE(requests.size() > 3);
  auto report = soundness_check(u, requests, /*budget=*/4);
  CHECK(report.budget_exceeded);
  CHECK(report.requests_checked == 2);
}

TEST_CASE("soundness by exhaustive enumeration on random bounded universes") {
  std::mt19937_64 rng(2024);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
  for (int trial = 0; trial < 300; ++trial) {
    Universe u;
    Dimension users{kUserDimension, {}};
    for (std::size_t i = 0; i < pick(1, 3); ++i) users.principals.insert("u" + std::to_string(i));
    Dimension comps{kComponentDimension, {}};
    for (std::size_t i = 0; i < pick(1, 3); ++i) comps.principals.insert("c" + std::to_string(i));
    std::vector<std::string> user_list(users.principals.begin(), users.principals.end());
    std::vector<std::string> comp_list(comps.principals.begin(), comps.principals.end());
    u.dimensions = {users, comps};
    std::size_t n_tables = pick(1, 4);
    std::vector<std::string> tables;
    for (std::size_t i = 0; i < n_tables; ++i) {
      TableInfo info;
      info.name = "t" + std::to_string(i);
      info.kind = rng() % 2 ? TableKind::Local : TableKind::Input;
      info.component = comp_list[rng() % comp_list.size()];
      u.tables[info.name] = info;
      u.data[info.name];
      tables.push_back(info.name);
    }
    for (std::size_t i = 0; i < pick(0, 20); ++i) {
      const std::string& t = tables[rng() % tables.size()];
      DataItem d;
      d.id = t + "#" + std::to_string(i);
      d.home_table = t;
      d.owner = user_list[rng() % user_list.size()];
      d.src = u.tables[t].kind == TableKind::Local ? u.tables[t].component
                                                   : comp_list[rng() % comp_list.size()];
      u.data[t].push_back(d);
    }
    auto report = soundness_check(u, enumerate_requests(u));
    CHECK(report.violations.empty());
  }
}

TEST_CASE("monotone scope: rows outside the scope never change req_valid") {
  Universe u = fixture();
  std::mt19937_64 rng(7);
  auto requests = enumerate_requests(u);
  for (const auto& r : requests) {
    bool before = req_valid(u, r);
    Universe grown = u;
    for (auto& [table, items] : grown.data) {
      if (r.scope_tables.count(table)) continue;
      DataItem extra;
      extra.id = table + "#extra" + std::to_string(rng() % 1000);
      extra.home_table = table;
      extra.owner = rng() % 2 ? "alice" : "bob";
      extra.src = grown.tables[table].kind == TableKind::Local ? grown.tables[table].component
                                                               : "Messaging";
      grown.data[table].push_back(extra);
    }
    CHECK(req_valid(grown, r) == before);
  }
}

TEST_CASE("the oracle accepts dimensions beyond users and components") {
  Universe u = fixture();
  Dimension devices{"devices", {"phone", "laptop"}};
  u.dimensions.push_back(devices);
  for (auto& [table, items] : u.data) {
    for (auto& d : items) d.extra_aff["devices"] = "phone";
  }
  u.extra_sharing["devices"] = [](const PrincipalId&, const PrincipalId& to,
                                  const DataItem&) { return to == "laptop"; };

  Request r = select_over(u, "groups", "alice", "Groups");
  r.scope_items = {"groups#0"};

  r.extra_issuers = {"phone"};  // affected device is the issuer
  CHECK(req_valid(u, r));
  r.extra_issuers = {"laptop"};  // shared to laptop by the custom relation
  CHECK(req_valid(u, r));

  u.extra_sharing["devices"] = [](const PrincipalId&, const PrincipalId&, const DataItem&) {
    return false;
  };
  CHECK_FALSE(req_valid(u, r));
  r.extra_issuers = {"phone"};
  CHECK(req_valid(u, r));
}

TEST_CASE("fixture loader validates structure") {
  CHECK_THROWS_AS(load_universe("table t local C\nx y\n"), ModelError);  // no dimensions
  CHECK_THROWS_AS(load_universe("dimension users a\ndimension components C\n"
                                "table t local C\ngid name\n"),
                  ModelError);  // header missing owner/src
  CHECK_THROWS_AS(load_universe("dimension users a\ndimension components C\n"
                                "table t local D\nowner src\n"),
                  ModelError);  // unknown component
  Universe ok = load_universe("dimension users a\ndimension components C\n"
                              "table t local C\nowner src v\na C 'hello world'\n");
  CHECK(ok.data.at("t").size() == 1);
  CHECK(ok.data.at("t")[0].values.at("v") == Value::text("hello world"));
}
