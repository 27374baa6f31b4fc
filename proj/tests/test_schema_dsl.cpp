#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crm/schema.hpp"
#include "crm/sql_parser.hpp"

using namespace crm;
using namespace crm::schema;

namespace {

// the two-column listing from the implementation section, verbatim blocks
const char* kOutputEqualsForm = R"(
OUTPUT TABLE all_groups =
  SELECT gid AS key, owner, name
  FROM   groups
  WHERE  public=1
)";

const char* kInputForm = R"(
INPUT TABLE stats (
  key    KEY
  owner  OWNER
  type   TINYTEXT )
)";

const char* kFriendsO = R"(
OUTPUT TABLE friends_o (
  SELECT    CONCAT(uid1,uid2) AS key,  uid1 AS owner,  uid2 AS friend
  FROM      friends
  INVARIANT is(@uid,owner) OR is(@uid,friend) )
)";

const char* kFriendshipDb = R"(
TABLE friends (
  fid  KEY
  uid1 OWNER
  uid2 TINYTEXT
)
OUTPUT TABLE friends_o (
  SELECT    CONCAT(uid1,uid2) AS key,  uid1 AS owner,  uid2 AS friend
  FROM      friends
  INVARIANT is(@uid,owner) OR is(@uid,friend) )
)";

}  // namespace

TEST_CASE("output table in equals form parses to the stated projection") {
  SchemaDecl decl = parse_db_file(kOutputEqualsForm);
  REQUIRE(decl.outputs.size() == 1);
  const OutputTableDecl& o = decl.outputs[0];
  CHECK(o.name == "all_groups");
  auto names = o.projection_names();
  REQUIRE(names.size() == 3);
  CHECK(names[0] == "key");
  CHECK(names[1] == "owner");
  CHECK(names[2] == "name");
  CHECK_FALSE(o.invariant_explicit);  // default is(@uid,owner) inserted at parse time
  CHECK(serialize(o.invariant) == "is(@uid,owner)");
}

TEST_CASE("input table parses with marker columns") {
  SchemaDecl decl = parse_db_file(kInputForm);
  REQUIRE(decl.inputs.size() == 1);
  const InputTableDecl& t = decl.inputs[0];
  CHECK(t.name == "stats");
  REQUIRE(t.columns.size() == 3);
  CHECK(t.columns[0].name == "key");
  CHECK(t.columns[0].type.is_key());
  CHECK(t.columns[1].name == "owner");
  CHECK(t.columns[1].type.is_owner());
  CHECK(t.columns[2].name == "type");
  CHECK(t.columns[2].type.base == ColumnType::Base::TinyText);
}

TEST_CASE("friends_o parenthesized form parses with explicit invariant") {
  SchemaDecl decl = parse_db_file(kFriendsO);
  REQUIRE(decl.outputs.size() == 1);
  const OutputTableDecl& o = decl.outputs[0];
  CHECK(o.invariant_explicit);
  CHECK(serialize(o.invariant) == "is(@uid,owner) OR is(@uid,friend)");
  auto names = o.projection_names();
  CHECK(names == std::vector<std::string>{"key", "owner", "friend"});
}

TEST_CASE("empty file parses to an empty declaration") {
  SchemaDecl decl = parse_db_file("# nothing here\n");
  CHECK(decl.locals.empty());
  CHECK(decl.inputs.empty());
  CHECK(decl.outputs.empty());
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse_db_file("TABLE t ( x KEY y OWNER )\nTABLE t ( a KEY b OWNER )"),
                  ParseError);
  CHECK_THROWS_AS(parse_db_file("TABLE t ( x KEY )"), ParseError);    // missing OWNER
  CHECK_THROWS_AS(parse_db_file("TABLE t ( x OWNER )"), ParseError);  // missing KEY
  CHECK_THROWS_AS(parse_db_file("TABLE ("), ParseError);
  try {
    parse_db_file("TABLE t (\n  x KEY\n  y BOGUS\n)");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("parse_invariant: paper examples") {
  InvariantExpr e = parse_invariant("is(@uid,owner) OR is(@uid,friend)");
  REQUIRE(e.kind == InvariantExpr::Kind::Or);
  CHECK(e.children[0].kind == InvariantExpr::Kind::Is);
  CHECK(e.children[0].args[0].kind == InvariantArg::Kind::Uid);
  CHECK(e.children[0].args[1] == InvariantArg::col("owner"));

  InvariantExpr n = parse_invariant("!ignores(owner,@uid) AND !ignores(friend,@uid)");
  REQUIRE(n.kind == InvariantExpr::Kind::And);
  CHECK(n.children[0].kind == InvariantExpr::Kind::Pred);
  CHECK(n.children[0].pred_table == "ignores");
  CHECK(n.children[0].negated);
  CHECK(n.children[0].args[0] == InvariantArg::col("owner"));
  CHECK(n.children[0].args[1].kind == InvariantArg::Kind::Uid);

  CHECK(parse_invariant("ALL").kind == InvariantExpr::Kind::All);

  InvariantExpr f = parse_invariant(
      "is(@uid,owner) OR friends(@uid,owner) OR is(@uid,friend) OR friends(@uid,friend)");
  CHECK(f.kind == InvariantExpr::Kind::Or);
}

TEST_CASE("parse_invariant: AND binds tighter than OR, left associative") {
  InvariantExpr e = parse_invariant("ALL OR ALL AND ALL");
  REQUIRE(e.kind == InvariantExpr::Kind::Or);
  CHECK(e.children[0].kind == InvariantExpr::Kind::All);
  CHECK(e.children[1].kind == InvariantExpr::Kind::And);

  InvariantExpr l = parse_invariant("ALL OR ALL OR ALL");
  REQUIRE(l.kind == InvariantExpr::Kind::Or);
  CHECK(l.children[0].kind == InvariantExpr::Kind::Or);  // left-associative
}

TEST_CASE("parse_invariant rejects negation off predicates") {
  CHECK_THROWS_AS(parse_invariant("!is(@uid,owner)"), ParseError);
  CHECK_THROWS_AS(parse_invariant("is(@uid)"), ParseError);
  CHECK_THROWS_AS(parse_invariant("OR"), ParseError);
}

TEST_CASE("parse_invariant is total: structured errors only") {
  static const char* kTokens[] = {"is",  "(",  ")",    ",",      "@uid", "owner",
                                  "ALL", "OR", "AND",  "!",      "'x'",  "42",
                                  "frn", "==", "NULL", "SELECT"};
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text;
    std::size_t n = rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      text += kTokens[rng() % (sizeof(kTokens) / sizeof(kTokens[0]))];
      text += " ";
    }
    try {
      parse_invariant(text);
    } catch (const ParseError&) {
    } catch (const MonitorError&) {
    }
  }
  CHECK(true);  // survived without crashing
}

TEST_CASE("validate_schema: friends_o fixture is clean") {
  SchemaDecl decl = parse_db_file(kFriendshipDb);
  CHECK(validate_schema(decl, Catalog{}).empty());
}

TEST_CASE("validate_schema: output query crossing the f-unit boundary") {
  SchemaDecl decl = parse_db_file(
      "TABLE mine ( id KEY owner OWNER )\n"
      "OUTPUT TABLE leak = SELECT gid AS key, owner FROM groups");
  Catalog cat;
  cat.component_tables["Groups"] = {"groups"};
  auto diags = validate_schema(decl, cat);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].message.find("outside this f-unit") != std::string::npos);
  CHECK(diags[0].message.find("Groups") != std::string::npos);
}

TEST_CASE("validate_schema: invariant column must resolve against the projection") {
  // drop the friend alias from the fixture and re-validate
  SchemaDecl decl = parse_db_file(
      "TABLE friends ( fid KEY uid1 OWNER uid2 TINYTEXT )\n"
      "OUTPUT TABLE friends_o ( SELECT CONCAT(uid1,uid2) AS key, uid1 AS owner FROM friends"
      " INVARIANT is(@uid,owner) OR is(@uid,friend) )");
  auto diags = validate_schema(decl, Catalog{});
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].message.find("friend") != std::string::npos);
}

TEST_CASE("validate_schema: missing key or owner aliases in the projection") {
  SchemaDecl decl = parse_db_file(
      "TABLE t ( id KEY owner OWNER v TEXT )\n"
      "OUTPUT TABLE o = SELECT v FROM t");
  auto diags = validate_schema(decl, Catalog{});
  CHECK(diags.size() == 2);
}

TEST_CASE("output_signature infers projection types") {
  SchemaDecl decl = parse_db_file(
      "TABLE groups ( gid KEY owner OWNER name TEXT public INT )\n"
      "OUTPUT TABLE all_groups = SELECT gid AS key, owner, name FROM groups WHERE public=1");
  auto sig = output_signature(decl, decl.outputs[0]);
  REQUIRE(sig.size() == 3);
  CHECK(sig[0].first == "key");
  CHECK(sig[0].second.is_key());
  CHECK(sig[1].first == "owner");
  CHECK(sig[1].second.is_owner());
  CHECK(sig[2].first == "name");
  CHECK(sig[2].second.base == ColumnType::Base::Text);
}

TEST_CASE("output_signature: constants and functions are text or int") {
  SchemaDecl decl = parse_db_file(
      "TABLE t ( id KEY owner OWNER v TEXT n INT )\n"
      "OUTPUT TABLE o = SELECT id AS key, owner, 'Group' AS tag, 7 AS seven, CONCAT(v,v) AS c"
      " FROM t");
  auto sig = output_signature(decl, decl.outputs[0]);
  CHECK(sig[2].second.base == ColumnType::Base::Text);
  CHECK(sig[3].second.base == ColumnType::Base::Int);
  CHECK(sig[4].second.base == ColumnType::Base::Text);
}

TEST_CASE("output_signature: private_msgs") {
  SchemaDecl decl = parse_db_file(
      "TABLE conversations ( msg_id KEY uid_from OWNER uid_recipient TINYTEXT msg TEXT )\n"
      "OUTPUT TABLE private_msgs ( SELECT msg_id AS key, msg, uid_from AS owner,"
      " uid_recipient AS to FROM conversations INVARIANT is(owner,@uid) OR is(to,@uid) )");
  auto sig = output_signature(decl, decl.outputs[0]);
  REQUIRE(sig.size() == 4);
  CHECK(sig[0].first == "key");
  CHECK(sig[1].first == "msg");
  CHECK(sig[2].first == "owner");
  CHECK(sig[3].first == "to");
  CHECK(sig[3].second.base == ColumnType::Base::TinyText);
}

TEST_CASE("output_signature: unknown column is a signature error") {
  SchemaDecl decl = parse_db_file(
      "TABLE t ( id KEY owner OWNER )\n"
      "OUTPUT TABLE o = SELECT id AS key, owner, ghost FROM t");
  CHECK_THROWS_AS(output_signature(decl, decl.outputs[0]), MonitorError);
}

namespace {

SchemaDecl random_decl(std::mt19937_64& rng) {
  SchemaDecl decl;
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
  auto rand_type = [&]() {
    ColumnType t;
    switch (rng() % 4) {
      case 0: t.base = ColumnType::Base::Int; break;
      case 1: t.base = ColumnType::Base::Text; break;
      case 2: t.base = ColumnType::Base::TinyText; break;
      default:
        t.base = ColumnType::Base::Varchar;
        t.varchar_len = static_cast<int>(pick(1, 64));
    }
    return t;
  };
  std::size_t n_local = pick(1, 3);
  for (std::size_t i = 0; i < n_local; ++i) {
    LocalTableDecl t;
    t.name = "t" + std::to_string(i);
    t.columns.push_back({"k" + std::to_string(i), ColumnType{ColumnType::Base::Key, 0}});
    t.columns.push_back({"o" + std::to_string(i), ColumnType{ColumnType::Base::Owner, 0}});
    std::size_t extra = pick(0, 3);
    for (std::size_t c = 0; c < extra; ++c) {
      t.columns.push_back({"c" + std::to_string(c), rand_type()});
    }
    decl.locals.push_back(std::move(t));
  }
  if (rng() % 2) {
    InputTableDecl t;
    t.name = "in0";
    t.columns.push_back({"key", ColumnType{ColumnType::Base::Key, 0}});
    t.columns.push_back({"owner", ColumnType{ColumnType::Base::Owner, 0}});
    t.columns.push_back({"v", rand_type()});
    decl.inputs.push_back(std::move(t));
  }
  if (rng() % 2) {
    OutputTableDecl o;
    o.name = "out0";
    const auto& src = decl.locals[0];
    std::string q = "SELECT " + src.columns[0].name + " AS key, " + src.columns[1].name +
                    " AS owner FROM " + src.name;
    o.query = sql::Parser(sql::tokenize(q)).parse_select();
    o.query_text = sql::to_string(o.query);
    if (rng() % 2) {
      o.invariant = parse_invariant("is(@uid,owner)");
      o.invariant_explicit = true;
    } else {
      o.invariant = parse_invariant("is(@uid,owner)");
      o.invariant_explicit = false;
    }
    decl.outputs.push_back(std::move(o));
  }
  return decl;
}

}  // namespace

TEST_CASE("round-trip: parse(serialize(decl)) is structurally equal") {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 200; ++trial) {
    SchemaDecl decl = random_decl(rng);
    std::string text = serialize(decl);
    SchemaDecl back = parse_db_file(text);
    CHECK(back.locals == decl.locals);
    CHECK(back.inputs == decl.inputs);
    REQUIRE(back.outputs.size() == decl.outputs.size());
    for (std::size_t i = 0; i < decl.outputs.size(); ++i) {
      CHECK(back.outputs[i].name == decl.outputs[i].name);
      CHECK(sql::to_string(back.outputs[i].query) == sql::to_string(decl.outputs[i].query));
      CHECK(back.outputs[i].invariant == decl.outputs[i].invariant);
      CHECK(back.outputs[i].invariant_explicit == decl.outputs[i].invariant_explicit);
    }
    CHECK(serialize(back) == text);
  }
}

TEST_CASE("every parsed local and input table has exactly one KEY and one OWNER") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    SchemaDecl decl = random_decl(rng);
    std::string text = serialize(decl);
    SchemaDecl back = parse_db_file(text);
    for (const auto& t : back.locals) {
      REQUIRE(t.key_column() != nullptr);
      REQUIRE(t.owner_column() != nullptr);
    }
    for (const auto& t : back.inputs) {
      REQUIRE(t.key_column() != nullptr);
      REQUIRE(t.owner_column() != nullptr);
    }
  }
}
