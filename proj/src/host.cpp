#include "crm/host.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "crm/sql_parser.hpp"
#include "crm/wiring.hpp"

namespace crm::host {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// activations.cfg: one "Parent -> Child" per line, # comments
std::vector<std::pair<std::string, std::string>> parse_activations(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto arrow = line.find("->");
    if (arrow == std::string::npos) {
      throw std::runtime_error("activations line " + std::to_string(lineno) +
                               ": expected 'Parent -> Child'");
    }
    std::string parent = trim(line.substr(0, arrow));
    std::string child = trim(line.substr(arrow + 2));
    if (parent.empty() || child.empty()) {
      throw std::runtime_error("activations line " + std::to_string(lineno) +
                               ": expected 'Parent -> Child'");
    }
    out.emplace_back(parent, child);
  }
  return out;
}

// Seed rows run through regular sessions: the session user is the row's own
// owner value, so the owner guard applies to seed data like any other write.
std::size_t apply_seed(engine::Monitor& monitor, const std::string& funit,
                       const std::string& text) {
  std::size_t rows = 0;
  for (const auto& stmt_text : sql::split_script(text)) {
    sql::Statement stmt;
    try {
      stmt = sql::parse_statement(stmt_text);
    } catch (const ParseError& e) {
      throw engine::IntegrationError({funit + "/seed.sql: " + e.what()});
    }
    if (stmt.op != sql::Op::Insert) {
      throw engine::IntegrationError({funit + "/seed.sql: only INSERT statements are allowed"});
    }
    const schema::SchemaDecl* decl = monitor.schema_of(funit);
    const schema::LocalTableDecl* table = decl ? decl->find_local(stmt.insert->table) : nullptr;
    if (!table) {
      throw engine::IntegrationError(
          {funit + "/seed.sql: unknown local table " + stmt.insert->table});
    }
    const std::string owner_col = table->owner_column()->name;
    int owner_idx = -1;
    for (std::size_t i = 0; i < stmt.insert->columns.size(); ++i) {
      if (stmt.insert->columns[i] == owner_col) owner_idx = static_cast<int>(i);
    }
    if (owner_idx < 0) {
      throw engine::IntegrationError(
          {funit + "/seed.sql: seed rows must provide the owner column " + owner_col});
    }
    for (const auto& tuple : stmt.insert->rows) {
      const Value& owner = tuple[static_cast<std::size_t>(owner_idx)];
      if (owner.is_null()) {
        throw engine::IntegrationError({funit + "/seed.sql: seed row has NULL owner"});
      }
      sql::Statement single;
      single.op = sql::Op::Insert;
      single.insert = std::make_shared<sql::InsertStmt>();
      single.insert->table = stmt.insert->table;
      single.insert->columns = stmt.insert->columns;
      single.insert->rows = {tuple};
      try {
        engine::Session session = monitor.open_session(funit, owner.render());
        monitor.execute(session, sql::to_string(single));
      } catch (const MonitorError& e) {
        throw engine::IntegrationError({funit + "/seed.sql: " + e.what()});
      }
      ++rows;
    }
  }
  return rows;
}

}  // namespace

BundleReport integrate_bundle(engine::Monitor& monitor, const fs::path& bundle_dir,
                              const std::string& only, bool force) {
  if (!fs::is_directory(bundle_dir)) {
    throw engine::IntegrationError({"bundle directory not found: " + bundle_dir.string()});
  }
  std::vector<std::string> funits;
  for (const auto& entry : fs::directory_iterator(bundle_dir)) {
    if (!entry.is_directory()) continue;
    std::string name = entry.path().filename().string();
    if (!only.empty() && name != only) continue;
    funits.push_back(name);
  }
  std::sort(funits.begin(), funits.end());
  if (!only.empty() && funits.empty()) {
    throw engine::IntegrationError({"f-unit " + only + " not found in bundle"});
  }

  BundleReport report;
  for (const auto& name : funits) {
    fs::path db = bundle_dir / name / (name + ".db");
    if (!fs::exists(db)) {
      throw engine::IntegrationError({name + ": missing " + name + ".db"});
    }
    if (monitor.is_integrated(name)) {
      if (!force) {
        throw engine::IntegrationError(
            {"component already integrated: " + name + " (use --force to replace)"});
      }
      monitor.remove_component(name);
    }
    engine::IntegrationReport r;
    try {
      r = monitor.integrate(name, read_file(db));
    } catch (const engine::IntegrationError& e) {
      std::vector<std::string> diags;
      for (const auto& d : e.diagnostics()) diags.push_back(name + ".db:" + d);
      throw engine::IntegrationError(std::move(diags));
    }
    ++report.funits_integrated;
    report.lines.push_back("integrated f-unit " + name);
    for (const auto& line : r.signature_lines) report.lines.push_back("  " + line);
  }

  for (const auto& name : funits) {
    fs::path acts = bundle_dir / name / "activations.cfg";
    if (!fs::exists(acts)) continue;
    for (const auto& [parent, child] : parse_activations(read_file(acts))) {
      try {
        monitor.add_activation(parent, child);
      } catch (const graph::GraphError& e) {
        throw engine::IntegrationError({name + "/activations.cfg: " + e.what()});
      }
      ++report.activations_applied;
      report.lines.push_back("activation " + parent + " -> " + child);
    }
  }

  for (const auto& name : funits) {
    fs::path wires = bundle_dir / name / "wirings.cfg";
    if (!fs::exists(wires)) continue;
    std::vector<wiring::WiringSpec> specs;
    try {
      specs = wiring::parse_wirings(read_file(wires));
    } catch (const ParseError& e) {
      throw engine::IntegrationError({name + "/wirings.cfg:" + e.what()});
    }
    for (const auto& spec : specs) {
      auto diags = monitor.add_wiring(spec);
      if (!diags.empty()) {
        std::vector<std::string> out;
        for (const auto& d : diags) {
          out.push_back(name + "/wirings.cfg: " + spec.describe() + ": " + d);
        }
        throw engine::IntegrationError(std::move(out));
      }
      ++report.wirings_applied;
      report.lines.push_back("wiring " + spec.describe());
    }
  }

  for (const auto& name : funits) {
    fs::path seed = bundle_dir / name / "seed.sql";
    if (!fs::exists(seed)) continue;
    std::size_t rows = apply_seed(monitor, name, read_file(seed));
    report.seed_rows += rows;
    if (rows) {
      report.lines.push_back("seeded " + std::to_string(rows) + " rows into " + name);
    }
  }
  return report;
}

ReplayOutcome replay_request(const engine::CapturedRequest& captured) {
  model::Universe u;
  model::Dimension users;
  users.name = model::kUserDimension;
  model::Dimension components;
  components.name = model::kComponentDimension;

  users.principals.insert(captured.issuer_user);
  components.principals.insert(captured.issuer_component);

  model::Request request;
  request.op = captured.op;
  request.issuer_user = captured.issuer_user;
  request.issuer_component = captured.issuer_component;

  auto owner_of = [](const engine::CapturedItem& item) {
    return item.owner.is_null() ? std::string() : item.owner.render();
  };

  for (const auto& table : captured.tables) {
    auto [it, inserted] = u.tables.emplace(table.model_table, model::TableInfo{});
    if (inserted) {
      it->second.name = table.model_table;
      it->second.kind = table.is_input ? model::TableKind::Input : model::TableKind::Local;
      it->second.component = table.component;
      components.principals.insert(table.component);
    }
    auto& data = u.data[table.model_table];
    for (const auto& item : table.items) {
      bool present = false;
      for (const auto& existing : data) {
        if (existing.id == item.id) present = true;
      }
      if (present) continue;
      model::DataItem d;
      d.id = item.id;
      d.home_table = table.model_table;
      d.owner = owner_of(item);
      d.src = item.src;
      if (!d.owner.empty()) users.principals.insert(d.owner);
      if (!d.src.empty()) components.principals.insert(d.src);
      data.push_back(std::move(d));
      request.scope_items.insert(item.id);
    }
    request.scope_tables.insert(table.model_table);
  }
  for (const auto& item : captured.pending) {
    model::DataItem d;
    d.id = item.id;
    d.owner = owner_of(item);
    d.src = item.src;
    if (!d.owner.empty()) users.principals.insert(d.owner);
    if (!d.src.empty()) components.principals.insert(d.src);
    request.pending_items.push_back(std::move(d));
  }

  u.dimensions.push_back(std::move(users));
  u.dimensions.push_back(std::move(components));

  ReplayOutcome outcome;
  outcome.request = request.describe();
  outcome.sb = model::sb(u, request);
  outcome.req_valid = model::req_valid(u, request);
  return outcome;
}

// --- soundness driver ---

namespace {

// Random bounded universe respecting the structural invariants the engine
// guarantees (local rows attributed to their component). Sizes match the
// stated bounds: <=3 users, <=3 components, <=4 tables, <=20 items.
model::Universe random_universe(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  };
  model::Universe u;
  model::Dimension users;
  users.name = model::kUserDimension;
  std::size_t n_users = pick(1, 3);
  for (std::size_t i = 0; i < n_users; ++i) users.principals.insert("u" + std::to_string(i + 1));
  model::Dimension comps;
  comps.name = model::kComponentDimension;
  std::size_t n_comps = pick(1, 3);
  for (std::size_t i = 0; i < n_comps; ++i) comps.principals.insert("c" + std::to_string(i + 1));

  std::vector<std::string> user_list(users.principals.begin(), users.principals.end());
  std::vector<std::string> comp_list(comps.principals.begin(), comps.principals.end());
  u.dimensions.push_back(std::move(users));
  u.dimensions.push_back(std::move(comps));

  std::size_t n_tables = pick(1, 4);
  for (std::size_t i = 0; i < n_tables; ++i) {
    model::TableInfo info;
    info.name = "t" + std::to_string(i + 1);
    info.kind = rng() % 3 == 0 ? model::TableKind::Input : model::TableKind::Local;
    info.component = comp_list[rng() % comp_list.size()];
    u.tables[info.name] = info;
    u.data[info.name];
  }
  std::vector<std::string> table_list;
  for (const auto& [name, _] : u.tables) table_list.push_back(name);

  std::size_t n_items = pick(0, 20);
  for (std::size_t i = 0; i < n_items; ++i) {
    const std::string& table = table_list[rng() % table_list.size()];
    const model::TableInfo& info = u.tables[table];
    model::DataItem d;
    d.id = table + "#" + std::to_string(i);
    d.home_table = table;
    d.owner = user_list[rng() % user_list.size()];
    // local rows carry their component as src; input rows any provider
    d.src = info.kind == model::TableKind::Local ? info.component
                                                 : comp_list[rng() % comp_list.size()];
    d.values["v"] = Value::integer(static_cast<std::int64_t>(rng() % 100));
    u.data[table].push_back(std::move(d));
  }
  return u;
}

// Mis-attributes the src of one local row, if any exists.
bool corrupt_universe(model::Universe& u, std::mt19937_64& rng) {
  std::vector<model::DataItem*> candidates;
  for (auto& [table, items] : u.data) {
    if (u.tables[table].kind != model::TableKind::Local) continue;
    for (auto& item : items) candidates.push_back(&item);
  }
  if (candidates.empty() || u.dimensions[1].principals.size() < 2) return false;
  model::DataItem* victim = candidates[rng() % candidates.size()];
  for (const auto& c : u.dimensions[1].principals) {
    if (c != victim->src) {
      victim->src = c;
      return true;
    }
  }
  return false;
}

struct ReplayEcosystem {
  std::unique_ptr<engine::Monitor> monitor;
  std::vector<std::string> comps;
  std::vector<std::string> users;
};

ReplayEcosystem random_ecosystem(std::mt19937_64& rng) {
  ReplayEcosystem eco;
  eco.monitor = std::make_unique<engine::Monitor>("soundness-sk");
  std::size_t n_comps = 1 + rng() % 3;
  std::size_t n_users = 1 + rng() % 3;
  for (std::size_t i = 0; i < n_users; ++i) eco.users.push_back("u" + std::to_string(i + 1));

  for (std::size_t i = 0; i < n_comps; ++i) {
    std::string name = "C" + std::to_string(i + 1);
    std::ostringstream db;
    db << "TABLE items ( id KEY owner OWNER note TEXT )\n";
    db << "INPUT TABLE feed ( key KEY owner OWNER note TEXT )\n";
    int inv = static_cast<int>(rng() % 3);
    db << "OUTPUT TABLE shared = SELECT id AS key, owner, note FROM items";
    if (inv == 0) db << " INVARIANT ALL";
    else if (inv == 1) db << " INVARIANT is(@uid,owner)";
    // inv == 2: default invariant
    db << "\n";
    eco.monitor->integrate(name, db.str());
    eco.comps.push_back(name);
  }
  // acyclic by construction: wirings only flow from lower to higher index
  for (std::size_t to = 1; to < n_comps; ++to) {
    for (std::size_t from = 0; from < to; ++from) {
      if (rng() % 2 == 0) continue;
      wiring::WiringSpec spec;
      spec.source_component = eco.comps[from];
      spec.source_output = "shared";
      spec.target_component = eco.comps[to];
      spec.target_input = "feed";
      spec.column_map = {
          {"key", false, "key", Value()},
          {"owner", false, "owner", Value()},
          {"note", false, "note", Value()},
      };
      eco.monitor->add_wiring(spec);
    }
  }
  return eco;
}

std::string random_statement(std::mt19937_64& rng, const ReplayEcosystem& eco) {
  const std::string& users_pick = eco.users[rng() % eco.users.size()];
  switch (rng() % 7) {
    case 0:
      return "SELECT * FROM items";
    case 1:
      return "SELECT note, owner FROM feed";
    case 2:
      return "INSERT INTO items (owner, note) VALUES ('" + users_pick + "', 'n" +
             std::to_string(rng() % 50) + "')";
    case 3:
      return "UPDATE items SET note = 'edited' WHERE owner = '" + users_pick + "'";
    case 4:
      return "DELETE FROM items WHERE note = 'n" + std::to_string(rng() % 50) + "'";
    case 5:
      return "SELECT COUNT(*) FROM items WHERE owner = '" + users_pick + "'";
    default:
      return "SELECT note FROM feed WHERE note LIKE 'n%'";
  }
}

}  // namespace

std::string SoundnessOutcome::report_text(const SoundnessOptions& options) const {
  std::ostringstream out;
  out << "soundness: trials=" << options.trials << " seed=" << options.seed;
  if (options.corrupt) out << " corrupt=1";
  if (!options.fixture_path.empty()) out << " fixture=" << options.fixture_path;
  out << "\n";
  out << "model phase: universes=" << universes << " requests=" << requests
      << " violations=" << violations << "\n";
  if (ecosystems) {
    out << "replay phase: ecosystems=" << ecosystems << " statements=" << statements
        << " accepted=" << accepted << " violations=" << replay_violations << "\n";
  }
  if (budget_exceeded) out << "warning: enumeration budget exceeded, report is partial\n";
  for (const auto& s : violation_samples) out << "violation: " << s << "\n";
  out << total_violations() << " violations / " << (universes ? universes : statements)
      << " trials\n";
  return out.str();
}

SoundnessOutcome run_soundness(const SoundnessOptions& options) {
  SoundnessOutcome outcome;
  std::mt19937_64 rng(options.seed);

  if (!options.fixture_path.empty()) {
    model::Universe u = model::load_universe(read_file(options.fixture_path));
    auto requests = model::enumerate_requests(u);
    auto report = model::soundness_check(u, requests);
    outcome.universes = 1;
    outcome.requests = report.requests_checked;
    outcome.violations = report.violations.size();
    outcome.budget_exceeded = report.budget_exceeded;
    for (const auto& v : report.violations) {
      if (outcome.violation_samples.size() < 10) {
        outcome.violation_samples.push_back(v.describe());
      }
    }
    return outcome;
  }

  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    model::Universe u = random_universe(rng);
    if (options.corrupt) corrupt_universe(u, rng);
    auto requests = model::enumerate_requests(u);
    auto report = model::soundness_check(u, requests);
    ++outcome.universes;
    outcome.requests += report.requests_checked;
    outcome.violations += report.violations.size();
    outcome.budget_exceeded = outcome.budget_exceeded || report.budget_exceeded;
    for (const auto& v : report.violations) {
      if (outcome.violation_samples.size() < 10) {
        outcome.violation_samples.push_back("trial " + std::to_string(trial) + ": " +
                                            v.describe());
      }
    }
  }

  // enforcement replay on randomly generated ecosystems
  std::size_t n_ecosystems = std::min<std::size_t>(options.trials / 20, 500);
  if (options.trials > 0 && n_ecosystems == 0) n_ecosystems = 1;
  for (std::size_t e = 0; e < n_ecosystems; ++e) {
    ReplayEcosystem eco = random_ecosystem(rng);
    ++outcome.ecosystems;
    for (int s = 0; s < 20; ++s) {
      const std::string& comp = eco.comps[rng() % eco.comps.size()];
      const std::string& user = eco.users[rng() % eco.users.size()];
      std::string text = random_statement(rng, eco);
      ++outcome.statements;
      std::vector<engine::CapturedRequest> captured;
      try {
        engine::Session session = eco.monitor->open_session(comp, user);
        eco.monitor->execute_captured(session, text, &captured);
      } catch (const MonitorError&) {
        continue;  // rejected statements carry no soundness obligation
      }
      ++outcome.accepted;
      for (const auto& req : captured) {
        ReplayOutcome replay = replay_request(req);
        if (!replay.sb || !replay.req_valid) {
          ++outcome.replay_violations;
          if (outcome.violation_samples.size() < 10) {
            outcome.violation_samples.push_back("replay: " + replay.request + " sb=" +
                                                (replay.sb ? "1" : "0") + " req_valid=" +
                                                (replay.req_valid ? "1" : "0"));
          }
        }
      }
    }
  }
  return outcome;
}

}  // namespace crm::host
