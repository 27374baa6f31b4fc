#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "crm/host.hpp"
#include "crm/monitor.hpp"
#include "crm/service.hpp"

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string default_store_path() {
  if (const char* env = std::getenv("CRM_STORE")) return env;
  return "crm.store.json";
}

std::unique_ptr<crm::engine::Monitor> load_monitor(const std::string& path) {
  if (!fs::exists(path)) {
    std::cerr << "store not found at " << path << " (run `crm integrate` first)\n";
    std::exit(1);
  }
  return crm::engine::Monitor::load_file(path);
}

std::string render_tsv(const crm::Value& v) { return v.render(); }

int parse_socket(const std::string& spec, std::string& host) {
  host = "127.0.0.1";
  std::string port_part = spec;
  auto colon = spec.rfind(':');
  if (colon != std::string::npos) {
    if (colon > 0) host = spec.substr(0, colon);
    port_part = spec.substr(colon + 1);
  }
  try {
    return std::stoi(port_part);
  } catch (...) {
    std::cerr << "invalid socket address '" << spec << "' (expected [host:]port)\n";
    std::exit(1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crm - centralized reference monitor for extensible app ecosystems"};
  app.require_subcommand(1);

  std::string store_path = default_store_path();
  app.add_option("--store", store_path, "store file path (env CRM_STORE)")
      ->capture_default_str();

  // integrate
  auto* integrate = app.add_subcommand("integrate", "integrate an app bundle");
  std::string bundle_dir;
  std::string only_funit;
  bool force = false;
  integrate->add_option("bundle", bundle_dir, "bundle directory")->required();
  integrate->add_option("--funit", only_funit, "integrate only this f-unit");
  integrate->add_flag("--force", force, "replace an already integrated f-unit");

  // query
  auto* query = app.add_subcommand("query", "execute a statement under a session");
  std::string q_funit, q_user, q_sql;
  query->add_option("--funit", q_funit, "issuing f-unit")->required();
  query->add_option("--user", q_user, "authenticated user")->required();
  query->add_option("sql", q_sql, "statement text")->required();

  // graph
  auto* graph_cmd = app.add_subcommand("graph", "dump the combined ecosystem graph");

  // simulate-change
  auto* simulate = app.add_subcommand("simulate-change", "stale closure and rebuild order");
  std::string sim_funit;
  simulate->add_option("--funit", sim_funit, "changed f-unit")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "run the wire-protocol service");
  std::string socket_spec = "127.0.0.1:7070";
  serve->add_option("--socket", socket_spec, "listen address ([host:]port)")
      ->capture_default_str();

  // soundness
  auto* soundness = app.add_subcommand("soundness", "model-vs-sandbox soundness check");
  crm::host::SoundnessOptions sopts;
  soundness->add_option("--trials", sopts.trials, "number of random universes")
      ->capture_default_str();
  soundness->add_option("--seed", sopts.seed, "rng seed")->capture_default_str();
  soundness->add_flag("--corrupt", sopts.corrupt,
                      "fault injection: mis-attribute one src per universe");
  soundness->add_option("--fixture", sopts.fixture_path, "check a universe fixture file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*integrate) {
      std::unique_ptr<crm::engine::Monitor> monitor;
      if (fs::exists(store_path)) {
        monitor = crm::engine::Monitor::load_file(store_path);
      } else {
        monitor = std::make_unique<crm::engine::Monitor>();
      }
      try {
        auto report = crm::host::integrate_bundle(*monitor, bundle_dir, only_funit, force);
        for (const auto& line : report.lines) std::cout << line << "\n";
        std::cout << report.funits_integrated << " f-units integrated, "
                  << report.wirings_applied << " wirings applied, "
                  << report.activations_applied << " activations, " << report.seed_rows
                  << " seed rows\n";
      } catch (const crm::engine::IntegrationError& e) {
        for (const auto& d : e.diagnostics()) std::cerr << d << "\n";
        return 1;
      }
      monitor->save_file(store_path);
      return 0;
    }

    if (*query) {
      auto monitor = load_monitor(store_path);
      try {
        crm::engine::Session session = monitor->open_session(q_funit, q_user);
        crm::engine::ExecResult result = monitor->execute(session, q_sql);
        if (result.is_rows) {
          for (const auto& row : result.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
              if (i) std::cout << "\t";
              std::cout << render_tsv(row[i]);
            }
            std::cout << "\n";
          }
        } else {
          std::cout << result.affected << "\n";
          for (const auto& c : result.cascades) std::cout << "# " << c.describe() << "\n";
          monitor->save_file(store_path);
        }
        return 0;
      } catch (const crm::MonitorError& e) {
        std::cerr << e.what() << "\n";
        return crm::exit_code(e.code());
      }
    }

    if (*graph_cmd) {
      auto monitor = load_monitor(store_path);
      for (const auto& line : monitor->ecosystem().export_edges()) std::cout << line << "\n";
      return 0;
    }

    if (*simulate) {
      auto monitor = load_monitor(store_path);
      try {
        auto stale = monitor->ecosystem().stale_closure(sim_funit);
        auto order = monitor->ecosystem().rebuild_order(stale);
        std::cout << "stale:";
        for (const auto& c : stale) std::cout << " " << c;
        std::cout << "\nrebuild order:";
        for (const auto& c : order) std::cout << " " << c;
        std::cout << "\n";
        return 0;
      } catch (const crm::graph::GraphError& e) {
        std::cerr << e.what() << "\n";
        return 1;
      }
    }

    if (*serve) {
      auto monitor = load_monitor(store_path);
      std::string host;
      int port = parse_socket(socket_spec, host);
      crm::host::Server server(*monitor);
      int bound = server.start(host, port);
      std::cout << "listening on " << host << ":" << bound << "\n";
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      server.stop();
      monitor->save_file(store_path);
      return 0;
    }

    if (*soundness) {
      auto outcome = crm::host::run_soundness(sopts);
      std::cout << outcome.report_text(sopts);
      return outcome.total_violations() == 0 && !outcome.budget_exceeded ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
