#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crm/model.hpp"
#include "crm/monitor.hpp"

namespace crm::host {

struct BundleReport {
  std::size_t funits_integrated = 0;
  std::size_t activations_applied = 0;
  std::size_t wirings_applied = 0;
  std::size_t seed_rows = 0;
  std::vector<std::string> lines;  // human-review output, printed by the CLI
};

// Integrates every f-unit directory under bundle_dir (alphabetical), then
// activations, wirings, and seed data. With `only` set, handles just that
// f-unit. No partial integration: any failure throws IntegrationError before
// the caller persists anything.
BundleReport integrate_bundle(engine::Monitor& monitor, const std::filesystem::path& bundle_dir,
                              const std::string& only = "", bool force = false);

// Builds a one-request universe from an executed statement's captured scope
// and evaluates both policies on it.
struct ReplayOutcome {
  bool sb = false;
  bool req_valid = false;
  std::string request;
};
ReplayOutcome replay_request(const engine::CapturedRequest& captured);

struct SoundnessOptions {
  std::size_t trials = 10000;
  std::uint64_t seed = 42;
  bool corrupt = false;      // fault injection: mis-attribute one src per universe
  std::string fixture_path;  // when set, check this fixture instead of random universes
};

struct SoundnessOutcome {
  std::size_t universes = 0;
  std::size_t requests = 0;
  std::size_t violations = 0;
  std::size_t ecosystems = 0;
  std::size_t statements = 0;
  std::size_t accepted = 0;
  std::size_t replay_violations = 0;
  bool budget_exceeded = false;
  std::vector<std::string> violation_samples;

  std::size_t total_violations() const { return violations + replay_violations; }
  std::string report_text(const SoundnessOptions&) const;
};

SoundnessOutcome run_soundness(const SoundnessOptions& options);

}  // namespace crm::host
