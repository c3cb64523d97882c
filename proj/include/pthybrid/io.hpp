#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pthybrid/hybrid.hpp"
#include "pthybrid/scenarios.hpp"
#include "pthybrid/stability.hpp"
#include "pthybrid/switching.hpp"

namespace pth {

using json = nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest round-trippable text for a double (17 significant digits).
std::string format_double(double v);

void write_arc_csv(std::ostream& os, const HybridArc& arc);
json arc_to_json(const HybridArc& arc);

void write_signal_csv(std::ostream& os, const SwitchingSignal& signal);
json signal_sidecar(const SwitchingSignal& signal);
/// Reads `start_time,mode` rows plus the sidecar; an empty file is one piece in the first listed mode.
SwitchingSignal parse_signal(std::istream& csv, const json& sidecar);
SwitchingSignal read_signal(const std::string& csv_path, const std::string& sidecar_path);

json to_json(const ValidationReport& r);
json to_json(const TheoremConstants& k);
json to_json(const CertificateReport& r);
json to_json(const BoundReport& r);
json to_json(const BlowUpParams& p);
json to_json(const EigenvalueFloorReport& r);

json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);
void save_text(const std::string& path, const std::string& text);

BlowUpParams blowup_from_json(const json& j, BlowUpParams base);
ConsensusSpec consensus_spec_from_json(const json& j);
IntermittentSpec intermittent_spec_from_json(const json& j);
GameSpec game_spec_from_json(const json& j);

}  // namespace pth
