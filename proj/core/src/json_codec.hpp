#pragma once

// Internal JSON mapping for the domain types. Not installed.

#include <json.hpp>

#include "dialoforge/schema.hpp"

namespace dialoforge::codec {

using json = nlohmann::ordered_json;

json style_to_json(const StyleSpec& s);
json script_to_json(const DialogueScript& s);
json record_to_json(const VerificationRecord& v);
json entry_to_json(const ManifestEntry& e);

// These throw std::invalid_argument with a field path on a shape mismatch.
StyleSpec style_from_json(const json& j);
DialogueScript script_from_json(const json& j);
VerificationRecord record_from_json(const json& j);
ManifestEntry entry_from_json(const json& j);

}  // namespace dialoforge::codec
