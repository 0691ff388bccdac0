#pragma once

// Model artifact container. One JSON document with top-level keys
// kind, version, feature_schema, payload. Round-trips bit-exactly
// (doubles serialize shortest-roundtrip).

#include <string>
#include <vector>

#include <json.hpp>

namespace retentia {

enum class ArtifactKind { Gbt, Proxy, Propensity, Policy };

const char* artifact_kind_name(ArtifactKind k);
ArtifactKind parse_artifact_kind(const std::string& s);

inline constexpr const char* kArtifactVersion = "1";

struct ModelArtifact {
    ArtifactKind kind = ArtifactKind::Gbt;
    std::string version = kArtifactVersion;
    std::vector<std::string> feature_schema;
    nlohmann::json payload;

    bool operator==(const ModelArtifact& other) const = default;
};

// Refuses artifacts whose feature_schema length does not match the payload
// parameter dimensionality.
void save_artifact(const ModelArtifact& artifact, const std::string& path);

// Validates version and payload shape; never returns a partial artifact.
ModelArtifact load_artifact(const std::string& path);

}  // namespace retentia
