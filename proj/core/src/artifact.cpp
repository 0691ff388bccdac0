#include "retentia/artifact.hpp"

#include <stdexcept>

#include "retentia/io.hpp"

using nlohmann::json;

namespace retentia {

const char* artifact_kind_name(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::Gbt: return "gbt";
        case ArtifactKind::Proxy: return "proxy";
        case ArtifactKind::Propensity: return "propensity";
        case ArtifactKind::Policy: return "policy";
    }
    throw std::logic_error("unknown artifact kind");
}

ArtifactKind parse_artifact_kind(const std::string& s) {
    if (s == "gbt") return ArtifactKind::Gbt;
    if (s == "proxy") return ArtifactKind::Proxy;
    if (s == "propensity") return ArtifactKind::Propensity;
    if (s == "policy") return ArtifactKind::Policy;
    throw std::runtime_error("unknown artifact kind '" + s + "'");
}

namespace {

// feature_schema length must equal the payload's parameter dimensionality.
void validate_schema(const ModelArtifact& a) {
    const std::size_t dim = a.feature_schema.size();
    switch (a.kind) {
        case ArtifactKind::Gbt:
            if (!a.payload.contains("trees") || !a.payload.contains("base_score"))
                throw std::runtime_error("gbt artifact payload missing trees/base_score");
            break;
        case ArtifactKind::Proxy:
        case ArtifactKind::Propensity: {
            const char* key = a.kind == ArtifactKind::Proxy ? "weights" : "coefficients";
            if (!a.payload.contains(key))
                throw std::runtime_error(std::string("artifact payload missing ") + key);
            if (a.payload.at(key).size() != dim)
                throw std::runtime_error(
                    "feature_schema length (" + std::to_string(dim) +
                    ") does not match parameter dimensionality (" +
                    std::to_string(a.payload.at(key).size()) + ")");
            break;
        }
        case ArtifactKind::Policy:
            if (!a.payload.contains("alpha") || !a.payload.contains("beta"))
                throw std::runtime_error("policy artifact payload missing alpha/beta");
            break;
    }
}

}  // namespace

void save_artifact(const ModelArtifact& artifact, const std::string& path) {
    validate_schema(artifact);
    json doc{{"kind", artifact_kind_name(artifact.kind)},
             {"version", artifact.version},
             {"feature_schema", artifact.feature_schema},
             {"payload", artifact.payload}};
    io::write_file(path, doc.dump(2) + "\n");
}

ModelArtifact load_artifact(const std::string& path) {
    const std::string content = io::read_file(path);
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::exception& e) {
        throw std::runtime_error("corrupted artifact " + path + ": " + e.what());
    }
    ModelArtifact a;
    try {
        a.kind = parse_artifact_kind(doc.at("kind").get<std::string>());
        a.version = doc.at("version").get<std::string>();
        a.feature_schema = doc.at("feature_schema").get<std::vector<std::string>>();
        a.payload = doc.at("payload");
    } catch (const json::exception& e) {
        throw std::runtime_error("corrupted artifact " + path + ": " + e.what());
    }
    if (a.version != kArtifactVersion)
        throw std::runtime_error("artifact version mismatch in " + path + ": expected " +
                                 std::string(kArtifactVersion) + ", found " + a.version);
    validate_schema(a);
    return a;
}

}  // namespace retentia
