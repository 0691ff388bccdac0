#pragma once

// Glue between raw interaction/survey logs and the proxy model: per-pair
// feature rows (groups P,E,C,I,N), with the P group supplied by auxiliary
// logistic engagement predictors trained on the same logs.

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "retentia/features.hpp"
#include "retentia/proxy.hpp"
#include "retentia/types.hpp"

namespace retentia::pipeline {

// Produces proxy-mode feature rows for arbitrary (user, item) pairs from a
// fixed interaction log. Immutable after construction.
class ProxyFeaturizer {
public:
    ProxyFeaturizer(std::vector<InteractionRecord> interactions,
                    const std::unordered_map<std::string, int>* item_topic,
                    int n_topics, std::int64_t as_of_day);

    // Raw {E,C,I,N} row with zeroed P group.
    FeatureVector base_features(const std::string& user_id, const std::string& item_id) const;

    // Full {P,E,C,I,N} row; P comes from the auxiliary models when set.
    FeatureVector features(const std::string& user_id, const std::string& item_id) const;

    void set_aux_models(proxy::ProxyModel aux_like, proxy::ProxyModel aux_long_watch);
    bool has_aux_models() const { return aux_set_; }
    const proxy::ProxyModel& aux_like() const { return aux_like_; }
    const proxy::ProxyModel& aux_long_watch() const { return aux_long_watch_; }

    std::int64_t as_of_day() const { return as_of_day_; }
    const std::vector<std::string>& schema() const { return schema_; }

private:
    std::unordered_map<std::string, std::vector<InteractionRecord>> by_user_;
    std::unordered_map<std::string, ItemMetadata> items_;
    std::unordered_map<std::string, int> item_topic_;
    int n_topics_ = 0;
    std::int64_t as_of_day_ = 0;
    proxy::ProxyModel aux_like_, aux_long_watch_;
    bool aux_set_ = false;
    std::vector<std::string> schema_;  // full P..N schema

    std::vector<double> aux_row(const FeatureVector& base) const;
    std::vector<std::string> aux_schema_;
};

struct ProxyTrainingBundle {
    Dataset dataset;  // one row per non-neutral response to the construct
    std::shared_ptr<ProxyFeaturizer> featurizer;  // aux models installed
};

// Builds the proxy training dataset for `construct` (default Retentive
// Relevance): binarized labels, neutral ratings dropped, features at the
// response day. Auxiliary like / long-watch predictors are trained on a
// deterministic subsample of the interaction log.
ProxyTrainingBundle build_proxy_dataset(
    const std::vector<InteractionRecord>& interactions,
    const std::vector<SurveyResponse>& surveys,
    const std::unordered_map<std::string, int>* item_topic, int n_topics,
    std::int64_t as_of_day, Construct construct = Construct::RetentiveRelevance,
    double aux_lambda = 1e-3);

}  // namespace retentia::pipeline
