#include "retentia/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "retentia/features.hpp"

namespace retentia::pipeline {

ProxyFeaturizer::ProxyFeaturizer(std::vector<InteractionRecord> interactions,
                                 const std::unordered_map<std::string, int>* item_topic,
                                 int n_topics, std::int64_t as_of_day)
    : n_topics_(n_topics), as_of_day_(as_of_day) {
    if (item_topic != nullptr) item_topic_ = *item_topic;
    items_ = compute_item_metadata(interactions, item_topic);
    for (auto& r : interactions) by_user_[r.user_id].push_back(std::move(r));

    // fix the schema from a representative row
    const FeatureVector probe = base_features("", "");
    schema_ = probe.names;
    for (std::size_t j = 0; j < probe.size(); ++j) {
        if (probe.groups[j] != FeatureGroup::P) aux_schema_.push_back(probe.names[j]);
    }
}

FeatureVector ProxyFeaturizer::base_features(const std::string& user_id,
                                             const std::string& item_id) const {
    static const std::vector<InteractionRecord> kEmptyHistory;
    const auto hist_it = by_user_.find(user_id);
    const auto& history = hist_it != by_user_.end() ? hist_it->second : kEmptyHistory;

    ItemMetadata item;
    item.item_id = item_id;
    if (auto it = items_.find(item_id); it != items_.end()) item = it->second;
    if (item.topic < 0) {
        if (auto it = item_topic_.find(item_id); it != item_topic_.end()) item.topic = it->second;
    }

    AssemblyContext ctx;
    ctx.item_topic = item_topic_.empty() ? nullptr : &item_topic_;
    ctx.n_topics = n_topics_;
    return assemble_features(history, item, Demographics{}, std::nullopt,
                             FeatureMode::proxy, as_of_day_, ctx);
}

std::vector<double> ProxyFeaturizer::aux_row(const FeatureVector& base) const {
    std::vector<double> row;
    row.reserve(aux_schema_.size());
    for (std::size_t j = 0; j < base.size(); ++j) {
        if (base.groups[j] != FeatureGroup::P) row.push_back(base.values[j]);
    }
    return row;
}

FeatureVector ProxyFeaturizer::features(const std::string& user_id,
                                        const std::string& item_id) const {
    FeatureVector fv = base_features(user_id, item_id);
    if (aux_set_) {
        const std::vector<double> ar = aux_row(fv);
        for (std::size_t j = 0; j < fv.size(); ++j) {
            if (fv.groups[j] != FeatureGroup::P) continue;
            if (fv.names[j] == "pred_like") fv.values[j] = aux_like_.predict(ar);
            if (fv.names[j] == "pred_long_watch") fv.values[j] = aux_long_watch_.predict(ar);
        }
    }
    return fv;
}

void ProxyFeaturizer::set_aux_models(proxy::ProxyModel aux_like,
                                     proxy::ProxyModel aux_long_watch) {
    if (aux_like.feature_schema != aux_schema_ || aux_long_watch.feature_schema != aux_schema_)
        throw std::invalid_argument("auxiliary model schema mismatch");
    aux_like_ = std::move(aux_like);
    aux_long_watch_ = std::move(aux_long_watch);
    aux_set_ = true;
}

namespace {

// Fallback when an auxiliary outcome is single-class in the subsample: a
// constant predictor at the (clamped) outcome prevalence.
proxy::ProxyModel constant_model(std::vector<std::string> schema, double prevalence) {
    const double p = std::clamp(prevalence, 1e-3, 1.0 - 1e-3);
    proxy::ProxyModel m;
    m.weights.assign(schema.size(), 0.0);
    m.bias = std::log(p / (1.0 - p));
    m.feature_schema = std::move(schema);
    return m;
}

proxy::ProxyModel fit_aux(const std::vector<double>& x, std::size_t n_rows,
                          const std::vector<std::string>& schema,
                          const std::vector<int>& labels, double lambda) {
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    if (n_pos == 0 || n_pos == n_rows)
        return constant_model(schema, static_cast<double>(n_pos) / static_cast<double>(n_rows));
    return proxy::train_proxy(std::span<const double>(x), n_rows, schema,
                              std::span<const int>(labels), lambda, 1e-6, 200);
}

}  // namespace

ProxyTrainingBundle build_proxy_dataset(
    const std::vector<InteractionRecord>& interactions,
    const std::vector<SurveyResponse>& surveys,
    const std::unordered_map<std::string, int>* item_topic, int n_topics,
    std::int64_t as_of_day, Construct construct, double aux_lambda) {
    if (interactions.empty()) throw std::invalid_argument("build_proxy_dataset: no interactions");

    auto featurizer = std::make_shared<ProxyFeaturizer>(interactions, item_topic,
                                                        n_topics, as_of_day);
    // the non-P slice of the full schema, in schema order
    std::vector<std::string> aux_schema;
    const FeatureVector probe = featurizer->base_features("", "");
    for (std::size_t j = 0; j < probe.size(); ++j) {
        if (probe.groups[j] != FeatureGroup::P) aux_schema.push_back(probe.names[j]);
    }

    // auxiliary engagement models on a deterministic stride subsample
    const std::size_t stride = std::max<std::size_t>(1, interactions.size() / 20000);
    std::vector<double> aux_x;
    std::vector<int> like_labels, watch_labels_raw;
    std::vector<double> watch_times;
    for (std::size_t i = 0; i < interactions.size(); i += stride) {
        const auto& r = interactions[i];
        const FeatureVector base = featurizer->base_features(r.user_id, r.item_id);
        for (std::size_t j = 0; j < base.size(); ++j) {
            if (base.groups[j] != FeatureGroup::P) aux_x.push_back(base.values[j]);
        }
        like_labels.push_back(r.like > 0 ? 1 : 0);
        watch_times.push_back(r.watch_time_seconds);
    }
    const std::size_t n_aux = like_labels.size();
    std::vector<double> sorted_watch = watch_times;
    std::sort(sorted_watch.begin(), sorted_watch.end());
    const double watch_median = sorted_watch[n_aux / 2];
    std::vector<int> watch_labels;
    watch_labels.reserve(n_aux);
    for (double w : watch_times) watch_labels.push_back(w > watch_median ? 1 : 0);

    proxy::ProxyModel aux_like = fit_aux(aux_x, n_aux, aux_schema, like_labels, aux_lambda);
    proxy::ProxyModel aux_watch = fit_aux(aux_x, n_aux, aux_schema, watch_labels, aux_lambda);
    featurizer->set_aux_models(std::move(aux_like), std::move(aux_watch));

    // per-user 28-day engagement totals for the low-signal segment filter
    std::unordered_map<std::string, double> engagement;
    for (const auto& r : interactions) {
        if (r.day < as_of_day - 28 || r.day > as_of_day - 1) continue;
        engagement[r.user_id] += 1.0 + static_cast<double>(r.like + r.comment + r.share);
    }

    Dataset ds;
    for (const auto& s : surveys) {
        if (s.construct != construct) continue;
        const std::optional<int> label = binarize_survey(s.rating);
        if (!label.has_value()) continue;

        const FeatureVector fv = featurizer->features(s.user_id, s.item_id);
        if (ds.feature_names.empty()) {
            ds.feature_names = fv.names;
            ds.feature_groups = fv.groups;
        }
        ds.x.insert(ds.x.end(), fv.values.begin(), fv.values.end());
        ds.labels.push_back(*label);
        ds.user_ids.push_back(s.user_id);
        auto it = engagement.find(s.user_id);
        ds.engagement_28d.push_back(it != engagement.end() ? it->second : 0.0);
    }
    if (ds.n() == 0)
        throw std::invalid_argument("build_proxy_dataset: no usable survey responses");

    ProxyTrainingBundle bundle;
    bundle.dataset = std::move(ds);
    bundle.featurizer = std::move(featurizer);
    return bundle;
}

}  // namespace retentia::pipeline
