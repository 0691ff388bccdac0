#include "retentia/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace retentia {

std::optional<int> binarize_survey(int rating) {
    if (rating < 1 || rating > 5)
        throw std::invalid_argument("survey rating out of [1,5]: " + std::to_string(rating));
    if (rating >= 4) return 1;
    if (rating <= 2) return 0;
    return std::nullopt;  // neutral, excluded from proxy training
}

std::int64_t nearest_rank_percentile(std::vector<std::int64_t> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of empty distribution");
    if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile q out of [0,100]");
    std::sort(values.begin(), values.end());
    // nearest-rank: smallest value with at least q% of the mass at or below it
    const std::size_t n = values.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    return values[rank - 1];
}

bool retention_label(std::int64_t next_day_views,
                     const std::vector<std::int64_t>& active_view_distribution) {
    if (active_view_distribution.empty())
        throw std::invalid_argument("retention_label: empty active view distribution");
    for (std::int64_t v : active_view_distribution) {
        if (v < 0) throw std::invalid_argument("retention_label: negative view count");
    }
    return next_day_views > nearest_rank_percentile(active_view_distribution, 5.0);
}

Dataset Dataset::select_groups(const std::set<FeatureGroup>& keep) const {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < p(); ++j) {
        if (keep.count(feature_groups[j])) cols.push_back(j);
    }
    Dataset out;
    for (std::size_t j : cols) {
        out.feature_names.push_back(feature_names[j]);
        out.feature_groups.push_back(feature_groups[j]);
    }
    out.labels = labels;
    out.engagement_28d = engagement_28d;
    out.user_ids = user_ids;
    out.x.reserve(n() * cols.size());
    for (std::size_t i = 0; i < n(); ++i) {
        const auto r = row(i);
        for (std::size_t j : cols) out.x.push_back(r[j]);
    }
    return out;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.feature_names = feature_names;
    out.feature_groups = feature_groups;
    out.x.reserve(rows.size() * p());
    for (std::size_t i : rows) {
        const auto r = row(i);
        out.x.insert(out.x.end(), r.begin(), r.end());
        if (!labels.empty()) out.labels.push_back(labels[i]);
        if (!engagement_28d.empty()) out.engagement_28d.push_back(engagement_28d[i]);
        if (!user_ids.empty()) out.user_ids.push_back(user_ids[i]);
    }
    return out;
}

namespace {

struct WindowAggregate {
    double likes = 0, comments = 0, shares = 0, skips = 0;
    double watch_time = 0;
    double views = 0;
    std::int64_t active_days = 0;
};

WindowAggregate aggregate_window(const std::vector<InteractionRecord>& history,
                                 std::int64_t from_day, std::int64_t to_day) {
    WindowAggregate agg;
    std::set<std::int64_t> days;
    for (const auto& r : history) {
        if (r.day < from_day || r.day > to_day) continue;
        agg.likes += static_cast<double>(r.like);
        agg.comments += static_cast<double>(r.comment);
        agg.shares += static_cast<double>(r.share);
        agg.skips += static_cast<double>(r.skip);
        agg.watch_time += r.watch_time_seconds;
        agg.views += 1.0;
        days.insert(r.day);
    }
    agg.active_days = static_cast<std::int64_t>(days.size());
    return agg;
}

const char* construct_prefix(Construct c) {
    switch (c) {
        case Construct::RetentiveRelevance: return "rr";
        case Construct::WorthYourTime: return "wyt";
        case Construct::InterestMatching: return "im";
    }
    throw std::logic_error("unknown construct");
}

}  // namespace

FeatureVector assemble_features(const std::vector<InteractionRecord>& history,
                                const ItemMetadata& item,
                                const Demographics& demographics,
                                const std::optional<SurveyResponse>& survey,
                                FeatureMode mode,
                                std::int64_t as_of_day,
                                const AssemblyContext& ctx) {
    FeatureVector fv;
    const WindowAggregate hist = aggregate_window(history, as_of_day - 28, as_of_day - 1);
    const WindowAggregate week = aggregate_window(history, as_of_day - 7, as_of_day - 1);
    const WindowAggregate today = aggregate_window(history, as_of_day, as_of_day);

    // interactions with the target item, up to and including as_of_day
    double item_views = 0, item_watch = 0, item_liked = 0, item_skipped = 0;
    for (const auto& r : history) {
        if (r.item_id != item.item_id || r.day > as_of_day) continue;
        item_views += 1.0;
        item_watch += r.watch_time_seconds;
        item_liked += static_cast<double>(r.like);
        item_skipped += static_cast<double>(r.skip);
    }

    if (mode == FeatureMode::retention) {
        fv.push(FeatureGroup::H, "hist_views_28d", hist.views);
        fv.push(FeatureGroup::H, "hist_likes_28d", hist.likes);
        fv.push(FeatureGroup::H, "hist_comments_28d", hist.comments);
        fv.push(FeatureGroup::H, "hist_shares_28d", hist.shares);
        fv.push(FeatureGroup::H, "hist_skips_28d", hist.skips);
        fv.push(FeatureGroup::H, "hist_watch_time_28d", hist.watch_time);
        fv.push(FeatureGroup::H, "history_days", static_cast<double>(hist.active_days));

        fv.push(FeatureGroup::R, "today_views", today.views);
        fv.push(FeatureGroup::R, "today_likes", today.likes);
        fv.push(FeatureGroup::R, "today_skips", today.skips);
        fv.push(FeatureGroup::R, "today_watch_time", today.watch_time);

        fv.push(FeatureGroup::U, "item_views", item_views);
        fv.push(FeatureGroup::U, "item_watch_time", item_watch);
        fv.push(FeatureGroup::U, "item_liked", item_liked);
        fv.push(FeatureGroup::U, "item_skipped", item_skipped);

        fv.push(FeatureGroup::C, "item_popularity", item.popularity);
        fv.push(FeatureGroup::C, "item_mean_watch_time", item.mean_watch_time);
        fv.push(FeatureGroup::C, "item_skip_rate", item.skip_rate);

        fv.push(FeatureGroup::D, "age_cohort", static_cast<double>(demographics.age_cohort));
        fv.push(FeatureGroup::D, "tenure_days", demographics.tenure_days);
        fv.push(FeatureGroup::D, "region", static_cast<double>(demographics.region));

        if (survey.has_value()) {
            // One-hot over the five Likert levels, one construct per row.
            const char* prefix = construct_prefix(survey->construct);
            for (int level = 1; level <= 5; ++level) {
                fv.push(FeatureGroup::S,
                        std::string(prefix) + "_level_" + std::to_string(level),
                        survey->rating == level ? 1.0 : 0.0);
            }
        }
        return fv;
    }

    // proxy mode: {P, E, C, I, N}
    fv.push(FeatureGroup::P, "pred_like", ctx.pred_like);
    fv.push(FeatureGroup::P, "pred_long_watch", ctx.pred_long_watch);

    const double hist_days = std::max(1.0, static_cast<double>(hist.active_days));
    fv.push(FeatureGroup::E, "like_rate_7d", week.views > 0 ? week.likes / week.views : 0.0);
    fv.push(FeatureGroup::E, "like_rate_28d", hist.views > 0 ? hist.likes / hist.views : 0.0);
    fv.push(FeatureGroup::E, "watch_per_day_28d", hist.watch_time / hist_days);
    fv.push(FeatureGroup::E, "views_per_day_28d", hist.views / hist_days);

    fv.push(FeatureGroup::C, "item_popularity", item.popularity);
    fv.push(FeatureGroup::C, "item_mean_watch_time", item.mean_watch_time);
    fv.push(FeatureGroup::C, "item_skip_rate", item.skip_rate);

    // topic affinity from watch-time and view shares in the item's topic
    double topic_watch = 0, topic_views = 0;
    if (ctx.item_topic != nullptr && item.topic >= 0) {
        for (const auto& r : history) {
            if (r.day > as_of_day) continue;
            auto it = ctx.item_topic->find(r.item_id);
            if (it == ctx.item_topic->end() || it->second != item.topic) continue;
            topic_watch += r.watch_time_seconds;
            topic_views += 1.0;
        }
    }
    const double total_watch = hist.watch_time + today.watch_time;
    const double total_views = hist.views + today.views;
    fv.push(FeatureGroup::I, "topic_watch_share",
            total_watch > 0 ? topic_watch / total_watch : 0.0);
    fv.push(FeatureGroup::I, "topic_view_share",
            total_views > 0 ? topic_views / total_views : 0.0);
    fv.push(FeatureGroup::I, "item_prior_views", item_views);

    fv.push(FeatureGroup::N, "user_skip_rate",
            total_views > 0 ? (hist.skips + today.skips) / total_views : 0.0);
    fv.push(FeatureGroup::N, "item_skip_rate_n", item.skip_rate);

    return fv;
}

std::unordered_map<std::string, ItemMetadata> compute_item_metadata(
    const std::vector<InteractionRecord>& interactions,
    const std::unordered_map<std::string, int>* item_topic) {
    struct Acc {
        double views = 0, watch = 0, skips = 0;
    };
    std::unordered_map<std::string, Acc> acc;
    for (const auto& r : interactions) {
        auto& a = acc[r.item_id];
        a.views += 1.0;
        a.watch += r.watch_time_seconds;
        a.skips += static_cast<double>(r.skip);
    }
    double max_views = 1.0;
    for (const auto& [_, a] : acc) max_views = std::max(max_views, a.views);

    std::unordered_map<std::string, ItemMetadata> out;
    for (const auto& [id, a] : acc) {
        ItemMetadata m;
        m.item_id = id;
        m.popularity = a.views / max_views;
        m.mean_watch_time = a.views > 0 ? a.watch / a.views : 0.0;
        m.skip_rate = a.views > 0 ? a.skips / a.views : 0.0;
        if (item_topic != nullptr) {
            auto it = item_topic->find(id);
            if (it != item_topic->end()) m.topic = it->second;
        }
        out.emplace(id, std::move(m));
    }
    return out;
}

Dataset build_retention_dataset(
    const std::vector<InteractionRecord>& interactions,
    const std::vector<SurveyResponse>& surveys,
    const std::vector<RetentionLabel>& labels,
    Construct construct,
    const std::unordered_map<std::string, Demographics>* demographics,
    const AssemblyContext& ctx) {
    std::unordered_map<std::string, std::vector<InteractionRecord>> by_user;
    for (const auto& r : interactions) by_user[r.user_id].push_back(r);

    std::unordered_map<std::string, bool> label_of;  // user_id|day -> retained
    for (const auto& l : labels) label_of[l.user_id + "|" + std::to_string(l.day)] = l.retained;

    const auto items = compute_item_metadata(interactions, ctx.item_topic);
    static const std::vector<InteractionRecord> kEmptyHistory;

    Dataset ds;
    for (const auto& s : surveys) {
        if (s.construct != construct) continue;
        const auto lab = label_of.find(s.user_id + "|" + std::to_string(s.day));
        if (lab == label_of.end()) continue;

        const auto hist_it = by_user.find(s.user_id);
        const auto& history = hist_it != by_user.end() ? hist_it->second : kEmptyHistory;

        ItemMetadata item;
        item.item_id = s.item_id;
        if (auto it = items.find(s.item_id); it != items.end()) item = it->second;

        Demographics demo;
        if (demographics != nullptr) {
            if (auto it = demographics->find(s.user_id); it != demographics->end())
                demo = it->second;
        }

        const FeatureVector fv = assemble_features(history, item, demo, s,
                                                   FeatureMode::retention, s.day, ctx);
        if (ds.feature_names.empty()) {
            ds.feature_names = fv.names;
            ds.feature_groups = fv.groups;
        } else if (fv.names != ds.feature_names) {
            throw std::logic_error("inconsistent feature schema across rows");
        }
        ds.x.insert(ds.x.end(), fv.values.begin(), fv.values.end());
        ds.labels.push_back(lab->second ? 1 : 0);
        ds.user_ids.push_back(s.user_id);

        const WindowAggregate hist28 = aggregate_window(history, s.day - 28, s.day - 1);
        ds.engagement_28d.push_back(hist28.views + hist28.likes + hist28.comments +
                                    hist28.shares);
    }
    return ds;
}

}  // namespace retentia
