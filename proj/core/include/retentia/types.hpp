#pragma once

// Shared domain types. Everything here is immutable after construction and
// safe to share across threads.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace retentia {

enum class Construct { RetentiveRelevance, WorthYourTime, InterestMatching };

inline const char* construct_name(Construct c) {
    switch (c) {
        case Construct::RetentiveRelevance: return "retentive_relevance";
        case Construct::WorthYourTime: return "worth_your_time";
        case Construct::InterestMatching: return "interest_matching";
    }
    throw std::logic_error("unknown construct");
}

Construct parse_construct(const std::string& name);

// One user-item Likert rating. rating is on a 5-point scale, 5 = "Very likely".
struct SurveyResponse {
    std::string user_id;
    std::string item_id;
    Construct construct = Construct::RetentiveRelevance;
    int rating = 0;      // in [1, 5]
    std::int64_t day = 0;  // epoch-days
};

struct InteractionRecord {
    std::string user_id;
    std::string item_id;
    std::int64_t day = 0;
    std::int64_t like = 0;
    std::int64_t comment = 0;
    std::int64_t share = 0;
    std::int64_t skip = 0;
    double watch_time_seconds = 0.0;
};

struct RetentionLabel {
    std::string user_id;
    std::int64_t day = 0;  // label day; outcome observed on day + 1
    bool retained = false;
};

// Feature group tags. H..D feed the retention models, P..N the proxy model,
// S carries the survey one-hot.
enum class FeatureGroup : char {
    H = 'H',  // historical engagement, 28-day aggregates
    R = 'R',  // real-time / same-day signals
    U = 'U',  // user-content interactions with the surveyed item
    C = 'C',  // content metadata
    D = 'D',  // demographics and usage controls
    P = 'P',  // behavioral prediction scores
    E = 'E',  // temporal engagement rates
    I = 'I',  // user-content interaction patterns
    N = 'N',  // negative feedback indicators
    S = 'S',  // survey response one-hot
};

// Named, grouped dense feature vector. Dimension order is fixed per
// pipeline run; assembly never leaves missing entries (absent raw data is
// imputed as zero plus a presence flag).
struct FeatureVector {
    std::vector<FeatureGroup> groups;
    std::vector<std::string> names;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }

    void push(FeatureGroup g, std::string name, double v) {
        groups.push_back(g);
        names.push_back(std::move(name));
        values.push_back(v);
    }
};

// Row-major dense dataset with per-column group tags. Rows additionally
// carry the 28-day engagement total used by the low-signal segment filter.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<FeatureGroup> feature_groups;
    std::vector<double> x;  // n * p, row-major
    std::vector<int> labels;
    std::vector<double> engagement_28d;
    std::vector<std::string> user_ids;

    std::size_t n() const { return feature_names.empty() ? 0 : x.size() / feature_names.size(); }
    std::size_t p() const { return feature_names.size(); }

    std::span<const double> row(std::size_t i) const {
        return {x.data() + i * p(), p()};
    }

    Dataset select_groups(const std::set<FeatureGroup>& keep) const;
    Dataset select_rows(const std::vector<std::size_t>& rows) const;
};

// rating 4-5 -> 1, 1-2 -> 0, 3 -> excluded (nullopt).
std::optional<int> binarize_survey(int rating);

// Nearest-rank percentile of a non-empty list (q in [0, 100]).
std::int64_t nearest_rank_percentile(std::vector<std::int64_t> values, double q);

// True iff next_day_views strictly exceeds the nearest-rank 5th percentile
// of the active-user view distribution.
bool retention_label(std::int64_t next_day_views,
                     const std::vector<std::int64_t>& active_view_distribution);

}  // namespace retentia
