// Pipeline driver: one subcommand per stage, a single JSON config, one
// global seed fanned out per stage, and a manifest in every stage output
// directory sufficient to reproduce it.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <unordered_map>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "retentia/artifact.hpp"
#include "retentia/bias.hpp"
#include "retentia/evaluation.hpp"
#include "retentia/features.hpp"
#include "retentia/gbt.hpp"
#include "retentia/io.hpp"
#include "retentia/pipeline.hpp"
#include "retentia/proxy.hpp"
#include "retentia/ranking.hpp"
#include "retentia/report.hpp"
#include "retentia/rng.hpp"
#include "retentia/shap.hpp"
#include "retentia/stats.hpp"
#include "retentia/synthworld.hpp"
#include "retentia/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace retentia;

namespace {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json default_config() {
    json world = synth::WorldConfig{}.to_json();
    world.erase("seed");  // filled from the global seed unless set explicitly
    return json{
        {"world", std::move(world)},
        {"paths", json::object()},  // optional external interactions/surveys/labels
        {"construct", "retentive_relevance"},
        {"gbt",
         {{"n_trees", 60},
          {"learning_rate", 0.1},
          {"max_depth", 3},
          {"min_samples_leaf", 20},
          {"l2_leaf", 1.0}}},
        {"k_folds", 10},
        {"bootstrap_iterations", 1000},
        {"lambda", 1e-3},
        {"pos_precision_target", 0.80},
        {"neg_precision_target", 0.60},
        {"alpha", "auto"},  // 0.5 * IQR of the base scores in play
        {"beta", 0.5},
        {"trim_low", 0.1},
        {"trim_high", 0.9},
        {"mi_bins", 5},
        {"smd_threshold", 0.1},
        {"ab_days", 14},
        {"slate_size", 6},
        {"candidate_pool", 25},
        {"explain_rows", 3},
        {"explain_background", 50},
        {"shap_permutations", 2000},
        {"calibration_fraction", 0.25},
        {"seed", 1}};
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct StageContext {
    json config;
    std::uint64_t seed = 1;
    fs::path out_root;
    int threads = 1;
    std::vector<std::string> warnings;

    std::uint64_t stage_seed(const std::string& stage) const {
        return rng::mix(seed, fnv1a(stage));
    }
    fs::path stage_dir(const std::string& stage) const { return out_root / stage; }
    std::string config_hash() const {
        return std::to_string(fnv1a(config.dump()));
    }

    synth::WorldConfig world_config() const {
        json wj = config.at("world");
        if (!wj.contains("seed")) wj["seed"] = seed;
        return synth::WorldConfig::from_json(wj);
    }

    std::string input_path(const std::string& key, const std::string& fallback) const {
        const json& paths = config.at("paths");
        if (paths.contains(key)) return paths.at(key).get<std::string>();
        const fs::path p = out_root / "generate" / fallback;
        if (!fs::exists(p))
            throw ValidationError("missing input '" + key + "': run generate first or set paths." +
                                  key);
        return p.string();
    }

    gbt::GbtParams gbt_params(std::uint64_t stage_seed) const {
        const json& g = config.at("gbt");
        gbt::GbtParams p;
        p.n_trees = g.at("n_trees").get<int>();
        p.learning_rate = g.at("learning_rate").get<double>();
        p.max_depth = g.at("max_depth").get<int>();
        p.min_samples_leaf = g.at("min_samples_leaf").get<int>();
        p.l2_leaf = g.at("l2_leaf").get<double>();
        p.seed = stage_seed;
        return p;
    }
};

void write_manifest(const StageContext& ctx, const std::string& stage,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json m{{"stage", stage},
           {"config_hash", ctx.config_hash()},
           {"seed", ctx.seed},
           {"stage_seed", ctx.stage_seed(stage)},
           {"inputs", inputs},
           {"outputs", outputs},
           {"warnings", ctx.warnings},
           {"versions", {{"retentia", "0.1.0"}, {"artifact", kArtifactVersion}}}};
    io::write_file((ctx.stage_dir(stage) / "manifest.json").string(), m.dump(2) + "\n");
}

struct LoadedData {
    std::vector<InteractionRecord> interactions;
    std::vector<SurveyResponse> surveys;
    std::vector<RetentionLabel> labels;
    std::vector<std::string> paths;
};

LoadedData load_inputs(const StageContext& ctx, bool need_labels = true) {
    LoadedData d;
    const std::string ip = ctx.input_path("interactions", "interactions.jsonl");
    const std::string sp = ctx.input_path("surveys", "surveys.jsonl");
    d.interactions = io::load_interactions(ip, io::format_from_path(ip));
    d.surveys = io::load_surveys(sp, io::format_from_path(sp));
    d.paths = {ip, sp};
    if (need_labels) {
        const std::string lp = ctx.input_path("labels", "labels.jsonl");
        d.labels = io::load_labels(lp, io::format_from_path(lp));
        d.paths.push_back(lp);
    }
    return d;
}

// ---------------------------------------------------------------------------

void stage_generate(StageContext& ctx) {
    const synth::WorldConfig wc = ctx.world_config();
    const synth::SynthWorld world = synth::SynthWorld::generate(wc);
    const fs::path dir = ctx.stage_dir("generate");
    const synth::EmittedPaths paths = world.emit_datasets(dir.string());
    io::write_file((dir / "world_config.json").string(), wc.to_json().dump(2) + "\n");
    write_manifest(ctx, "generate", {},
                   {paths.interactions, paths.surveys, paths.labels,
                    (dir / "world_config.json").string()});
}

void stage_debias(StageContext& ctx) {
    const synth::SynthWorld world = synth::SynthWorld::generate(ctx.world_config());
    LoadedData d = load_inputs(ctx, /*need_labels=*/false);

    std::set<std::string> responders;
    for (const auto& s : d.surveys) {
        if (s.construct == Construct::RetentiveRelevance) responders.insert(s.user_id);
    }
    const std::size_t n = world.users().size();
    std::vector<std::vector<double>> covariates(n);
    std::vector<int> responded(n);
    for (std::size_t u = 0; u < n; ++u) {
        covariates[u] = world.covariate_row(u);
        responded[u] = responders.count(world.users()[u].id) ? 1 : 0;
    }

    const bias::PropensityModel model =
        bias::fit_cbps(covariates, responded, synth::WorldConfig::covariate_names());

    const std::pair<double, double> bounds{ctx.config.at("trim_low").get<double>(),
                                           ctx.config.at("trim_high").get<double>()};
    std::vector<double> propensities(n);
    for (std::size_t u = 0; u < n; ++u) propensities[u] = model.propensity(covariates[u]);
    const std::vector<bias::WeightedSample> samples =
        bias::trim_and_weight(propensities, responded, bounds);

    const json balance = bias::balance_report(covariates, model.covariate_names, responded,
                                              model, bounds,
                                              ctx.config.at("smd_threshold").get<double>());

    const fs::path dir = ctx.stage_dir("debias");
    ModelArtifact artifact;
    artifact.kind = ArtifactKind::Propensity;
    artifact.feature_schema = model.covariate_names;
    artifact.payload = json{{"coefficients", model.coefficients},
                            {"intercept", model.intercept},
                            {"moment_residual", model.moment_residual},
                            {"iterations", model.iterations}};
    save_artifact(artifact, (dir / "propensity.json").string());
    io::write_file((dir / "balance.json").string(), balance.dump(2) + "\n");

    std::string lines;
    for (const auto& s : samples) {
        lines += json{{"user_id", world.users()[s.row].id},
                      {"responded", s.responded},
                      {"propensity", s.propensity},
                      {"weight", s.weight},
                      {"trimmed", s.trimmed}}
                     .dump();
        lines += '\n';
    }
    io::write_file((dir / "weights.jsonl").string(), lines);
    write_manifest(ctx, "debias", d.paths,
                   {(dir / "propensity.json").string(), (dir / "balance.json").string(),
                    (dir / "weights.jsonl").string()});
}

void stage_validity(StageContext& ctx) {
    LoadedData d = load_inputs(ctx);
    const int bins = ctx.config.at("mi_bins").get<int>();

    // per-user rating per construct (one survey per user per construct)
    std::unordered_map<std::string, double> ratings[3];
    for (const auto& s : d.surveys)
        ratings[static_cast<int>(s.construct)][s.user_id] = static_cast<double>(s.rating);
    std::unordered_map<std::string, double> retained;
    for (const auto& l : d.labels) retained[l.user_id] = l.retained ? 1.0 : 0.0;

    const Construct all[3] = {Construct::RetentiveRelevance, Construct::WorthYourTime,
                              Construct::InterestMatching};

    json construct_pairs = json::array();
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            std::vector<double> xa, xb;
            for (const auto& [user, va] : ratings[a]) {
                auto it = ratings[b].find(user);
                if (it == ratings[b].end()) continue;
                xa.push_back(va);
                xb.push_back(it->second);
            }
            const stats::CorrelationResult r = stats::pearson_r(xa, xb);
            construct_pairs.push_back({{"constructs",
                                        {construct_name(all[a]), construct_name(all[b])}},
                                       {"r", r.r},
                                       {"n", r.n},
                                       {"ci", {r.ci_low, r.ci_high}},
                                       {"p_value", r.p_value}});
        }
    }

    json vs_retention = json::array();
    stats::CorrelationResult rr_vs[3];
    for (int a = 0; a < 3; ++a) {
        std::vector<double> xr, yr;
        for (const auto& [user, v] : ratings[a]) {
            auto it = retained.find(user);
            if (it == retained.end()) continue;
            xr.push_back(v);
            yr.push_back(it->second);
        }
        rr_vs[a] = stats::pearson_r(xr, yr);
        const double mi = stats::mutual_information(xr, yr, bins, bins);
        vs_retention.push_back({{"construct", construct_name(all[a])},
                                {"r", rr_vs[a].r},
                                {"n", rr_vs[a].n},
                                {"ci", {rr_vs[a].ci_low, rr_vs[a].ci_high}},
                                {"p_value", rr_vs[a].p_value},
                                {"mutual_information", mi}});
    }

    json z_tests = json::array();
    for (int b = 1; b < 3; ++b) {
        const stats::TestResult t =
            stats::fisher_z_compare(rr_vs[0].r, rr_vs[0].n, rr_vs[b].r, rr_vs[b].n);
        z_tests.push_back({{"comparison",
                            {construct_name(all[0]), construct_name(all[b])}},
                           {"z", t.statistic},
                           {"p_value", t.p_value}});
    }

    const json out{{"construct_correlations", construct_pairs},
                   {"retention_associations", vs_retention},
                   {"fisher_z_comparisons", z_tests}};
    const fs::path dir = ctx.stage_dir("validity");
    fs::create_directories(dir);
    io::write_file((dir / "validity.json").string(), out.dump(2) + "\n");
    write_manifest(ctx, "validity", d.paths, {(dir / "validity.json").string()});
}

Dataset retention_dataset(const StageContext& ctx, const LoadedData& d,
                          Construct construct, const synth::SynthWorld& world) {
    AssemblyContext actx;
    actx.item_topic = &world.item_topic();
    actx.n_topics = world.config().n_topics;
    const auto demo = world.demographics();
    return build_retention_dataset(d.interactions, d.surveys, d.labels, construct, &demo,
                                   actx);
}

void stage_train_retention(StageContext& ctx) {
    const synth::SynthWorld world = synth::SynthWorld::generate(ctx.world_config());
    LoadedData d = load_inputs(ctx);
    const Construct construct = parse_construct(ctx.config.at("construct").get<std::string>());
    const Dataset ds = retention_dataset(ctx, d, construct, world);
    if (ds.n() == 0) throw std::runtime_error("train-retention: empty dataset");

    const gbt::GbtEnsemble model =
        gbt::train_gbt(ds, ctx.gbt_params(ctx.stage_seed("train-retention")));

    const fs::path dir = ctx.stage_dir("train-retention");
    fs::create_directories(dir);
    ModelArtifact artifact;
    artifact.kind = ArtifactKind::Gbt;
    artifact.feature_schema = ds.feature_names;
    artifact.payload = model.to_payload();
    save_artifact(artifact, (dir / "gbt.json").string());
    write_manifest(ctx, "train-retention", d.paths, {(dir / "gbt.json").string()});
}

void stage_evaluate(StageContext& ctx) {
    const synth::SynthWorld world = synth::SynthWorld::generate(ctx.world_config());
    LoadedData d = load_inputs(ctx);

    bool planted_bias = false;
    for (double c : world.config().nonresponse_coefs) planted_bias |= (c != 0.0);
    if (planted_bias && !fs::exists(ctx.stage_dir("debias") / "propensity.json")) {
        ctx.warnings.push_back(
            "evaluate without prior debias: surveys carry a planted nonresponse "
            "mechanism and deltas are computed unweighted");
    }

    const std::set<FeatureGroup> base_groups = {FeatureGroup::H, FeatureGroup::R,
                                                FeatureGroup::U, FeatureGroup::C,
                                                FeatureGroup::D};
    const int k = ctx.config.at("k_folds").get<int>();
    const int boot = ctx.config.at("bootstrap_iterations").get<int>();
    const std::uint64_t sseed = ctx.stage_seed("evaluate");
    const gbt::GbtParams params = ctx.gbt_params(sseed);

    const fs::path dir = ctx.stage_dir("evaluate");
    fs::create_directories(dir);
    std::vector<std::string> outputs;
    for (Construct construct : {Construct::RetentiveRelevance, Construct::WorthYourTime,
                                Construct::InterestMatching}) {
        const Dataset ds = retention_dataset(ctx, d, construct, world);
        for (evaluation::Segment segment :
             {evaluation::Segment::overall, evaluation::Segment::low_signal}) {
            const Dataset seg = evaluation::segment_filter(ds, segment);
            evaluation::DeltaReport report = evaluation::paired_comparison(
                seg, base_groups, construct, params, k, sseed, boot, ctx.threads);
            report.segment = evaluation::segment_name(segment);
            const std::string name = std::string("delta_") + construct_name(construct) +
                                     "_" + report.segment + ".json";
            io::write_file((dir / name).string(), report.to_json().dump(2) + "\n");
            outputs.push_back((dir / name).string());
        }
    }
    write_manifest(ctx, "evaluate", d.paths, outputs);
}

void stage_explain(StageContext& ctx) {
    const fs::path model_path = ctx.stage_dir("train-retention") / "gbt.json";
    if (!fs::exists(model_path))
        throw ValidationError("explain: missing " + model_path.string() +
                              " (run train-retention first)");
    const ModelArtifact artifact = load_artifact(model_path.string());
    const gbt::GbtEnsemble model =
        gbt::GbtEnsemble::from_payload(artifact.payload, artifact.feature_schema);

    const synth::SynthWorld world = synth::SynthWorld::generate(ctx.world_config());
    LoadedData d = load_inputs(ctx);
    const Construct construct = parse_construct(ctx.config.at("construct").get<std::string>());
    const Dataset ds = retention_dataset(ctx, d, construct, world);
    if (ds.n() == 0) throw std::runtime_error("explain: empty dataset");
    if (ds.feature_names != artifact.feature_schema)
        throw std::runtime_error("explain: dataset schema differs from the trained model");

    const std::size_t n_background =
        std::min<std::size_t>(ds.n(), ctx.config.at("explain_background").get<std::size_t>());
    std::vector<double> background(ds.x.begin(),
                                   ds.x.begin() + n_background * ds.p());
    const std::size_t n_rows =
        std::min<std::size_t>(ds.n(), ctx.config.at("explain_rows").get<std::size_t>());
    const shap::ShapMode mode = ds.p() <= 15 ? shap::ShapMode::exact : shap::ShapMode::sampled;

    json rows = json::array();
    for (std::size_t i = 0; i < n_rows; ++i) {
        const shap::ShapReport r = shap::shap_values(
            model, ds.row(i), background, n_background, mode, ctx.stage_seed("explain"),
            ctx.config.at("shap_permutations").get<int>());
        rows.push_back({{"row", i},
                        {"user_id", ds.user_ids[i]},
                        {"phi", r.phi},
                        {"baseline", r.baseline},
                        {"explained", r.explained}});
    }
    const json out{{"mode", mode == shap::ShapMode::exact ? "exact" : "sampled"},
                   {"feature_names", ds.feature_names},
                   {"rows", rows}};
    const fs::path dir = ctx.stage_dir("explain");
    fs::create_directories(dir);
    io::write_file((dir / "shap.json").string(), out.dump(2) + "\n");
    write_manifest(ctx, "explain", d.paths, {(dir / "shap.json").string()});
}

pipeline::ProxyTrainingBundle proxy_bundle(const StageContext& ctx, const LoadedData& d,
                                           const synth::SynthWorld& world) {
    return pipeline::build_proxy_dataset(
        d.interactions, d.surveys, &world.item_topic(), world.config().n_topics,
        world.survey_day(), Construct::RetentiveRelevance,
        ctx.config.at("lambda").get<double>());
}

void stage_train_proxy(StageContext& ctx) {
    const synth::SynthWorld world = synth::SynthWorld::generate(ctx.world_config());
    LoadedData d = load_inputs(ctx, /*need_labels=*/false);
    const pipeline::ProxyTrainingBundle bundle = proxy_bundle(ctx, d, world);
    const Dataset& ds = bundle.dataset;

    // user-hash split into train and calibration
    const double calib_fraction = ctx.config.at("calibration_fraction").get<double>();
    const std::uint64_t sseed = ctx.stage_seed("train-proxy");
    std::vector<std::size_t> train_rows, calib_rows;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double u = static_cast<double>(rng::mix(sseed, fnv1a(ds.user_ids[i])) >> 11) *
                         0x1.0p-53;
        (u < calib_fraction ? calib_rows : train_rows).push_back(i);
    }
    if (train_rows.empty() || calib_rows.empty())
        throw std::runtime_error("train-proxy: degenerate train/calibration split");
    const Dataset train = ds.select_rows(train_rows);
    const Dataset calib = ds.select_rows(calib_rows);

    const proxy::ProxyModel model =
        proxy::train_proxy(train, ctx.config.at("lambda").get<double>());

    std::vector<double> calib_scores(calib.n());
    for (std::size_t i = 0; i < calib.n(); ++i) calib_scores[i] = model.predict(calib.row(i));

    const fs::path dir = ctx.stage_dir("train-proxy");
    fs::create_directories(dir);
    ModelArtifact artifact;
    artifact.kind = ArtifactKind::Proxy;
    artifact.feature_schema = model.feature_schema;
    artifact.payload = model.to_payload();
    save_artifact(artifact, (dir / "proxy.json").string());
    const json calib_json{{"scores", calib_scores},
                          {"labels", calib.labels},
                          {"n_train", train.n()},
                          {"n_calibration", calib.n()}};
    io::write_file((dir / "calibration.json").string(), calib_json.dump(2) + "\n");
    write_manifest(ctx, "train-proxy", d.paths,
                   {(dir / "proxy.json").string(), (dir / "calibration.json").string()});
}

void stage_calibrate(StageContext& ctx) {
    const fs::path calib_path = ctx.stage_dir("train-proxy") / "calibration.json";
    if (!fs::exists(calib_path))
        throw ValidationError("calibrate: missing " + calib_path.string() +
                              " (run train-proxy first)");
    const json calib = json::parse(io::read_file(calib_path.string()));
    const std::vector<double> scores = calib.at("scores").get<std::vector<double>>();
    const std::vector<int> labels = calib.at("labels").get<std::vector<int>>();

    const proxy::ThresholdPair thresholds = proxy::calibrate_thresholds(
        scores, labels, ctx.config.at("pos_precision_target").get<double>(),
        ctx.config.at("neg_precision_target").get<double>());

    const fs::path dir = ctx.stage_dir("calibrate");
    fs::create_directories(dir);
    io::write_file((dir / "thresholds.json").string(), thresholds.to_json().dump(2) + "\n");
    ModelArtifact artifact;
    artifact.kind = ArtifactKind::Policy;
    artifact.payload = json{{"alpha", ctx.config.at("alpha")},
                            {"beta", ctx.config.at("beta")},
                            {"tau_boost", thresholds.tau_boost},
                            {"tau_demote", thresholds.tau_demote}};
    save_artifact(artifact, (dir / "policy.json").string());
    write_manifest(ctx, "calibrate", {calib_path.string()},
                   {(dir / "thresholds.json").string(), (dir / "policy.json").string()});
}

proxy::ProxyModel load_proxy(const StageContext& ctx) {
    const fs::path path = ctx.stage_dir("train-proxy") / "proxy.json";
    if (!fs::exists(path))
        throw ValidationError("missing " + path.string() + " (run train-proxy first)");
    const ModelArtifact a = load_artifact(path.string());
    return proxy::ProxyModel::from_payload(a.payload, a.feature_schema);
}

// alpha: either a number or "auto" = half the interquartile range of the
// base scores in play.
double resolve_alpha(const json& alpha, const std::vector<double>& base_scores) {
    if (alpha.is_number()) return alpha.get<double>();
    std::vector<double> sorted = base_scores;
    std::sort(sorted.begin(), sorted.end());
    const double iqr = stats::quantile_sorted(sorted, 0.75) -
                       stats::quantile_sorted(sorted, 0.25);
    return 0.5 * iqr;
}

ranking::RankingPolicy load_policy(const StageContext& ctx,
                                   const std::vector<double>& base_scores) {
    const fs::path path = ctx.stage_dir("calibrate") / "policy.json";
    if (!fs::exists(path))
        throw ValidationError("missing " + path.string() + " (run calibrate first)");
    const ModelArtifact a = load_artifact(path.string());
    ranking::RankingPolicy policy;
    policy.alpha = resolve_alpha(a.payload.at("alpha"), base_scores);
    policy.beta = a.payload.at("beta").get<double>();
    policy.thresholds.tau_boost = a.payload.at("tau_boost").get<double>();
    policy.thresholds.tau_demote = a.payload.at("tau_demote").get<double>();
    policy.validate();
    return policy;
}

// base score of an item, matching the A/B harness generator shape
double base_score_draw(double popularity, rng::Stream& s) {
    const double z = 1.5 * (popularity - 0.5) + 0.6 * s.normal();
    return 1.0 / (1.0 + std::exp(-z));
}

void stage_rank(StageContext& ctx) {
    const synth::SynthWorld world = synth::SynthWorld::generate(ctx.world_config());
    LoadedData d = load_inputs(ctx, /*need_labels=*/false);
    const pipeline::ProxyTrainingBundle bundle = proxy_bundle(ctx, d, world);
    const proxy::ProxyModel model = load_proxy(ctx);

    const std::uint64_t sseed = ctx.stage_seed("rank");
    const int pool_size = ctx.config.at("candidate_pool").get<int>();
    const std::size_t n_users = std::min<std::size_t>(world.users().size(), 20);

    // first pass: collect base scores so the auto alpha sees the actual scale
    std::vector<std::vector<ranking::Candidate>> pools(n_users);
    std::vector<double> base_scores;
    for (std::size_t u = 0; u < n_users; ++u) {
        rng::Stream s = rng::Stream::keyed(sseed, 0x72616e6b, u);
        std::vector<std::size_t> chosen;
        while (chosen.size() < static_cast<std::size_t>(pool_size) &&
               chosen.size() < world.items().size()) {
            const std::size_t v = world.sample_item(s);
            if (std::find(chosen.begin(), chosen.end(), v) == chosen.end())
                chosen.push_back(v);
        }
        for (std::size_t v : chosen) {
            ranking::Candidate c;
            c.item_id = world.items()[v].id;
            c.score_base = base_score_draw(world.items()[v].popularity, s);
            c.features = bundle.featurizer->features(world.users()[u].id, c.item_id);
            base_scores.push_back(c.score_base);
            pools[u].push_back(std::move(c));
        }
    }
    const ranking::RankingPolicy policy = load_policy(ctx, base_scores);

    std::string lines;
    for (std::size_t u = 0; u < n_users; ++u) {
        const std::vector<ranking::ScoredCandidate> slate =
            ranking::rank_slate(pools[u], model, policy);
        for (std::size_t pos = 0; pos < slate.size(); ++pos) {
            const auto& sc = slate[pos];
            lines += json{{"user_id", world.users()[u].id},
                          {"day", 0},
                          {"position", pos},
                          {"item_id", sc.item_id},
                          {"score_base", sc.score_base},
                          {"p_hat", sc.p_hat},
                          {"boost", sc.boost},
                          {"demote", sc.demote},
                          {"score_final", sc.score_final}}
                         .dump();
            lines += '\n';
        }
    }
    const fs::path dir = ctx.stage_dir("rank");
    fs::create_directories(dir);
    io::write_file((dir / "slates.jsonl").string(), lines);
    write_manifest(ctx, "rank", d.paths, {(dir / "slates.jsonl").string()});
}

void stage_ab_sim(StageContext& ctx) {
    const synth::SynthWorld world = synth::SynthWorld::generate(ctx.world_config());
    LoadedData d = load_inputs(ctx, /*need_labels=*/false);
    const pipeline::ProxyTrainingBundle bundle = proxy_bundle(ctx, d, world);
    const proxy::ProxyModel model = load_proxy(ctx);

    const std::uint64_t sseed = ctx.stage_seed("ab-sim");
    // sample base scores under the harness generator for the auto alpha
    std::vector<double> base_scores;
    rng::Stream s = rng::Stream::keyed(sseed, 0x616c7068);
    for (int k = 0; k < 2000; ++k) {
        const std::size_t v = world.sample_item(s);
        base_scores.push_back(base_score_draw(world.items()[v].popularity, s));
    }
    const ranking::RankingPolicy treatment = load_policy(ctx, base_scores);
    ranking::RankingPolicy control;  // alpha = beta = 0: base order
    control.thresholds = treatment.thresholds;

    ranking::AbOptions options;
    options.slate_size = ctx.config.at("slate_size").get<int>();
    options.candidate_pool = ctx.config.at("candidate_pool").get<int>();

    const ranking::AbReport report =
        ranking::ab_simulate(world, *bundle.featurizer, model, control, treatment,
                             ctx.config.at("ab_days").get<int>(), sseed, options);

    const fs::path dir = ctx.stage_dir("ab-sim");
    fs::create_directories(dir);
    io::write_file((dir / "ab_report.json").string(), report.to_json().dump(2) + "\n");
    write_manifest(ctx, "ab-sim", d.paths, {(dir / "ab_report.json").string()});
}

void stage_report(StageContext& ctx) {
    const fs::path dir = ctx.stage_dir("report");
    // the scan must not pick up a previous report run
    fs::remove_all(dir);
    const report::RenderedReport r =
        report::render_directory(ctx.out_root.string(), dir.string());
    write_manifest(ctx, "report", {ctx.out_root.string()}, {r.json_path, r.text_path});
}

// ---------------------------------------------------------------------------

json parse_override_value(const std::string& raw) {
    try {
        return json::parse(raw);
    } catch (const json::exception&) {
        return json(raw);  // bare string
    }
}

void apply_override(json& config, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw ValidationError("--set expects KEY=VALUE, got '" + spec + "'");
    const std::string path = spec.substr(0, eq);
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ValidationError("--set: empty key segment in '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = parse_override_value(spec.substr(eq + 1));
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

int run(int argc, char** argv) {
    CLI::App app{"retentia pipeline driver"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed_flag;
    int threads = 1;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--seed", seed_flag, "global seed (overrides config)");
    app.add_option("--out", out_dir, "output root (default $RETENTIA_OUT or ./out)");
    app.add_option("--threads", threads, "worker cap for parallel stages");
    app.add_option("--set", overrides, "dotted-path config override KEY=VALUE")
        ->take_all();

    const std::vector<std::pair<std::string, void (*)(StageContext&)>> stages = {
        {"generate", stage_generate},   {"debias", stage_debias},
        {"validity", stage_validity},   {"train-retention", stage_train_retention},
        {"evaluate", stage_evaluate},   {"explain", stage_explain},
        {"train-proxy", stage_train_proxy}, {"calibrate", stage_calibrate},
        {"rank", stage_rank},           {"ab-sim", stage_ab_sim},
        {"report", stage_report}};
    for (const auto& [name, fn] : stages) {
        (void)fn;
        app.add_subcommand(name);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    StageContext ctx;
    const std::string stage = app.get_subcommands().front()->get_name();
    try {
        ctx.config = default_config();
        if (!config_path.empty()) {
            json user;
            try {
                user = json::parse(io::read_file(config_path));
            } catch (const json::exception& e) {
                throw ValidationError(std::string("config parse error: ") + e.what());
            }
            ctx.config.merge_patch(user);
        }
        for (const auto& o : overrides) apply_override(ctx.config, o);
        if (seed_flag.has_value()) ctx.config["seed"] = *seed_flag;
        ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
        ctx.threads = std::max(1, threads);

        if (out_dir.empty()) {
            const char* env = std::getenv("RETENTIA_OUT");
            out_dir = env != nullptr ? env : "out";
        }
        ctx.out_root = out_dir;
        // validate externally supplied inputs up front
        for (const auto& [key, value] : ctx.config.at("paths").items()) {
            if (!fs::exists(value.get<std::string>()))
                throw ValidationError("paths." + key + " does not exist: " +
                                      value.get<std::string>());
        }
        ctx.world_config();  // throws on invalid world parameters
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    }

    const fs::path stage_dir = ctx.stage_dir(stage);
    try {
        fs::remove_all(stage_dir);
        fs::create_directories(stage_dir);
        for (const auto& [name, fn] : stages) {
            if (name == stage) fn(ctx);
        }
    } catch (const ValidationError& e) {
        fs::remove_all(stage_dir);
        std::cerr << "validation error in stage " << stage << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        fs::remove_all(stage_dir);
        std::cerr << "stage " << stage << " failed: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
