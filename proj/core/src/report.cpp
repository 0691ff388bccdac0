#include "retentia/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "retentia/io.hpp"

using nlohmann::json;

namespace retentia::report {

namespace {

std::string fmt(double v, int precision = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

void append_row(std::string& out, const std::vector<std::string>& cells,
                const std::vector<std::size_t>& widths) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out += cells[i];
        if (i + 1 < cells.size())
            out += std::string(widths[i] > cells[i].size() ? widths[i] - cells[i].size() + 2 : 2,
                               ' ');
    }
    out += '\n';
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); ++i)
            widths[i] = std::max(widths[i], row[i].size());
    }
    std::string out;
    bool first = true;
    for (const auto& row : rows) {
        append_row(out, row, widths);
        if (first) {
            std::size_t total = 0;
            for (std::size_t w : widths) total += w + 2;
            out += std::string(total > 2 ? total - 2 : total, '-');
            out += '\n';
            first = false;
        }
    }
    return out;
}

}  // namespace

std::string significance_marker(double p_value) {
    if (p_value < 0.001) return "***";
    if (p_value < 0.01) return "**";
    if (p_value < 0.05) return "*";
    return "";
}

std::string render_model_comparison(const std::vector<evaluation::DeltaReport>& reports) {
    if (reports.empty())
        throw std::invalid_argument("render_model_comparison: no reports");
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"model", "segment", "delta_acc", "acc 95% CI", "delta_auc",
                    "auc 95% CI", "sig", "note"});
    for (const auto& r : reports) {
        const std::string model = r.construct == "none" ? "baseline" : "+" + r.construct;
        rows.push_back({model,
                        r.segment,
                        fmt(r.delta_accuracy, 4),
                        "[" + fmt(r.accuracy_ci_low, 4) + ", " + fmt(r.accuracy_ci_high, 4) + "]",
                        fmt(r.delta_auc, 4),
                        "[" + fmt(r.auc_ci_low, 4) + ", " + fmt(r.auc_ci_high, 4) + "]",
                        significance_marker(r.auc_test.p_value),
                        r.note});
    }
    std::string out = "Model comparison (k-fold paired deltas; * p<0.05, ** p<0.01, *** p<0.001)\n";
    out += render_table(rows);
    return out;
}

std::string render_ab_table(const ranking::AbReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"category", "metric", "control", "treatment", "delta",
                    "95% CI", "rel delta %", "sig"});
    auto category = [](const std::string& metric) {
        if (metric == "sessions_per_user") return "engagement";
        if (metric == "like_rate") return "engagement";
        return "quality";
    };
    for (const auto& m : report.metrics) {
        rows.push_back({category(m.metric),
                        m.metric,
                        fmt(m.control_mean, 4),
                        fmt(m.treatment_mean, 4),
                        fmt(m.delta, 4),
                        "[" + fmt(m.ci_low, 4) + ", " + fmt(m.ci_high, 4) + "]",
                        fmt(100.0 * m.relative_delta, 2),
                        significance_marker(m.test.p_value)});
    }
    std::string out = "A/B comparison (" + std::to_string(report.n_control) + " control / " +
                      std::to_string(report.n_treatment) + " treatment users, " +
                      std::to_string(report.days) + " days)\n";
    out += render_table(rows);
    return out;
}

RenderedReport render_directory(const std::string& stage_dir, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(stage_dir))
        throw std::invalid_argument("render_directory: not a directory: " + stage_dir);

    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(stage_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());

    std::vector<evaluation::DeltaReport> deltas;
    std::vector<ranking::AbReport> ab_reports;
    std::vector<json> ab_raw;
    for (const auto& path : files) {
        json j;
        try {
            j = json::parse(io::read_file(path));
        } catch (const json::exception&) {
            continue;  // not a stage output
        }
        if (!j.is_object() || !j.contains("kind")) continue;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "delta_report") {
            deltas.push_back(evaluation::DeltaReport::from_json(j));
        } else if (kind == "ab_report") {
            ranking::AbReport r;
            r.n_control = j.at("n_control").get<std::size_t>();
            r.n_treatment = j.at("n_treatment").get<std::size_t>();
            r.days = j.at("days").get<int>();
            for (const auto& mj : j.at("metrics")) {
                ranking::MetricComparison m;
                m.metric = mj.at("metric").get<std::string>();
                m.control_mean = mj.at("control_mean").get<double>();
                m.treatment_mean = mj.at("treatment_mean").get<double>();
                m.delta = mj.at("delta").get<double>();
                m.relative_delta = mj.at("relative_delta").get<double>();
                m.test.statistic = mj.at("t_statistic").get<double>();
                m.test.p_value = mj.at("p_value").get<double>();
                m.cohens_d = mj.at("cohens_d").get<double>();
                m.ci_low = mj.at("ci_low").get<double>();
                m.ci_high = mj.at("ci_high").get<double>();
                m.control_daily = mj.at("control_daily").get<std::vector<double>>();
                m.treatment_daily = mj.at("treatment_daily").get<std::vector<double>>();
                r.metrics.push_back(std::move(m));
            }
            ab_reports.push_back(std::move(r));
            ab_raw.push_back(j);
        }
    }
    if (deltas.empty() && ab_reports.empty())
        throw std::runtime_error("nothing to render in " + stage_dir);

    std::string text;
    json content = json::object();
    if (!deltas.empty()) {
        text += render_model_comparison(deltas);
        json arr = json::array();
        for (const auto& d : deltas) arr.push_back(d.to_json());
        content["model_comparison"] = arr;
    }
    for (std::size_t i = 0; i < ab_reports.size(); ++i) {
        if (!text.empty()) text += "\n";
        text += render_ab_table(ab_reports[i]);
    }
    if (!ab_raw.empty()) content["ab_reports"] = ab_raw;

    fs::create_directories(out_dir);
    RenderedReport out;
    out.json_path = (fs::path(out_dir) / "report.json").string();
    out.text_path = (fs::path(out_dir) / "report.txt").string();
    out.content = content;
    io::write_file(out.json_path, content.dump(2) + "\n");
    io::write_file(out.text_path, text);
    return out;
}

}  // namespace retentia::report
