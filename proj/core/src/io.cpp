#include "retentia/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace retentia {

Construct parse_construct(const std::string& name) {
    if (name == "retentive_relevance") return Construct::RetentiveRelevance;
    if (name == "worth_your_time") return Construct::WorthYourTime;
    if (name == "interest_matching") return Construct::InterestMatching;
    throw std::invalid_argument("unknown construct '" + name + "'");
}

}  // namespace retentia

namespace retentia::io {

Format format_from_string(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "jsonl") return Format::jsonl;
    throw std::invalid_argument("unknown format '" + s + "' (expected csv or jsonl)");
}

Format format_from_path(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return Format::csv;
    return Format::jsonl;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

[[noreturn]] void row_error(const std::string& path, std::size_t line,
                            const std::string& what) {
    throw std::runtime_error(path + ": malformed row at line " + std::to_string(line) +
                             ": " + what);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// Iterates rows of either format, presenting each row as a json object.
template <typename Fn>
void for_each_row(const std::string& path, Format format, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    std::size_t line_no = 0;
    if (format == Format::jsonl) {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::exception& e) {
                row_error(path, line_no, e.what());
            }
            fn(obj, line_no);
        }
    } else {
        if (!std::getline(in, line)) return;  // empty file -> no rows
        ++line_no;
        const std::vector<std::string> header = split_csv_line(line);
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const std::vector<std::string> fields = split_csv_line(line);
            if (fields.size() != header.size())
                row_error(path, line_no, "expected " + std::to_string(header.size()) +
                                             " fields, got " + std::to_string(fields.size()));
            json obj;
            for (std::size_t i = 0; i < header.size(); ++i) {
                const std::string& f = fields[i];
                // numeric columns parse as numbers, ids stay strings
                if (header[i] == "user_id" || header[i] == "item_id" ||
                    header[i] == "construct") {
                    obj[header[i]] = f;
                } else {
                    try {
                        std::size_t pos = 0;
                        const double v = std::stod(f, &pos);
                        if (pos != f.size()) throw std::invalid_argument(f);
                        obj[header[i]] = v;
                    } catch (const std::exception&) {
                        row_error(path, line_no, "field '" + header[i] + "' is not numeric");
                    }
                }
            }
            fn(obj, line_no);
        }
    }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& path, std::size_t line) {
    if (!obj.contains(key)) row_error(path, line, std::string("missing field '") + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        row_error(path, line, std::string("bad type for field '") + key + "'");
    }
}

}  // namespace

std::vector<InteractionRecord> load_interactions(const std::string& path, Format format) {
    std::vector<InteractionRecord> out;
    for_each_row(path, format, [&](const json& obj, std::size_t line) {
        InteractionRecord r;
        r.user_id = get_field<std::string>(obj, "user_id", path, line);
        r.item_id = get_field<std::string>(obj, "item_id", path, line);
        r.day = get_field<std::int64_t>(obj, "day", path, line);
        r.like = get_field<std::int64_t>(obj, "like", path, line);
        r.comment = get_field<std::int64_t>(obj, "comment", path, line);
        r.share = get_field<std::int64_t>(obj, "share", path, line);
        r.skip = get_field<std::int64_t>(obj, "skip", path, line);
        r.watch_time_seconds = get_field<double>(obj, "watch_time_seconds", path, line);
        if (r.like < 0 || r.comment < 0 || r.share < 0 || r.skip < 0)
            throw std::runtime_error(path + ": negative count at line " + std::to_string(line));
        if (r.watch_time_seconds < 0)
            throw std::runtime_error(path + ": negative duration at line " + std::to_string(line));
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<SurveyResponse> load_surveys(const std::string& path, Format format) {
    std::vector<SurveyResponse> out;
    for_each_row(path, format, [&](const json& obj, std::size_t line) {
        SurveyResponse s;
        s.user_id = get_field<std::string>(obj, "user_id", path, line);
        s.item_id = get_field<std::string>(obj, "item_id", path, line);
        try {
            s.construct = parse_construct(get_field<std::string>(obj, "construct", path, line));
        } catch (const std::invalid_argument& e) {
            row_error(path, line, e.what());
        }
        const double rating = get_field<double>(obj, "rating", path, line);
        s.rating = static_cast<int>(rating);
        if (s.rating != rating || s.rating < 1 || s.rating > 5)
            throw std::runtime_error(path + ": rating out of [1,5] at line " +
                                     std::to_string(line));
        s.day = get_field<std::int64_t>(obj, "day", path, line);
        out.push_back(std::move(s));
    });
    return out;
}

std::vector<RetentionLabel> load_labels(const std::string& path, Format format) {
    std::vector<RetentionLabel> out;
    for_each_row(path, format, [&](const json& obj, std::size_t line) {
        RetentionLabel l;
        l.user_id = get_field<std::string>(obj, "user_id", path, line);
        l.day = get_field<std::int64_t>(obj, "day", path, line);
        if (format == Format::jsonl) {
            l.retained = get_field<bool>(obj, "retained", path, line);
        } else {
            l.retained = get_field<double>(obj, "retained", path, line) != 0.0;
        }
        out.push_back(std::move(l));
    });
    return out;
}

void write_interactions_jsonl(const std::string& path,
                              const std::vector<InteractionRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (const auto& r : records) {
        json obj{{"user_id", r.user_id}, {"item_id", r.item_id},   {"day", r.day},
                 {"like", r.like},       {"comment", r.comment},   {"share", r.share},
                 {"skip", r.skip},       {"watch_time_seconds", r.watch_time_seconds}};
        out << obj.dump() << '\n';
    }
}

void write_surveys_jsonl(const std::string& path,
                         const std::vector<SurveyResponse>& surveys) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (const auto& s : surveys) {
        json obj{{"user_id", s.user_id},
                 {"item_id", s.item_id},
                 {"construct", construct_name(s.construct)},
                 {"rating", s.rating},
                 {"day", s.day}};
        out << obj.dump() << '\n';
    }
}

void write_labels_jsonl(const std::string& path,
                        const std::vector<RetentionLabel>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (const auto& l : labels) {
        json obj{{"user_id", l.user_id}, {"day", l.day}, {"retained", l.retained}};
        out << obj.dump() << '\n';
    }
}

}  // namespace retentia::io
