#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "overeval/digest.hpp"
#include "overeval/errors.hpp"

namespace overeval {

enum class DatasetKind { WellDefined, MissingPremise };

inline std::string to_string(DatasetKind k) {
    return k == DatasetKind::WellDefined ? "well_defined" : "missing_premise";
}

inline DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "well_defined") return DatasetKind::WellDefined;
    if (s == "missing_premise") return DatasetKind::MissingPremise;
    throw ConfigError("unknown dataset kind: " + s);
}

/// One evaluation question. Well-defined records carry a reference answer;
/// missing-premise records do not need one.
struct DatasetRecord {
    std::string id;
    std::string dataset_name;
    std::string question;
    std::optional<std::string> reference_answer;
    DatasetKind kind = DatasetKind::WellDefined;
    // Unknown keys from the source line, preserved verbatim.
    nlohmann::json extras = nlohmann::json::object();
};

struct DatasetManifest {
    std::string name;
    DatasetKind kind = DatasetKind::WellDefined;
    std::size_t record_count = 0;
    std::string source_path;
    std::string content_digest;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<DatasetRecord> records;
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Accepts JSON strings as-is and stringifies bare numbers; answers in the
// wild are frequently numeric literals.
inline std::optional<std::string> json_to_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_float()) {
        std::ostringstream os;
        os << v.get<double>();
        return os.str();
    }
    if (v.is_null()) return std::nullopt;
    return v.dump();
}

}  // namespace detail

/// Invariant check for a single record. Violations are returned as data;
/// an empty vector means the record is valid.
inline std::vector<std::string> validate_record(const DatasetRecord& record) {
    std::vector<std::string> violations;
    if (record.id.empty()) violations.push_back("empty id");
    if (detail::trim_copy(record.question).empty())
        violations.push_back("empty question");
    if (record.kind == DatasetKind::WellDefined &&
        (!record.reference_answer || detail::trim_copy(*record.reference_answer).empty()))
        violations.push_back("missing reference_answer");
    return violations;
}

/// Parses one JSONL record line. Keys `id`, `question` are required,
/// `answer` optional; anything else lands in `extras`.
inline DatasetRecord parse_record_line(const std::string& line, const std::string& dataset_name,
                                       DatasetKind kind, long line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad record line: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("record line is not a JSON object", line_no);
    if (!j.contains("id")) throw ParseError("record line missing 'id'", line_no);
    if (!j.contains("question")) throw ParseError("record line missing 'question'", line_no);

    DatasetRecord rec;
    rec.dataset_name = dataset_name;
    rec.kind = kind;
    auto id = detail::json_to_text(j.at("id"));
    auto question = detail::json_to_text(j.at("question"));
    if (!id || !question) throw ParseError("id/question must be scalar", line_no);
    rec.id = *id;
    rec.question = *question;
    if (j.contains("answer")) rec.reference_answer = detail::json_to_text(j.at("answer"));
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "id" || it.key() == "question" || it.key() == "answer") continue;
        rec.extras[it.key()] = it.value();
    }
    return rec;
}

/// Loads a line-delimited record file in file order and validates every record.
inline Dataset load_dataset(const std::filesystem::path& path, const std::string& name,
                            DatasetKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();

    Dataset ds;
    ds.manifest.name = name;
    ds.manifest.kind = kind;
    ds.manifest.source_path = path.string();
    ds.manifest.content_digest = sha256_hex(bytes);

    std::istringstream lines(bytes);
    std::string line;
    long line_no = 0;
    std::set<std::string> seen_ids;
    std::vector<std::string> bad_ids;
    while (std::getline(lines, line)) {
        ++line_no;
        if (detail::trim_copy(line).empty()) continue;
        DatasetRecord rec = parse_record_line(line, name, kind, line_no);
        if (!seen_ids.insert(rec.id).second)
            throw ValidationError("duplicate record id '" + rec.id + "' in dataset " + name);
        if (!validate_record(rec).empty()) bad_ids.push_back(rec.id);
        ds.records.push_back(std::move(rec));
    }
    if (!bad_ids.empty()) {
        std::string msg = "invalid records in dataset " + name + ":";
        for (const auto& id : bad_ids) msg += " " + id;
        throw ValidationError(msg);
    }
    ds.manifest.record_count = ds.records.size();
    return ds;
}

/// Inverse of parse_record_line; load_dataset of serialized records is the identity.
inline std::string serialize_record(const DatasetRecord& record) {
    nlohmann::json j = record.extras;
    j["id"] = record.id;
    j["question"] = record.question;
    if (record.reference_answer) j["answer"] = *record.reference_answer;
    return j.dump();
}

inline void write_dataset(const std::filesystem::path& path,
                          const std::vector<DatasetRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset file: " + path.string());
    for (const auto& r : records) out << serialize_record(r) << "\n";
}

struct RegistryEntry {
    std::string name;
    std::filesystem::path path;  // resolved relative to the registry file
    DatasetKind kind = DatasetKind::WellDefined;
};

/// Registry file: one JSONL entry per dataset, {"name", "path", "kind"}.
inline std::map<std::string, RegistryEntry> load_registry(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open registry file: " + path.string());
    std::map<std::string, RegistryEntry> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim_copy(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad registry line: ") + e.what(), line_no);
        }
        RegistryEntry e;
        try {
            e.name = j.at("name").get<std::string>();
            e.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
            std::filesystem::path p = j.at("path").get<std::string>();
            e.path = p.is_absolute() ? p : path.parent_path() / p;
        } catch (const nlohmann::json::exception& e2) {
            throw ParseError(std::string("bad registry entry: ") + e2.what(), line_no);
        }
        if (!out.emplace(e.name, e).second)
            throw ValidationError("duplicate dataset name in registry: " + e.name);
    }
    return out;
}

}  // namespace overeval
