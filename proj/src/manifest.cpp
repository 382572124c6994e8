#include "zsmad/manifest.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "io_util.hpp"
#include "zsmad/errors.hpp"

namespace zsmad {

namespace {

constexpr std::array<std::string_view, 6> kGeneratorNames = {"lma-i", "lma-ii", "mipgan-2", "mordiff", "pipe", "-"};
constexpr std::array<std::string_view, 3> kMediumNames = {"digital", "ps-1", "ps-2"};
constexpr std::array<std::string_view, 5> kRequired = {"id", "path", "label", "generator", "medium"};

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (;;) {
        const size_t comma = line.find(',', start);
        out.push_back(detail::trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

FaceSample make_sample(std::string_view where, std::string id, std::string path, std::string_view label,
                       std::string_view generator, std::string_view medium, std::optional<std::string> subject) {
    FaceSample s;
    if (id.empty()) throw ParseError(fmt::format("{}: empty id", where));
    if (path.empty()) throw ParseError(fmt::format("{}: empty path", where));
    s.id = std::move(id);
    s.path = std::move(path);
    const auto l = parse_label(label);
    if (!l) throw ParseError(fmt::format("{}: unknown label '{}'", where, label));
    const auto g = parse_generator(generator);
    if (!g) throw ParseError(fmt::format("{}: unknown generator '{}'", where, generator));
    const auto m = parse_medium(medium);
    if (!m) throw ParseError(fmt::format("{}: unknown medium '{}'", where, medium));
    s.label = *l;
    s.generator = *g;
    s.medium = *m;
    if (subject && !subject->empty()) s.subject_id = std::move(subject);
    return s;
}

Manifest parse_csv(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    Manifest m;
    std::map<std::string, size_t, std::less<>> column;
    size_t width = 0;
    size_t line_no = 0;
    bool have_header = false;
    while (!text.empty()) {
        const size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = split_commas(line);
        if (!have_header) {
            for (size_t i = 0; i < fields.size(); ++i) column.emplace(detail::ascii_lower(fields[i]), i);
            for (auto key : kRequired) {
                if (!column.contains(key)) throw SchemaError(fmt::format("manifest header lacks column '{}'", key));
            }
            width = fields.size();
            have_header = true;
            continue;
        }
        const std::string where = fmt::format("line {}", line_no);
        if (fields.size() != width) {
            throw ParseError(fmt::format("{}: expected {} fields, found {}", where, width, fields.size()));
        }
        auto field = [&](std::string_view key) { return fields[column.find(key)->second]; };
        std::optional<std::string> subject;
        if (auto it = column.find("subject_id"); it != column.end()) subject = std::string(fields[it->second]);
        m.samples.push_back(make_sample(where, std::string(field("id")), std::string(field("path")), field("label"),
                                        field("generator"), field("medium"), std::move(subject)));
    }
    if (!have_header) throw SchemaError("manifest has no header row");
    return m;
}

Manifest parse_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("manifest JSON: ") + e.what());
    }
    if (!doc.is_array()) throw SchemaError("manifest JSON must be an array of objects");
    Manifest m;
    for (size_t row = 0; row < doc.size(); ++row) {
        const auto& obj = doc[row];
        const std::string where = fmt::format("row {}", row + 1);
        if (!obj.is_object()) throw ParseError(where + ": not an object");
        for (auto key : kRequired) {
            if (!obj.contains(key)) throw SchemaError(fmt::format("{}: missing key '{}'", where, key));
        }
        auto str = [&](const char* key) -> std::string {
            const auto& v = obj.at(key);
            if (v.is_null() && std::string_view(key) == "generator") return "-";
            if (!v.is_string()) throw ParseError(fmt::format("{}: '{}' must be a string", where, key));
            return v.get<std::string>();
        };
        std::optional<std::string> subject;
        if (auto it = obj.find("subject_id"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) throw ParseError(where + ": 'subject_id' must be a string");
            subject = it->get<std::string>();
        }
        m.samples.push_back(make_sample(where, str("id"), str("path"), str("label"), str("generator"),
                                        str("medium"), std::move(subject)));
    }
    return m;
}

template <size_t N, class E>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
    const std::string lower = detail::ascii_lower(detail::trim(s));
    for (size_t i = 0; i < N; ++i) {
        if (names[i] == lower) return static_cast<E>(i);
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Label v) { return v == Label::BonaFide ? "bonafide" : "morph"; }
std::string_view to_string(Generator v) { return kGeneratorNames[static_cast<size_t>(v)]; }
std::string_view to_string(Medium v) { return kMediumNames[static_cast<size_t>(v)]; }

std::optional<Label> parse_label(std::string_view s) {
    const std::string lower = detail::ascii_lower(detail::trim(s));
    if (lower == "bonafide" || lower == "bona-fide" || lower == "bona fide") return Label::BonaFide;
    if (lower == "morph") return Label::Morph;
    return std::nullopt;
}

std::optional<Generator> parse_generator(std::string_view s) {
    if (detail::ascii_lower(detail::trim(s)) == "none") return Generator::None;
    return lookup<6, Generator>(kGeneratorNames, s);
}

std::optional<Medium> parse_medium(std::string_view s) { return lookup<3, Medium>(kMediumNames, s); }

std::size_t Manifest::count(Label label) const {
    return static_cast<size_t>(std::count_if(samples.begin(), samples.end(), [&](const auto& s) { return s.label == label; }));
}

std::filesystem::path Manifest::resolve(const FaceSample& s) const {
    return s.path.is_absolute() || base_dir.empty() ? s.path : base_dir / s.path;
}

void validate(const Manifest& m) {
    std::unordered_set<std::string> ids;
    for (size_t i = 0; i < m.samples.size(); ++i) {
        const FaceSample& s = m.samples[i];
        if (s.label == Label::BonaFide && s.generator != Generator::None) {
            throw ConstraintError(fmt::format("sample '{}' (row {}): bona fide sample carries generator '{}'", s.id, i + 1,
                                              to_string(s.generator)));
        }
        if (s.label == Label::Morph && s.generator == Generator::None) {
            throw ConstraintError(fmt::format("sample '{}' (row {}): morph sample has no generator", s.id, i + 1));
        }
        if (!ids.insert(s.id).second) throw ConstraintError(fmt::format("duplicate sample id '{}' (row {})", s.id, i + 1));
    }
}

ManifestFormat manifest_format_for(const std::filesystem::path& path) {
    const std::string ext = detail::ascii_lower(path.extension().string());
    if (ext == ".csv") return ManifestFormat::Csv;
    if (ext == ".json") return ManifestFormat::Json;
    throw SchemaError("cannot infer manifest format from '" + path.filename().string() + "' (use .csv or .json)");
}

Manifest load_manifest(const std::filesystem::path& path, ManifestFormat format) {
    const std::string text = detail::read_file(path);
    Manifest m = format == ManifestFormat::Csv ? parse_csv(text) : parse_json(text);
    validate(m);
    m.source_tag = path.filename().string();
    m.base_dir = path.parent_path();
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) { return load_manifest(path, manifest_format_for(path)); }

std::string manifest_to_csv(const Manifest& m) {
    std::string out = "id,path,label,generator,medium,subject_id\n";
    for (const auto& s : m.samples) {
        const std::string path = s.path.generic_string();
        for (std::string_view field : {std::string_view(s.id), std::string_view(path),
                                       std::string_view(s.subject_id.value_or(""))}) {
            if (field.find_first_of(",\n\r") != std::string_view::npos) {
                throw ConstraintError(fmt::format("sample '{}': field '{}' contains a comma or newline", s.id, field));
            }
        }
        out += fmt::format("{},{},{},{},{},{}\n", s.id, path, to_string(s.label), to_string(s.generator),
                           to_string(s.medium), s.subject_id.value_or(""));
    }
    return out;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path, ManifestFormat format) {
    validate(m);
    if (format == ManifestFormat::Csv) {
        detail::write_file(path, manifest_to_csv(m));
        return;
    }
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& s : m.samples) {
        nlohmann::ordered_json row;
        row["id"] = s.id;
        row["path"] = s.path.generic_string();
        row["label"] = to_string(s.label);
        row["generator"] = to_string(s.generator);
        row["medium"] = to_string(s.medium);
        row["subject_id"] = s.subject_id ? nlohmann::ordered_json(*s.subject_id) : nlohmann::ordered_json(nullptr);
        doc.push_back(std::move(row));
    }
    detail::write_file(path, doc.dump(2) + "\n");
}

Manifest slice(const Manifest& m, std::optional<Generator> generator, std::optional<Medium> medium) {
    Manifest out;
    out.source_tag = m.source_tag;
    out.base_dir = m.base_dir;
    for (const auto& s : m.samples) {
        if (medium && s.medium != *medium) continue;
        if (s.label == Label::Morph && generator && s.generator != *generator) continue;
        out.samples.push_back(s);
    }
    return out;
}

}  // namespace zsmad
