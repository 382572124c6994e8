#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace zsmad {

enum class Label { BonaFide, Morph };
enum class Generator { LmaI, LmaII, Mipgan2, MorDiff, Pipe, None };
enum class Medium { Digital, PS1, PS2 };

inline constexpr std::array<Generator, 5> kMorphGenerators = {
    Generator::LmaI, Generator::LmaII, Generator::Mipgan2, Generator::MorDiff, Generator::Pipe};
inline constexpr std::array<Medium, 3> kMediums = {Medium::Digital, Medium::PS1, Medium::PS2};

// Canonical file spellings: "bonafide", "lma-ii", "ps-1", "-" for no generator.
std::string_view to_string(Label v);
std::string_view to_string(Generator v);
std::string_view to_string(Medium v);

// Case-insensitive; std::nullopt on an unknown spelling.
std::optional<Label> parse_label(std::string_view s);
std::optional<Generator> parse_generator(std::string_view s);
std::optional<Medium> parse_medium(std::string_view s);

struct FaceSample {
    std::string id;
    std::filesystem::path path;  // as written in the manifest
    Label label = Label::BonaFide;
    Generator generator = Generator::None;
    Medium medium = Medium::Digital;
    std::optional<std::string> subject_id;

    bool operator==(const FaceSample&) const = default;
};

struct Manifest {
    std::vector<FaceSample> samples;
    std::string source_tag;
    // Directory relative sample paths resolve against. Not part of equality.
    std::filesystem::path base_dir;

    std::size_t count(Label label) const;
    std::filesystem::path resolve(const FaceSample& s) const;
    bool operator==(const Manifest& o) const { return samples == o.samples && source_tag == o.source_tag; }
};

enum class ManifestFormat { Csv, Json };

// Format from the file extension (.csv or .json).
ManifestFormat manifest_format_for(const std::filesystem::path& path);

// Throws IoError, ParseError (with line/row number), SchemaError, ConstraintError.
Manifest load_manifest(const std::filesystem::path& path, ManifestFormat format);
Manifest load_manifest(const std::filesystem::path& path);

// Checks every FaceSample invariant and id uniqueness; throws ConstraintError.
void validate(const Manifest& m);

void write_manifest(const Manifest& m, const std::filesystem::path& path, ManifestFormat format);
std::string manifest_to_csv(const Manifest& m);

// Morphs must match both filters; bona fide samples only the medium filter.
Manifest slice(const Manifest& m, std::optional<Generator> generator, std::optional<Medium> medium);

}  // namespace zsmad
