#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace zsmad {

std::string sha256_hex(std::string_view bytes);

// Order-sensitive digest over labelled parts. Each part contributes its label,
// length and bytes, so adjacent parts cannot blur together.
class DigestBuilder {
public:
    DigestBuilder& add(std::string_view label, std::string_view bytes);
    // Hashes file contents, never the path itself. Throws IoError.
    DigestBuilder& add_file(std::string_view label, const std::filesystem::path& path);
    std::string hex() const;

private:
    std::string stream_;
};

}  // namespace zsmad
