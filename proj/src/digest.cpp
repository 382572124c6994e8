#include "zsmad/digest.hpp"

#include <array>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "io_util.hpp"

namespace zsmad {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 computation failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

DigestBuilder& DigestBuilder::add(std::string_view label, std::string_view bytes) {
    stream_ += fmt::format("{}:{}:{}\n", label, bytes.size(), sha256_hex(bytes));
    return *this;
}

DigestBuilder& DigestBuilder::add_file(std::string_view label, const std::filesystem::path& path) {
    return add(label, detail::read_file(path));
}

std::string DigestBuilder::hex() const { return sha256_hex(stream_); }

}  // namespace zsmad
