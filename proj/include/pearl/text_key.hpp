#pragma once

#include <string>

namespace pearl::emb {

// Canonical lookup key for caption text: SHA-256 hex digest of the
// NFC-normalized UTF-8 bytes. Unicode-equivalent spellings share a key.
std::string text_key(const std::string& text);

// NFC normalization alone, exposed for tests.
std::string normalize_nfc(const std::string& text);

}  // namespace pearl::emb
