#pragma once

#include <string>
#include <string_view>

namespace rscope::utf8 {

// Strict decoder: rejects overlongs, surrogates and truncated sequences.
// Throws ParseError carrying the byte offset of the bad sequence.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

std::size_t length(std::string_view bytes);

}  // namespace rscope::utf8
