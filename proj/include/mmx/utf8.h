// Copyright 2026 The MMX Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MMX_UTF8_H_
#define MMX_UTF8_H_

#include <string>
#include <string_view>
#include <vector>

namespace mmx::utf8 {

// Splits into code points, each kept as its UTF-8 byte sequence. Invalid
// lead bytes are passed through as single-byte units.
std::vector<std::string> split_chars(std::string_view s);

// Decodes to code points; invalid bytes map to U+FFFD.
std::vector<char32_t> decode(std::string_view s);

std::string encode(char32_t cp);

}  // namespace mmx::utf8

#endif  // MMX_UTF8_H_
