// Copyright 2026 The paravat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PARAVAT_TEXT_HPP_
#define PARAVAT_TEXT_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace paravat::text {

// Malformed sequences decode to U+FFFD.
std::vector<char32_t> DecodeUtf8(std::string_view bytes);
void AppendUtf8(char32_t cp, std::string& out);
std::string EncodeUtf8(const std::vector<char32_t>& cps);

bool IsSpace(char32_t cp);
bool IsPunct(char32_t cp);
// Punctuation that binds to the token after it when detokenizing.
bool IsOpeningPunct(char32_t cp);

// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek and
// Cyrillic. Other scripts pass through unchanged.
std::string ToLower(std::string_view s);

std::string_view Trim(std::string_view s);

}  // namespace paravat::text

#endif  // PARAVAT_TEXT_HPP_
