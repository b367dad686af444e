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

#ifndef MMX_LOG_H_
#define MMX_LOG_H_

#include <sstream>
#include <string>

namespace mmx::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

// Initial level comes from $MMX_LOG (debug|info|warn|error|off), default warn.
Level level();
void set_level(Level level);
bool parse_level(const std::string& name, Level* out);

void write(Level level, const std::string& message);

}  // namespace mmx::log

#define MMX_LOG(lvl, expr)                                         \
  do {                                                             \
    if (::mmx::log::Level::lvl >= ::mmx::log::level()) {           \
      std::ostringstream mmx_log_os_;                              \
      mmx_log_os_ << expr;                                         \
      ::mmx::log::write(::mmx::log::Level::lvl, mmx_log_os_.str()); \
    }                                                              \
  } while (0)

#endif  // MMX_LOG_H_
