// Copyright 2026 The softbridge Authors
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

#ifndef SOFTBRIDGE_CLI_HPP_
#define SOFTBRIDGE_CLI_HPP_

#include <iosfwd>

namespace softbridge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;

// Parses argv and runs one subcommand: verify, bias, toy2d, train or
// infer-bench. Returns 0 on success, 1 when a verification fails and 2 on a
// usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Raises the allocator's mmap threshold so the per-step temporaries of the
// batched networks are recycled instead of mapped and unmapped every call.
void configure_process();

}  // namespace softbridge::cli

#endif  // SOFTBRIDGE_CLI_HPP_
