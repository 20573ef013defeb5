// Copyright 2026 The structsum Authors. All Rights Reserved.
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

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace structsum {

// Process exit codes; stable for scripting.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInput = 2,
  kExitNumeric = 3,
  kExitMismatch = 4,
};

// Maps the active exception onto an exit code; call inside a catch block.
int exit_code_for_current_exception();

struct CodeChunk {
  std::size_t first_line = 1;  // 1-based line of the chunk in its file
  std::string source;
};

// Splits MiniLang text on lines consisting of "---". Chunks holding only
// whitespace are dropped.
std::vector<CodeChunk> split_code_file(const std::string& text);

// Reads MiniLang examples from either a JSON Lines file ({"code": ...} per
// line, ".jsonl" extension) or a "---"-separated text file.
std::vector<CodeChunk> read_code_examples(const std::string& path);

// Entry point of the structsum executable.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace structsum
