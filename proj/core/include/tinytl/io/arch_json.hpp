// Copyright 2026 The tinytl Authors.
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


#ifndef TINYTL_IO_ARCH_JSON_HPP_
#define TINYTL_IO_ARCH_JSON_HPP_

#include <filesystem>
#include <string>

#include "tinytl/arch.hpp"
#include "tinytl/elastic.hpp"
#include "tinytl/evolution.hpp"

namespace tinytl::io {

// Architecture files. Errors carry the source name plus either a
// line:column (malformed JSON) or a field path such as
// "stages[2].blocks[0].expand".
ArchitectureSpec parse_arch(const std::string& text, const std::string& source = "<string>");
ArchitectureSpec load_arch(const std::filesystem::path& path);
std::string arch_to_json(const ArchitectureSpec& arch);
void save_arch(const ArchitectureSpec& arch, const std::filesystem::path& path);

// Elastic search spaces. An optional "search" object fills SearchConfig.
struct SpaceFile {
  ElasticSpace space;
  SearchConfig search;
};

SpaceFile parse_space(const std::string& text, const std::string& source = "<string>");
SpaceFile load_space(const std::filesystem::path& path);
std::string space_to_json(const SpaceFile& file);
void save_space(const SpaceFile& file, const std::filesystem::path& path);

// Whole-file helpers shared by the readers. Throw IoError.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tinytl::io

#endif  // TINYTL_IO_ARCH_JSON_HPP_
