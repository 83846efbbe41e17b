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


#include "tinytl/io/arch_json.hpp"

#include <fstream>
#include <sstream>

#include "json_fields.hpp"
#include "tinytl/errors.hpp"

namespace tinytl::io {

using detail::Json;
using detail::Node;

namespace {

StemSpec read_stem(const Node& n) {
  n.expect_object({"in_ch", "out_ch", "kernel", "stride"});
  StemSpec s;
  s.in_ch = n.int_or("in_ch", s.in_ch);
  s.out_ch = n.at("out_ch").as_int();
  s.kernel = n.at("kernel").as_int();
  s.stride = n.at("stride").as_int();
  return s;
}

Json write_stem(const StemSpec& s) {
  return Json{{"in_ch", s.in_ch}, {"out_ch", s.out_ch}, {"kernel", s.kernel}, {"stride", s.stride}};
}

NormSpec read_norm(const Node& root) {
  NormSpec norm;
  if (!root.has("norm")) return norm;
  const Node n = root.at("norm");
  n.expect_object({"channels_per_group", "eps"});
  norm.channels_per_group = n.int_or("channels_per_group", norm.channels_per_group);
  norm.eps = n.double_or("eps", norm.eps);
  if (norm.channels_per_group < 1) n.at("channels_per_group").fail("must be >= 1");
  if (!(norm.eps > 0.0)) n.at("eps").fail("must be > 0");
  return norm;
}

Json write_norm(const NormSpec& n) {
  return Json{{"channels_per_group", n.channels_per_group}, {"eps", n.eps}};
}

MBBlockSpec read_block(const Node& n) {
  n.expect_object({"in_ch", "out_ch", "expand", "kernel", "stride", "lite"});
  MBBlockSpec b;
  b.in_ch = n.at("in_ch").as_int();
  b.out_ch = n.at("out_ch").as_int();
  b.expand = n.at("expand").as_int();
  b.kernel = n.at("kernel").as_int();
  b.stride = n.at("stride").as_int();
  if (n.has("lite")) {
    const Node lite = n.at("lite");
    lite.expect_object({"groups", "kernel"});
    b.lite.groups = lite.int_or("groups", b.lite.groups);
    b.lite.kernel = lite.int_or("kernel", b.lite.kernel);
  }
  return b;
}

Json write_block(const MBBlockSpec& b) {
  return Json{{"in_ch", b.in_ch},
              {"out_ch", b.out_ch},
              {"expand", b.expand},
              {"kernel", b.kernel},
              {"stride", b.stride},
              {"lite", Json{{"groups", b.lite.groups}, {"kernel", b.lite.kernel}}}};
}

SearchConfig read_search(const Node& n) {
  n.expect_object({"population", "generations", "mutation", "parent_fraction", "seed"});
  SearchConfig c;
  c.population = n.int_or("population", c.population);
  c.generations = n.int_or("generations", c.generations);
  c.mutation = n.double_or("mutation", c.mutation);
  c.parent_fraction = n.double_or("parent_fraction", c.parent_fraction);
  if (n.has("seed")) c.seed = n.at("seed").as_u64();
  try {
    c.validate();
  } catch (const SpecError& e) {
    n.fail(e.what());
  }
  return c;
}

std::vector<int> read_options(const Node& n, const char* key, const std::vector<int>& fallback) {
  if (!n.has(key)) return fallback;
  const Node list = n.at(key);
  std::vector<int> v = list.as_int_list();
  if (v.empty()) list.fail("option list must not be empty");
  return v;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ArchitectureSpec parse_arch(const std::string& text, const std::string& source) {
  const Json j = detail::parse_text(text, source);
  const Node root(j, source, "");
  root.expect_object({"version", "stem", "stages", "head", "resolution", "norm"});
  ArchitectureSpec arch;
  arch.version = root.int_or("version", 1);
  if (arch.version != 1) root.at("version").fail("unsupported version");
  arch.stem = read_stem(root.at("stem"));
  const Node stages = root.at("stages");
  for (std::size_t s = 0; s < stages.array_size(); ++s) {
    const Node st = stages.at(s);
    st.expect_object({"depth", "blocks"});
    const Node blocks = st.at("blocks");
    StageSpec stage;
    for (std::size_t b = 0; b < blocks.array_size(); ++b) {
      stage.blocks.push_back(read_block(blocks.at(b)));
    }
    if (st.has("depth") && st.at("depth").as_int() != stage.depth()) {
      st.at("depth").fail("depth " + std::to_string(st.at("depth").as_int()) + " but " +
                          std::to_string(stage.depth()) + " blocks listed");
    }
    arch.stages.push_back(std::move(stage));
  }
  const Node head = root.at("head");
  head.expect_object({"n_classes"});
  arch.n_classes = head.at("n_classes").as_int();
  arch.resolution = root.int_or("resolution", arch.resolution);
  arch.norm = read_norm(root);
  try {
    arch.validate();
  } catch (const SpecError& e) {
    throw SpecError(source + ": " + e.what());
  }
  return arch;
}

ArchitectureSpec load_arch(const std::filesystem::path& path) {
  return parse_arch(read_text(path), path.string());
}

std::string arch_to_json(const ArchitectureSpec& arch) {
  Json stages = Json::array();
  for (const StageSpec& s : arch.stages) {
    Json blocks = Json::array();
    for (const MBBlockSpec& b : s.blocks) blocks.push_back(write_block(b));
    stages.push_back(Json{{"depth", s.depth()}, {"blocks", std::move(blocks)}});
  }
  const Json j{{"version", arch.version},
               {"stem", write_stem(arch.stem)},
               {"stages", std::move(stages)},
               {"head", Json{{"n_classes", arch.n_classes}}},
               {"resolution", arch.resolution},
               {"norm", write_norm(arch.norm)}};
  return j.dump(2) + "\n";
}

void save_arch(const ArchitectureSpec& arch, const std::filesystem::path& path) {
  write_text(path, arch_to_json(arch));
}

SpaceFile parse_space(const std::string& text, const std::string& source) {
  const Json j = detail::parse_text(text, source);
  const Node root(j, source, "");
  root.expect_object({"version", "stem", "widths", "strides", "n_classes", "resolutions", "norm",
                      "stages", "search"});
  SpaceFile file;
  ElasticSpace& sp = file.space;
  if (root.int_or("version", 1) != 1) root.at("version").fail("unsupported version");
  sp.stem = read_stem(root.at("stem"));
  sp.widths = root.at("widths").as_int_list();
  sp.strides = root.at("strides").as_int_list();
  sp.n_classes = root.at("n_classes").as_int();
  sp.resolutions = read_options(root, "resolutions", sp.resolutions);
  sp.norm = read_norm(root);
  if (root.has("stages")) {
    const Node stages = root.at("stages");
    sp.stages.clear();
    for (std::size_t s = 0; s < stages.array_size(); ++s) {
      const Node st = stages.at(s);
      st.expect_object({"depth", "kernel", "expand", "lite_groups", "lite_kernel"});
      StageOptions o;
      o.depth = read_options(st, "depth", o.depth);
      o.kernel = read_options(st, "kernel", o.kernel);
      o.expand = read_options(st, "expand", o.expand);
      o.lite_groups = read_options(st, "lite_groups", o.lite_groups);
      o.lite_kernel = read_options(st, "lite_kernel", o.lite_kernel);
      sp.stages.push_back(std::move(o));
    }
  }
  if (root.has("search")) file.search = read_search(root.at("search"));
  try {
    sp.validate();
  } catch (const SpecError& e) {
    throw SpecError(source + ": " + e.what());
  }
  return file;
}

SpaceFile load_space(const std::filesystem::path& path) {
  return parse_space(read_text(path), path.string());
}

std::string space_to_json(const SpaceFile& file) {
  const ElasticSpace& sp = file.space;
  Json stages = Json::array();
  for (const StageOptions& o : sp.stages) {
    stages.push_back(Json{{"depth", o.depth},
                          {"kernel", o.kernel},
                          {"expand", o.expand},
                          {"lite_groups", o.lite_groups},
                          {"lite_kernel", o.lite_kernel}});
  }
  const SearchConfig& sc = file.search;
  const Json j{{"version", 1},
               {"stem", write_stem(sp.stem)},
               {"widths", sp.widths},
               {"strides", sp.strides},
               {"n_classes", sp.n_classes},
               {"resolutions", sp.resolutions},
               {"norm", write_norm(sp.norm)},
               {"stages", std::move(stages)},
               {"search", Json{{"population", sc.population},
                               {"generations", sc.generations},
                               {"mutation", sc.mutation},
                               {"parent_fraction", sc.parent_fraction},
                               {"seed", sc.seed}}}};
  return j.dump(2) + "\n";
}

void save_space(const SpaceFile& file, const std::filesystem::path& path) {
  write_text(path, space_to_json(file));
}

}  // namespace tinytl::io
