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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "structsum/ast.hpp"
#include "structsum/beam.hpp"
#include "structsum/cli.hpp"
#include "structsum/errors.hpp"
#include "structsum/metrics.hpp"
#include "structsum/minilang.hpp"
#include "structsum/struct_encode.hpp"

namespace py = pybind11;
using namespace structsum;

namespace {

// ASTs cross the boundary as interchange JSON text; the Python side wraps
// them with json.loads / json.dumps.
Ast ast_from_text(const std::string& text) { return ast_from_json(nlohmann::json::parse(text)); }

EvalPair make_pair(const std::vector<std::string>& candidate, const std::vector<std::vector<std::string>>& refs) {
  if (refs.empty()) throw ValueError("at least one reference is required");
  return {candidate, refs};
}

template <typename T>
std::vector<std::vector<T>> rows(const SquareMatrix<T>& m) {
  std::vector<std::vector<T>> out(m.n(), std::vector<T>(m.n()));
  for (std::size_t i = 0; i < m.n(); ++i)
    for (std::size_t j = 0; j < m.n(); ++j) out[i][j] = m(i, j);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Structure-aware code summarization core.";

  auto base = py::register_exception<Error>(m, "StructsumError", PyExc_RuntimeError);
  py::register_exception<SyntaxError>(m, "MiniLangSyntaxError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<MismatchError>(m, "MismatchError", base.ptr());
  py::register_exception<NumericsError>(m, "NumericsError", base.ptr());

  m.def("parse_minilang", [](const std::string& src) { return ast_to_json(parse_minilang(src)).dump(); },
        py::arg("source"));
  m.def("to_minilang", [](const std::string& ast) { return to_minilang(ast_from_text(ast)); }, py::arg("ast_json"));
  m.def("sbt_sequence", [](const std::string& ast) { return sbt_sequence(ast_from_text(ast)); }, py::arg("ast_json"));
  m.def(
      "leaf_tokens",
      [](const std::string& ast) {
        const LeafTokens lt = leaf_tokens(ast_from_text(ast));
        return py::make_tuple(lt.tokens, lt.alignment.token_to_node);
      },
      py::arg("ast_json"));
  m.def("floyd_apsp", [](const std::string& ast) { return rows(floyd_apsp(ast_from_text(ast))); },
        py::arg("ast_json"));
  m.def(
      "encode_structure",
      [](const std::string& ast, int l, double alpha, double beta, double gamma) {
        const Ast tree = ast_from_text(ast);
        EncodeOptions opts;
        opts.clip = l;
        opts.weights = {alpha, beta, gamma};
        return bundle_to_json(encode_structure(tree, leaf_tokens(tree).alignment, opts)).dump();
      },
      py::arg("ast_json"), py::arg("l") = 8, py::arg("alpha") = 1.0 / 3.0, py::arg("beta") = 1.0 / 3.0,
      py::arg("gamma") = 1.0 / 3.0);

  m.def("normalize_text", &normalize_text, py::arg("text"));
  m.def("bleu4", [](const std::vector<std::string>& c, const std::vector<std::vector<std::string>>& r) {
    return bleu4(make_pair(c, r));
  }, py::arg("candidate"), py::arg("references"));
  m.def("rouge_l", [](const std::vector<std::string>& c, const std::vector<std::vector<std::string>>& r) {
    return rouge_l(make_pair(c, r));
  }, py::arg("candidate"), py::arg("references"));
  m.def("meteor", [](const std::vector<std::string>& c, const std::vector<std::vector<std::string>>& r) {
    return meteor(make_pair(c, r));
  }, py::arg("candidate"), py::arg("references"));

  m.def(
      "beam_search",
      [](const std::function<std::vector<double>(std::vector<int>)>& step, std::size_t beam_size,
         std::size_t max_len, double length_penalty, int bos, int eos) {
        BeamOptions opt{beam_size, max_len, length_penalty, bos, eos};
        const Hypothesis h =
            beam_search([&](std::span<const int> p) { return step(std::vector<int>(p.begin(), p.end())); }, opt);
        return py::make_tuple(h.tokens, h.log_prob, h.score);
      },
      py::arg("step"), py::arg("beam_size") = 5, py::arg("max_len") = 50, py::arg("length_penalty") = 1.0,
      py::arg("bos") = 1, py::arg("eos") = 2);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "structsum");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        std::ostringstream out, err;
        int rc;
        {
          py::gil_scoped_release release;
          rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(rc, out.str(), err.str());
      },
      py::arg("args"));
}
