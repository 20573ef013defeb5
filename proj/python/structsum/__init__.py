# Copyright 2026 The structsum Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Python front-end of the structsum C++ core."""

import json

from . import _core
from ._core import (
    ConfigError,
    FormatError,
    MiniLangSyntaxError,
    MismatchError,
    NumericsError,
    StructsumError,
    beam_search,
    normalize_text,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "MiniLangSyntaxError",
    "MismatchError",
    "NumericsError",
    "StructsumError",
    "beam_search",
    "bleu4",
    "encode",
    "floyd_apsp",
    "leaf_tokens",
    "meteor",
    "normalize_text",
    "parse",
    "rouge_l",
    "run_cli",
    "sbt",
    "to_source",
]


def _tokens(x):
    return normalize_text(x) if isinstance(x, str) else list(x)


def _refs(references):
    if isinstance(references, str):
        return [_tokens(references)]
    return [_tokens(r) for r in references]


def parse(source):
    """Parses MiniLang source into an interchange AST (a dict)."""
    return json.loads(_core.parse_minilang(source))


def to_source(ast):
    return _core.to_minilang(json.dumps(ast))


def sbt(ast):
    return _core.sbt_sequence(json.dumps(ast))


def leaf_tokens(ast):
    """Returns (tokens, token_to_node)."""
    return _core.leaf_tokens(json.dumps(ast))


def floyd_apsp(ast):
    return _core.floyd_apsp(json.dumps(ast))


def encode(ast, l=8, weights=(1 / 3, 1 / 3, 1 / 3)):
    """Structural bundle {m, m_bar, buckets, a_mv, l} for the leaf tokens of ast."""
    alpha, beta, gamma = weights
    return json.loads(_core.encode_structure(json.dumps(ast), l, alpha, beta, gamma))


def bleu4(candidate, references):
    return _core.bleu4(_tokens(candidate), _refs(references))


def rouge_l(candidate, references):
    return _core.rouge_l(_tokens(candidate), _refs(references))


def meteor(candidate, references):
    return _core.meteor(_tokens(candidate), _refs(references))


def run_cli(*args):
    """Runs a CLI subcommand in-process; returns (exit_code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
