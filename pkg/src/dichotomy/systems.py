"""System ingestion: config parsing, validated specs, and pointwise evaluation.

A system is ``x' = A(t) x + f(t, x)`` with ``A`` an n-by-n matrix of time
expressions (or sampled grids) and ``f`` an optional list of polynomial terms
``coeff(t) * x^l`` placed in one component each.

Config format (UTF-8 text, ``#`` comments)::

    [system]
    name = "diag-1-2"
    dimension = 2
    version = 1                # optional grammar version, default 1

    [matrix]
    a_1_1 = "-1"               # 1-based indices; omitted entries default to 0
    a_2_2 = "2"

    [nonlinearity]             # optional
    term = { l = [2, 0], j = 2, coeff = "1" }

    [grid a_2_1]               # optional; overrides the matrix entry
    t0 = 0.0
    dt = 0.5
    values = [0.0, 1.0, 0.0]
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError
from .expressions import GRAMMAR_VERSION, TimeExpression


@dataclass(frozen=True)
class NonlinearTerm:
    """One polynomial term coeff(t) * x^index placed in `component` (0-based)."""

    index: tuple
    component: int
    coeff: TimeExpression


@dataclass
class SystemSpec:
    """Validated definition of A(t) and the optional nonlinearity f(t, x)."""

    name: str
    dimension: int
    entries: list  # n x n nested list of TimeExpression
    nonlinearity: list = field(default_factory=list)

    def __post_init__(self):
        n = self.dimension
        if n < 1:
            raise ConfigError(f"dimension must be positive, got {n}")
        if len(self.entries) != n or any(len(row) != n for row in self.entries):
            raise ConfigError(f"entries must form a {n}x{n} array")
        for term in self.nonlinearity:
            if len(term.index) != n:
                raise ConfigError(
                    f"multi-index {term.index} has length {len(term.index)}, expected {n}"
                )
            if any(k < 0 for k in term.index):
                raise ConfigError(f"multi-index {term.index} has negative entries")
            if sum(term.index) < 2:
                raise ConfigError(
                    f"nonlinear term {term.index} has degree {sum(term.index)} < 2"
                )
            if not 0 <= term.component < n:
                raise ConfigError(f"component {term.component + 1} outside 1..{n}")

    @property
    def has_nonlinearity(self):
        return bool(self.nonlinearity)

    def matrix(self, t):
        return eval_matrix(self, t)

    def to_config(self):
        """Print the spec back as config text (round-trips through parse_system)."""
        lines = ["[system]", f'name = "{self.name}"', f"dimension = {self.dimension}",
                 f"version = {GRAMMAR_VERSION}", "", "[matrix]"]
        grids = []
        for i in range(self.dimension):
            for j in range(self.dimension):
                e = self.entries[i][j]
                if e.is_grid:
                    grids.append((i, j, e))
                else:
                    lines.append(f'a_{i + 1}_{j + 1} = "{e.to_text()}"')
        if self.nonlinearity:
            lines.append("")
            lines.append("[nonlinearity]")
            for term in self.nonlinearity:
                l_txt = ", ".join(str(k) for k in term.index)
                lines.append(
                    f'term = {{ l = [{l_txt}], j = {term.component + 1}, '
                    f'coeff = "{term.coeff.to_text()}" }}'
                )
        for i, j, e in grids:
            lines.append("")
            lines.append(f"[grid a_{i + 1}_{j + 1}]")
            lines.append(f"t0 = {e._t0!r}")
            lines.append(f"dt = {e._dt!r}")
            lines.append("values = [" + ", ".join(repr(v) for v in e._values) + "]")
        return "\n".join(lines) + "\n"


def eval_matrix(spec, t):
    """Evaluate A(t) entrywise; raises EvaluationError on non-finite entries."""
    n = spec.dimension
    out = np.empty((n, n))
    for i in range(n):
        row = spec.entries[i]
        for j in range(n):
            try:
                out[i, j] = row[j](t)
            except EvaluationError as exc:
                raise EvaluationError(f"entry a_{i + 1}_{j + 1}: {exc}") from exc
    return out


def eval_nonlinearity(spec, t, x):
    """Evaluate f(t, x): the sum of declared terms coeff(t) * x^l per component."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(spec.dimension)
    for term in spec.nonlinearity:
        mono = 1.0
        for xi, li in zip(x, term.index):
            if li:
                mono *= xi ** li
        out[term.component] += term.coeff(t) * mono
    return out


# ---------------------------------------------------------------------------
# Config parsing

_SECTION_RE = re.compile(r"^\[([a-zA-Z_][\w ]*)\]$")
_KEY_RE = re.compile(r"^([a-zA-Z_]\w*)\s*=\s*(.+)$")
_ENTRY_RE = re.compile(r"^a_(\d+)_(\d+)$")


def _strip_comment(line):
    out = []
    in_string = False
    for ch in line:
        if ch == '"':
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
    return "".join(out)


def _parse_value(text, lineno):
    """Parse a scalar / string / list / inline-table config value."""
    text = text.strip()
    if not text:
        raise ConfigError("empty value", line=lineno, column=1)
    if text.startswith('"'):
        if not text.endswith('"') or len(text) < 2:
            raise ConfigError("unterminated string", line=lineno, column=1)
        return text[1:-1]
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError("unterminated list", line=lineno, column=1)
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part, lineno) for part in inner.split(",")]
    if text.startswith("{"):
        if not text.endswith("}"):
            raise ConfigError("unterminated inline table", line=lineno, column=1)
        return _parse_inline_table(text[1:-1], lineno)
    try:
        if re.fullmatch(r"[+-]?\d+", text):
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse value {text!r}", line=lineno, column=1)


def _parse_inline_table(text, lineno):
    """Split `k = v, k = v` respecting nested brackets and strings."""
    table = {}
    depth = 0
    in_string = False
    parts = []
    current = []
    for ch in text:
        if ch == '"':
            in_string = not in_string
        elif not in_string:
            if ch in "[{":
                depth += 1
            elif ch in "]}":
                depth -= 1
            elif ch == "," and depth == 0:
                parts.append("".join(current))
                current = []
                continue
        current.append(ch)
    if current:
        parts.append("".join(current))
    for part in parts:
        m = _KEY_RE.match(part.strip())
        if not m:
            raise ConfigError(f"bad inline-table item {part.strip()!r}", line=lineno, column=1)
        table[m.group(1)] = _parse_value(m.group(2), lineno)
    return table


def parse_system(text):
    """Parse config text into a validated SystemSpec."""
    section = None
    system = {}
    matrix = {}
    terms = []
    grids = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            header = m.group(1).strip()
            if header == "system" or header == "matrix" or header == "nonlinearity":
                section = (header, None)
            elif header.startswith("grid "):
                entry = header[5:].strip()
                em = _ENTRY_RE.match(entry)
                if not em:
                    raise ConfigError(
                        f"grid block must name an entry a_<i>_<j>, got {entry!r}",
                        line=lineno, column=1,
                    )
                key = (int(em.group(1)), int(em.group(2)))
                grids[key] = {"_line": lineno}
                section = ("grid", key)
            else:
                raise ConfigError(f"unknown section [{header}]", line=lineno, column=1)
            continue
        m = _KEY_RE.match(line)
        if not m:
            col = raw.index(line[0]) + 1 if line else 1
            raise ConfigError(f"expected `key = value`, got {line!r}", line=lineno, column=col)
        key, value_text = m.group(1), m.group(2)
        if section is None:
            raise ConfigError("key outside any section", line=lineno, column=1)
        value = _parse_value(value_text, lineno)
        kind, target = section
        if kind == "system":
            system[key] = value
        elif kind == "matrix":
            em = _ENTRY_RE.match(key)
            if not em:
                raise ConfigError(f"matrix keys look like a_<i>_<j>, got {key!r}",
                                  line=lineno, column=1)
            matrix[(int(em.group(1)), int(em.group(2)))] = (value, lineno)
        elif kind == "nonlinearity":
            if key != "term":
                raise ConfigError(f"only `term = {{...}}` allowed here, got {key!r}",
                                  line=lineno, column=1)
            terms.append((value, lineno))
        else:  # grid block
            grids[target][key] = value

    if "dimension" not in system:
        raise ConfigError("[system] must declare `dimension`")
    n = system["dimension"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"dimension must be a positive integer, got {n!r}")
    version = system.get("version", GRAMMAR_VERSION)
    if version != GRAMMAR_VERSION:
        raise ConfigError(f"unsupported grammar version {version}")
    name = system.get("name", "unnamed")

    entries = [[TimeExpression.parse("0") for _ in range(n)] for _ in range(n)]
    for (i, j), (value, lineno) in matrix.items():
        if not (1 <= i <= n and 1 <= j <= n):
            raise ConfigError(f"entry a_{i}_{j} outside {n}x{n} matrix", line=lineno, column=1)
        if not isinstance(value, str):
            raise ConfigError(f"entry a_{i}_{j} must be a quoted expression", line=lineno, column=1)
        try:
            entries[i - 1][j - 1] = TimeExpression.parse(value)
        except ConfigError as exc:
            raise ConfigError(f"entry a_{i}_{j}: {exc}", line=lineno, column=exc.column) from exc

    for (i, j), block in grids.items():
        lineno = block.pop("_line")
        if not (1 <= i <= n and 1 <= j <= n):
            raise ConfigError(f"grid a_{i}_{j} outside {n}x{n} matrix", line=lineno, column=1)
        missing = {"t0", "dt", "values"} - set(block)
        if missing:
            raise ConfigError(f"grid a_{i}_{j} missing {sorted(missing)}", line=lineno, column=1)
        entries[i - 1][j - 1] = TimeExpression.from_grid(
            block["t0"], block["dt"], block["values"]
        )

    nonlinearity = []
    for value, lineno in terms:
        if not isinstance(value, dict):
            raise ConfigError("term must be an inline table { l = [...], j = ..., coeff = \"...\" }",
                              line=lineno, column=1)
        missing = {"l", "j", "coeff"} - set(value)
        if missing:
            raise ConfigError(f"term missing {sorted(missing)}", line=lineno, column=1)
        l = value["l"]
        if not isinstance(l, list) or not all(isinstance(k, int) for k in l):
            raise ConfigError("term field `l` must be a list of integers", line=lineno, column=1)
        if len(l) != n:
            raise ConfigError(f"term multi-index has length {len(l)}, expected {n}",
                              line=lineno, column=1)
        if sum(l) < 2:
            raise ConfigError(f"term degree |l| = {sum(l)} < 2", line=lineno, column=1)
        j = value["j"]
        if not isinstance(j, int) or not (1 <= j <= n):
            raise ConfigError(f"term component j = {j!r} outside 1..{n}", line=lineno, column=1)
        try:
            coeff = TimeExpression.parse(value["coeff"])
        except ConfigError as exc:
            raise ConfigError(f"term coeff: {exc}", line=lineno, column=exc.column) from exc
        nonlinearity.append(NonlinearTerm(tuple(l), j - 1, coeff))

    return SystemSpec(name=name, dimension=n, entries=entries, nonlinearity=nonlinearity)


def constant_system(matrix, name="constant"):
    """Build a SystemSpec for a constant coefficient matrix (test/CLI helper)."""
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    entries = [[TimeExpression.parse(repr(float(a[i, j]))) for j in range(n)] for i in range(n)]
    return SystemSpec(name=name, dimension=n, entries=entries)
