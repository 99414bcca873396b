"""Covariate matrices for Poisson log-linear models on regular designs."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy

from .design import (
    Design,
    DesignError,
    EffectWord,
    aliasing_group,
    alias_set,
    format_word,
    interaction_components,
    normalize_word,
    parse_word,
)


class EstimabilityError(DesignError):
    """Two model terms (or a term and the grand mean) are confounded."""


@dataclass(frozen=True)
class Model:
    design: Design
    terms: tuple[EffectWord, ...]

    def describe(self) -> list[str]:
        return [format_word(t, self.design.spec.names) for t in self.terms]


def make_model(design: Design, terms: Iterable[EffectWord]) -> Model:
    """Normalize and deduplicate ``terms`` keeping first-seen order."""
    out: list[EffectWord] = []
    for t in terms:
        w = normalize_word(t)
        if w not in out:
            out.append(w)
    return Model(design, tuple(out))


def main_effects(design: Design) -> list[EffectWord]:
    p, s = design.p, design.s
    return [EffectWord(tuple(int(i == j) for j in range(p)), s) for i in range(p)]


def interaction(design: Design, factors: Sequence[int]) -> list[EffectWord]:
    return interaction_components(factors, design.p, design.s)


def parse_model_spec(text: str, design: Design) -> Model:
    """Parse ``main: A,B,C,D; interactions: AxB, AxC, AB^2``.

    ``main: all`` (or an omitted ``main`` clause) includes every main effect.
    Interactions are full (``AxB`` gives every component) or single components
    written as effect words.
    """
    names = design.spec.names
    clauses: dict[str, str] = {}
    for part in re.split(r"[;\n]", text):
        part = part.split("#", 1)[0].strip()
        if not part:
            continue
        if ":" not in part:
            raise DesignError(f"bad model clause {part!r}; expected 'main: ...' or 'interactions: ...'")
        key, val = (x.strip() for x in part.split(":", 1))
        key = key.lower()
        if key not in ("main", "interactions"):
            raise DesignError(f"unknown model clause {key!r}")
        clauses[key] = val
    terms: list[EffectWord] = []
    main = clauses.get("main", "all")
    if main.lower() == "all":
        terms += main_effects(design)
    else:
        for tok in _tokens(main):
            if tok not in names:
                raise DesignError(f"unknown factor {tok!r} in main effects")
            terms.append(main_effects(design)[names.index(tok)])
    for tok in _tokens(clauses.get("interactions", "")):
        if "x" in tok or "*" in tok:
            letters = re.split(r"[x*]", tok)
            if any(x not in names for x in letters) or len(set(letters)) != len(letters) or len(letters) < 2:
                raise DesignError(f"bad interaction {tok!r}")
            terms += interaction(design, [names.index(x) for x in letters])
        else:
            terms.append(parse_word(tok, design.p, design.s, names))
    return make_model(design, terms)


def _tokens(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip() and t.strip().lower() != "none"]


@dataclass(frozen=True)
class CovariateMatrix:
    """``k x nu`` 0/1 matrix; column 0 is the intercept."""

    entries: np.ndarray
    columns: tuple[str, ...]

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def nu(self) -> int:
        return self.entries.shape[1]

    @property
    def T(self) -> np.ndarray:
        """``X'`` as an integer array (the matrix whose kernel holds the moves)."""
        return self.entries.T.copy()


def check_estimable(model: Model) -> None:
    """Raise :class:`EstimabilityError` naming the first confounded pair."""
    spec = model.design.spec
    names = spec.names
    group = aliasing_group(spec)
    seen: dict[EffectWord, EffectWord] = {}
    for t in model.terms:
        try:
            cls = alias_set(t, spec, group)
        except DesignError:
            raise EstimabilityError(f"{format_word(t, names)} is confounded with the grand mean I") from None
        for v in cls:
            if v in seen:
                other = seen[v]
                shown = v if v != other else t
                raise EstimabilityError(
                    f"{format_word(other, names)} confounded with {format_word(t, names)}"
                    + ("" if shown == t else f" (alias {format_word(v, names)})")
                )
        for v in cls:
            seen[v] = t


def build_covariate_matrix(model: Model, levels: Sequence[int] | None = None) -> CovariateMatrix:
    """Intercept plus one indicator column per contrast level of each term.

    By default the levels ``0, ..., s-2`` are encoded; ``levels`` picks another
    set of ``s-1`` levels (the row lattice is the same either way).
    """
    check_estimable(model)
    design = model.design
    s = design.s
    levels = tuple(range(s - 1)) if levels is None else tuple(levels)
    if len(levels) != s - 1 or len(set(levels)) != s - 1 or not all(0 <= l < s for l in levels):
        raise DesignError(f"need {s - 1} distinct contrast levels in 0..{s - 1}")
    cols = [np.ones(design.k, dtype=np.int64)]
    names = ["I"]
    for t in model.terms:
        values = np.array([t.contrast(r) for r in design.runs])
        for lv in levels:
            cols.append((values == lv).astype(np.int64))
            names.append(f"{format_word(t, design.spec.names)}={lv}")
    X = np.column_stack(cols)
    if np.linalg.matrix_rank(X) != X.shape[1]:
        raise EstimabilityError("covariate matrix is rank deficient")
    return CovariateMatrix(X, tuple(names))


def sufficient_statistic(X: CovariateMatrix | np.ndarray, y: Sequence[int]) -> np.ndarray:
    """``X'y``."""
    M = X.entries if isinstance(X, CovariateMatrix) else np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or y.shape[0] != M.shape[0]:
        raise ValueError(f"count vector has length {y.shape[0] if y.ndim else 0}, design has {M.shape[0]} runs")
    return M.T @ y


def in_row_span(A: np.ndarray, v: Sequence[int]) -> bool:
    """Exact test of whether ``v`` is a rational combination of the rows of ``A``."""
    M = sympy.Matrix(np.asarray(A, dtype=object).tolist())
    aug = M.col_join(sympy.Matrix([[Fraction(x) for x in v]]))
    return M.rank() == aug.rank()


def marginal_cells(design: Design, subset: Iterable[int]) -> dict[tuple[int, ...], list[int]]:
    """Runs grouped by their levels on the factors in ``subset``."""
    subset = sorted(subset)
    cells: dict[tuple[int, ...], list[int]] = {}
    for i, run in enumerate(design.runs):
        cells.setdefault(tuple(run[f] for f in subset), []).append(i)
    return cells


def marginal_determined(model: Model, subset: Iterable[int]) -> bool:
    """Whether the ``subset``-marginal table is a function of ``X'y``.

    Only meaningful for full factorial designs.
    """
    subset = sorted(set(subset))
    if not subset:
        raise ValueError("factor subset must be nonempty")
    if model.design.spec.q:
        raise DesignError("marginal determination is only defined here for full factorial designs")
    X = build_covariate_matrix(model).entries
    M = sympy.Matrix(X.T.tolist())
    r = M.rank()
    for cell in marginal_cells(model.design, subset).values():
        ind = [0] * model.design.k
        for i in cell:
            ind[i] = 1
        if M.col_join(sympy.Matrix([ind])).rank() != r:
            return False
    return True


def hierarchical_terms(design: Design, generators: Iterable[Sequence[int]]) -> list[EffectWord]:
    """All components of every interaction contained in the given factor sets."""
    subsets: set[tuple[int, ...]] = set()
    for g in generators:
        g = sorted(g)
        for r in range(1, len(g) + 1):
            subsets.update(itertools.combinations(g, r))
    terms: list[EffectWord] = []
    for sub in sorted(subsets, key=lambda t: (len(t), t)):
        terms += interaction(design, sub)
    return terms
