"""Reference designs, models and minimal-basis censuses used across the tests.

Censuses map degree -> (moves, indispensable moves).  ``None`` in the
second slot means only the count is asserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from ffmarkov.design import generate_runs, parse_design_spec
from ffmarkov.markov import classify_indispensable, compute_markov_basis, reduce_to_minimal
from ffmarkov.model import build_covariate_matrix, parse_model_spec

D331 = "3^{3-1}; C=AB"
D341 = "3^{4-1}; D=ABC"
D352A = "3^{5-2}; D=AB; E=AB^2C"
D352B = "3^{5-2}; D=AB; E=AB^2"


@dataclass(frozen=True)
class Case:
    design: str
    interactions: str
    census: dict = field(compare=False)
    unique: bool = False

    @property
    def model(self) -> str:
        return "main: all" + (f"; interactions: {self.interactions}" if self.interactions else "")

    @property
    def id(self) -> str:
        tag = {D331: "3^(3-1)", D341: "3^(4-1)", D352A: "3^(5-2)a", D352B: "3^(5-2)b"}[self.design]
        return f"{tag}:main" + (f"+{self.interactions.replace(', ', '+')}" if self.interactions else "")


CASES = [
    Case(D331, "", {3: (2, 0)}),
    Case(D341, "", {2: (54, 0), 3: (24, 0)}),
    Case(D341, "AxB", {2: (27, 27), 3: (54, 0)}),
    Case(D341, "AxB, AxC", {3: (6, 0), 4: (81, 81), 6: (171, 171)}),
    Case(D341, "AxB, AxC, BxC", {6: (27, 27), 8: (27, 27)}, unique=True),
    Case(D341, "AxB, AxC, AxD", {3: (6, 0)}),
    # degree 4 and 6 are counts only: these moves turn out dispensable,
    # see test_markov.test_degree4_move_has_an_alternative
    Case(D352A, "", {2: (27, 27), 3: (56, 0), 4: (54, None), 6: (9, None)}),
    Case(D352A, "AxC", {3: (18, 0), 4: (162, 162), 5: (135, 135), 6: (54, 54)}),
    Case(D352A, "CxE", {2: (27, 27)}, unique=True),
    Case(D352A, "AxC, AxE", {3: (6, 0), 6: (81, 81)}),
    Case(D352A, "AxC, BxC", {4: (27, 27), 6: (54, 54)}, unique=True),
    Case(D352A, "AxC, CxE", {4: (27, 27), 6: (54, 54)}, unique=True),
    Case(D352A, "AxC, AxE, CxE", {6: (9, 9)}, unique=True),
    Case(D352A, "AxC, BxC, CxD", {6: (9, 9)}, unique=True),
    Case(D352A, "AxC, BxC, CxE", {6: (9, 9)}, unique=True),
    Case(D352B, "", {2: (108, 108)}, unique=True),
    Case(D352B, "AxC", {2: (27, 27)}, unique=True),
    Case(D352B, "AxC, BxC", {4: (27, 27), 6: (54, 54)}, unique=True),
    Case(D352B, "AxC, BxC, CxD", {6: (9, 9)}, unique=True),
]

FAST_CASES = [c for c in CASES if c.design in (D331, D352B) or c.interactions in ("AxB, AxC, AxD", "CxE")]


@lru_cache(maxsize=None)
def design(text: str):
    return generate_runs(parse_design_spec(text))


def labels(text: str) -> tuple[str, ...]:
    d = design(text)
    return tuple("y" + d.cell_label(i) for i in range(d.k))


@lru_cache(maxsize=None)
def matrix(design_text: str, model_text: str):
    d = design(design_text)
    return build_covariate_matrix(parse_model_spec(model_text, d)).T


@lru_cache(maxsize=None)
def full_basis(case: Case):
    return compute_markov_basis(matrix(case.design, case.model), labels(case.design))


@lru_cache(maxsize=None)
def minimal_basis(case: Case):
    return classify_indispensable(reduce_to_minimal(full_basis(case)))
