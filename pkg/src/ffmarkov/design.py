"""Effect words over Z_s, regular fractional designs and their alias structure.

Factors are labelled ``A, B, C, ...``.  An effect word is an exponent vector
mod ``s``; ``AB^2`` in a four-factor design is ``(1, 2, 0, 0)``.  Words that
differ by a nonzero scalar multiple name the same contrast, so alias
tables list one normalized representative (first nonzero exponent 1).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class DesignError(ValueError):
    """Malformed design specification or effect word."""


@dataclass(frozen=True, order=True)
class EffectWord:
    exponents: tuple[int, ...]
    s: int = 3

    def __post_init__(self) -> None:
        if self.s not in (2, 3):
            raise DesignError(f"only prime level counts 2 and 3 are supported, got s={self.s}")
        object.__setattr__(self, "exponents", tuple(int(e) % self.s for e in self.exponents))

    @property
    def p(self) -> int:
        return len(self.exponents)

    @property
    def is_identity(self) -> bool:
        return not any(self.exponents)

    @property
    def letters(self) -> tuple[int, ...]:
        """Indices of the factors that appear in the word."""
        return tuple(i for i, e in enumerate(self.exponents) if e)

    @property
    def length(self) -> int:
        return len(self.letters)

    def __add__(self, other: EffectWord) -> EffectWord:
        _check_compatible(self, other)
        return EffectWord(tuple(a + b for a, b in zip(self.exponents, other.exponents)), self.s)

    def __sub__(self, other: EffectWord) -> EffectWord:
        _check_compatible(self, other)
        return EffectWord(tuple(a - b for a, b in zip(self.exponents, other.exponents)), self.s)

    def scale(self, c: int) -> EffectWord:
        return EffectWord(tuple(c * e for e in self.exponents), self.s)

    def contrast(self, run: Sequence[int]) -> int:
        """Level of the contrast ``<w, run> mod s``."""
        return sum(e * r for e, r in zip(self.exponents, run)) % self.s

    def sort_key(self) -> tuple:
        # shorter words first, then by (factor, exponent) sequence: AB < AB^2 < AC < BC
        return (self.length, tuple((i, self.exponents[i]) for i in self.letters))

    def __str__(self) -> str:
        return format_word(self)


def _check_compatible(u: EffectWord, v: EffectWord) -> None:
    if u.s != v.s or u.p != v.p:
        raise DesignError(f"incompatible words {u!r} and {v!r}")


def format_word(w: EffectWord, names: Sequence[str] | None = None) -> str:
    if w.is_identity:
        return "I"
    names = names or LETTERS
    return "".join(names[i] + ("" if w.exponents[i] == 1 else f"^{w.exponents[i]}") for i in w.letters)


_WORD_TOKEN = re.compile(r"([A-Z])(?:\^\{?(\d+)\}?)?")


def parse_word(text: str, p: int, s: int = 3, names: Sequence[str] | None = None) -> EffectWord:
    """Parse ``AB^2C`` (or ``I``) into an :class:`EffectWord` over ``p`` factors."""
    text = text.strip().replace(" ", "").replace("²", "^2")
    names = list(names or LETTERS[:p])
    if text == "I":
        return EffectWord((0,) * p, s)
    pos = 0
    exps = [0] * p
    while pos < len(text):
        m = _WORD_TOKEN.match(text, pos)
        if not m:
            raise DesignError(f"cannot parse effect word {text!r}")
        letter, power = m.group(1), int(m.group(2) or 1)
        if letter not in names:
            raise DesignError(f"unknown factor {letter!r} in {text!r}")
        if power >= s or power == 0:
            raise DesignError(f"exponent {power} of {letter} out of range for s={s} in {text!r}")
        idx = names.index(letter)
        if exps[idx]:
            raise DesignError(f"factor {letter} repeated in {text!r}")
        exps[idx] = power
        pos = m.end()
    return EffectWord(tuple(exps), s)


def normalize_word(w: EffectWord) -> EffectWord:
    """Scalar multiple of ``w`` whose first nonzero exponent is 1."""
    if w.is_identity:
        raise DesignError("identity word has no normal form")
    lead = w.exponents[w.letters[0]]
    inv = pow(lead, -1, w.s)
    return w.scale(inv)


def all_normalized_words(p: int, s: int) -> list[EffectWord]:
    """Every normalized nonzero word over ``p`` factors, in sort-key order."""
    out = []
    for exps in itertools.product(range(s), repeat=p):
        w = EffectWord(exps, s)
        if not w.is_identity and normalize_word(w) == w:
            out.append(w)
    return sorted(out, key=EffectWord.sort_key)


def interaction_components(factors: Sequence[int], p: int, s: int) -> list[EffectWord]:
    """The ``(s-1)^(n-1)`` normalized components of the interaction of ``factors``."""
    factors = sorted(factors)
    comps = []
    for tail in itertools.product(range(1, s), repeat=len(factors) - 1):
        exps = [0] * p
        exps[factors[0]] = 1
        for f, e in zip(factors[1:], tail):
            exps[f] = e
        comps.append(EffectWord(tuple(exps), s))
    return sorted(comps, key=EffectWord.sort_key)


@dataclass(frozen=True)
class DesignSpec:
    """A regular ``s^(p-q)`` fraction given by generators ``factor = word``.

    ``generators`` pairs the index of each defined factor with a word over the
    basic factors.  Basic factors are those not defined by any generator.
    """

    s: int
    p: int
    generators: tuple[tuple[int, EffectWord], ...] = ()
    names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.names:
            object.__setattr__(self, "names", tuple(LETTERS[: self.p]))
        if len(self.names) != self.p:
            raise DesignError("need one name per factor")
        defined = [f for f, _ in self.generators]
        if len(set(defined)) != len(defined):
            raise DesignError("a factor is defined by more than one generator")
        for f, w in self.generators:
            if not 0 <= f < self.p:
                raise DesignError(f"generator defines unknown factor index {f}")
            if w.s != self.s or w.p != self.p:
                raise DesignError("generator word does not match the design")
            if w.is_identity:
                raise DesignError(f"factor {self.names[f]} defined by the identity word")
            if any(i in defined for i in w.letters):
                raise DesignError(
                    f"generator for {self.names[f]} uses a defined factor; only basic factors allowed"
                )
        words = self.defining_words
        if len(set(words)) != len(words):
            raise DesignError("defining words are not distinct")

    @property
    def q(self) -> int:
        return len(self.generators)

    @property
    def basic(self) -> tuple[int, ...]:
        defined = {f for f, _ in self.generators}
        return tuple(i for i in range(self.p) if i not in defined)

    @property
    def k(self) -> int:
        return self.s ** (self.p - self.q)

    @property
    def defining_words(self) -> list[EffectWord]:
        """``D = ABC`` becomes ``ABCD^(s-1)``, i.e. ``a + b + c - d = 0``."""
        out = []
        for f, w in self.generators:
            exps = list(w.exponents)
            exps[f] = (exps[f] - 1) % self.s
            out.append(EffectWord(tuple(exps), self.s))
        return out

    def word(self, text: str) -> EffectWord:
        return parse_word(text, self.p, self.s, self.names)

    def label(self) -> str:
        head = f"{self.s}^{{{self.p}-{self.q}}}" if self.q else f"{self.s}^{self.p}"
        gens = [f"{self.names[f]}={format_word(w, self.names)}" for f, w in self.generators]
        return "; ".join([head, *gens])


_HEADER = re.compile(r"^\s*(\d+)\s*\^\s*\{?\s*(\d+)\s*(?:-\s*(\d+))?\s*\}?\s*$")


def parse_design_spec(text: str) -> DesignSpec:
    """Parse ``3^{4-1}; D=ABC`` style text.

    Separators may be ``;``, newlines or commas; ``#`` starts a comment.
    """
    lines = [ln.split("#", 1)[0] for ln in text.splitlines()]
    parts = [t.strip() for t in re.split(r"[;\n,]", "\n".join(lines)) if t.strip()]
    if not parts:
        raise DesignError("empty design specification")
    m = _HEADER.match(parts[0])
    if not m:
        raise DesignError(f"bad design header {parts[0]!r}; expected e.g. '3^{{4-1}}'")
    s, p, q = int(m.group(1)), int(m.group(2)), int(m.group(3) or 0)
    if p > len(LETTERS):
        raise DesignError("too many factors")
    names = tuple(LETTERS[:p])
    gens = []
    for part in parts[1:]:
        if "=" not in part:
            raise DesignError(f"bad generator {part!r}; expected e.g. 'D=ABC'")
        lhs, rhs = (x.strip() for x in part.split("=", 1))
        if lhs not in names:
            raise DesignError(f"unknown factor {lhs!r} in generator {part!r}")
        gens.append((names.index(lhs), parse_word(rhs, p, s, names)))
    if len(gens) != q:
        raise DesignError(f"header announces {q} generators but {len(gens)} were given")
    return DesignSpec(s=s, p=p, generators=tuple(gens), names=names)


@dataclass(frozen=True)
class Design:
    spec: DesignSpec
    runs: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.runs)

    @property
    def s(self) -> int:
        return self.spec.s

    @property
    def p(self) -> int:
        return self.spec.p

    def cell_label(self, i: int) -> str:
        """1-based level string of the basic factors of run ``i`` (``y112`` style)."""
        return "".join(str(self.runs[i][b] + 1) for b in self.spec.basic)


def generate_runs(spec: DesignSpec) -> Design:
    """All ``s^(p-q)`` runs, basic factors in lexicographic order (first factor slowest)."""
    runs = []
    basic = spec.basic
    for levels in itertools.product(range(spec.s), repeat=len(basic)):
        run = [0] * spec.p
        for b, lv in zip(basic, levels):
            run[b] = lv
        for f, w in spec.generators:
            run[f] = w.contrast(run)
        runs.append(tuple(run))
    return Design(spec, tuple(runs))


def aliasing_group(spec: DesignSpec) -> set[EffectWord]:
    """Nonidentity elements of the subgroup generated by the defining words."""
    group = {EffectWord((0,) * spec.p, spec.s)}
    for g in spec.defining_words:
        group |= {h + g.scale(c) for h in group for c in range(1, spec.s)}
    return {g for g in group if not g.is_identity}


def alias_set(w: EffectWord, spec: DesignSpec, group: Iterable[EffectWord] | None = None) -> list[EffectWord]:
    """Normalized words aliased with ``w``, sorted so the simplest comes first."""
    if w.is_identity:
        raise DesignError("the identity has no alias set; see aliasing_group")
    elems = [EffectWord((0,) * spec.p, spec.s), *(aliasing_group(spec) if group is None else group)]
    out = set()
    for c in range(1, spec.s):
        for g in elems:
            v = w.scale(c) + g
            if v.is_identity:
                raise DesignError(f"{w} is aliased with the grand mean")
            out.add(normalize_word(v))
    return sorted(out, key=EffectWord.sort_key)


def alias_classes(spec: DesignSpec) -> list[list[EffectWord]]:
    """Partition of all normalized words outside the defining group into alias classes."""
    group = aliasing_group(spec)
    defining = {normalize_word(g) for g in group}
    seen: set[EffectWord] = set()
    classes = []
    for w in all_normalized_words(spec.p, spec.s):
        if w in seen or w in defining:
            continue
        cls = alias_set(w, spec, group)
        seen.update(cls)
        classes.append(cls)
    return sorted(classes, key=lambda c: c[0].sort_key())


def alias_table(spec: DesignSpec, max_head_length: int = 2) -> list[str]:
    """Alias relations as text, e.g. ``A = BCD^2 = AB^2C^2D``.

    The first line lists the defining relation; classes follow in order of
    their simplest member, restricted to classes whose simplest member has at
    most ``max_head_length`` letters.
    """
    names = spec.names
    lines = []
    defining = sorted({normalize_word(g) for g in aliasing_group(spec)}, key=EffectWord.sort_key)
    if defining:
        lines.append(" = ".join(["I", *(format_word(g, names) for g in defining)]))
    for cls in alias_classes(spec):
        if cls[0].length <= max_head_length:
            lines.append(" = ".join(format_word(v, names) for v in cls))
    return lines


@dataclass
class ClearReport:
    clear_components: list[EffectWord]
    clear_interactions: list[tuple[int, int]]
    unclear_components: list[EffectWord]

    def as_dict(self, names: Sequence[str]) -> dict:
        return {
            "clear_components": [format_word(w, names) for w in self.clear_components],
            "clear_interactions": [f"{names[a]}x{names[b]}" for a, b in self.clear_interactions],
            "unclear_components": [format_word(w, names) for w in self.unclear_components],
        }


def classify_clear(spec: DesignSpec) -> ClearReport:
    """Main effects and two-factor components not aliased with any other such effect."""
    group = aliasing_group(spec)
    low = [w for w in all_normalized_words(spec.p, spec.s) if w.length <= 2]
    low_set = set(low)
    clear, unclear = [], []
    for w in low:
        try:
            cls = alias_set(w, spec, group)
        except DesignError:
            unclear.append(w)
            continue
        if any(v != w and v in low_set for v in cls):
            unclear.append(w)
        else:
            clear.append(w)
    clear_set = set(clear)
    pairs = []
    for a, b in itertools.combinations(range(spec.p), 2):
        if all(c in clear_set for c in interaction_components((a, b), spec.p, spec.s)):
            pairs.append((a, b))
    return ClearReport(clear, pairs, unclear)
