"""Test functions on [0, 1] and the text grammar used to name them.

Grammar (whitespace-insensitive):

    poly:c0,c1,...,cd   c0 + c1 x + ... + cd x^d
    abs:c               |x - c|
    sin:k               sin(k pi x)
    exp:a               e^(a x)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .poly import Polynomial


class Smoothness(enum.Enum):
    C0 = "C0"
    C2 = "C2"
    C3 = "C3"
    CINF = "Cinf"


class FunctionSpecError(ValueError):
    pass


@dataclass(frozen=True)
class TestFunction:
    kind: str
    params: tuple[float, ...]

    __test__ = False  # keep pytest from collecting this as a test class

    def __post_init__(self):
        if self.kind not in ("poly", "abs", "sin", "exp"):
            raise FunctionSpecError(f"unknown function kind {self.kind!r}")
        if not self.params:
            raise FunctionSpecError(f"{self.kind}: missing parameters")
        if self.kind != "poly" and len(self.params) != 1:
            raise FunctionSpecError(f"{self.kind}: expected one parameter, got {len(self.params)}")

    @classmethod
    def poly(cls, *coeffs: float) -> "TestFunction":
        return cls("poly", tuple(float(c) for c in coeffs))

    @property
    def smoothness(self) -> Smoothness:
        return Smoothness.C0 if self.kind == "abs" else Smoothness.CINF

    @property
    def polynomial(self) -> Polynomial | None:
        return Polynomial(np.array(self.params)) if self.kind == "poly" else None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        (a, *_) = self.params
        if self.kind == "poly":
            return np.broadcast_to(self.polynomial(x), x.shape).astype(float)
        if self.kind == "abs":
            return np.abs(x - a)
        if self.kind == "sin":
            return np.sin(a * np.pi * x)
        return np.exp(a * x)

    def __str__(self):
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)


def _literal(token: str, spec: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FunctionSpecError(f"malformed number {token!r} in function spec {spec!r}") from None
    if not math.isfinite(value):
        raise FunctionSpecError(f"non-finite literal {token!r} in function spec {spec!r}")
    return value


def parse_function_spec(s: str) -> TestFunction:
    compact = "".join(str(s).split())
    kind, sep, body = compact.partition(":")
    if not sep:
        raise FunctionSpecError(f"function spec {s!r} lacks a 'kind:' prefix")
    kind = kind.lower()
    if kind not in ("poly", "abs", "sin", "exp"):
        raise FunctionSpecError(f"unknown function kind {kind!r} in {s!r}")
    if not body:
        raise FunctionSpecError(f"empty parameter list in function spec {s!r}")
    tokens = body.split(",")
    if any(t == "" for t in tokens):
        raise FunctionSpecError(f"empty coefficient in function spec {s!r}")
    if kind != "poly" and len(tokens) != 1:
        raise FunctionSpecError(f"{kind} takes one parameter, got {body!r}")
    return TestFunction(kind, tuple(_literal(t, s) for t in tokens))
