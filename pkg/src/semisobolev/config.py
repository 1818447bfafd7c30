"""Key-value geometry configs and run descriptions for the CLI.

Schema (one `key = value` per line, `#` comments):

    domain   = disk | rectangle | plane | half-plane | interval | line |
               half-line | strip
    radius   = 1.0                   # disk
    center   = 0 0                   # disk
    bounds   = -1 1 -1 1             # rectangle / interval / strip (s-range)
    bc       = robin robin robin robin   # faces xlo xhi ylo yhi
    halfwidth = 10                   # truncation for plane / half-plane / line
    V        = 1.0 | quadratic a b | x1-quadratic a b
    B        = 0 | constant b | x1-quadratic a b        (2D only)
    gamma    = -0.3 | dirichlet | angular-dip base amp theta0 width
    spacing  = 0.05                  # optional mesh hint

Field presets: `quadratic a b` means a + b |x - center|^2; `x1-quadratic`
uses the first coordinate only; `angular-dip` lowers gamma in a Gaussian
window of polar angle around theta0 (disk boundaries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigError
from .geometry import GeometrySpec


def _parse_kv(text: str) -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip().lower()] = val.strip()
    return out


def _floats(key: str, val: str, n: int | None = None) -> list[float]:
    try:
        parts = [float(x) for x in val.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected numbers, got {val!r}") from exc
    if n is not None and len(parts) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {len(parts)}")
    return parts


def _parse_scalar_field(key: str, val: str, center) -> object:
    words = val.split()
    if len(words) == 1:
        try:
            return float(words[0])
        except ValueError as exc:
            raise ConfigError(f"{key}: bad value {val!r}") from exc
    kind, *rest = words
    if kind in ("constant", "const"):
        return float(rest[0])
    if kind == "quadratic":
        a, b = _floats(key, " ".join(rest), 2)
        c = np.asarray(center, dtype=float)

        def f(pts, a=a, b=b, c=c):
            pts = np.atleast_2d(pts)
            return a + b * ((pts - c[: pts.shape[1]]) ** 2).sum(axis=1)

        return f
    if kind == "x1-quadratic":
        a, b = _floats(key, " ".join(rest), 2)
        return lambda pts, a=a, b=b: a + b * np.atleast_2d(pts)[:, 0] ** 2
    raise ConfigError(f"{key}: unknown preset {kind!r}")


def _parse_gamma(val: str, center) -> object:
    if val.lower() == "dirichlet":
        return geometry.DIRICHLET
    words = val.split()
    if words[0] == "angular-dip":
        base, amp, th0, width = _floats("gamma", " ".join(words[1:]), 4)
        c = np.asarray(center, dtype=float)

        def g(pts, base=base, amp=amp, th0=th0, width=width, c=c):
            pts = np.atleast_2d(pts)
            th = np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
            d = np.angle(np.exp(1j * (th - th0)))
            return base - amp * np.exp(-((d / width) ** 2))

        return g
    return _parse_scalar_field("gamma", val, center)


def _parse_field_b(val: str, center, dim: int):
    """Returns (A callback or None, exact B callback or None)."""
    words = val.split()
    if len(words) == 1 and float(words[0]) == 0.0:
        return None, None
    if dim == 1:
        raise ConfigError("B: magnetic fields need dimension 2")
    if len(words) == 1 or words[0] in ("constant", "const"):
        b = float(words[-1])
        A = geometry.linear_gauge(geometry.field_matrix_2d(b),
                                  np.asarray(center, dtype=float))
        return A, (lambda pts, b=b: np.full(len(np.atleast_2d(pts)), b))
    if words[0] == "x1-quadratic":
        a, b = _floats("B", " ".join(words[1:]), 2)

        def A(pts, a=a, b=b):
            pts = np.atleast_2d(pts)
            x1 = pts[:, 0]
            out = np.zeros_like(pts)
            out[:, 1] = a * x1 + b * x1 ** 3 / 3.0
            return out

        return A, (lambda pts, a=a, b=b: a + b * np.atleast_2d(pts)[:, 0] ** 2)
    raise ConfigError(f"B: unknown preset {words[0]!r}")


_FACES = ("robin", "dirichlet", "truncation")


def parse_geometry(text: str) -> tuple[GeometrySpec, dict]:
    """GeometrySpec plus the resolved key-value dict (for output embedding)."""
    kv = _parse_kv(text)
    resolved = dict(kv)
    kind = kv.get("domain")
    if kind is None:
        raise ConfigError("domain: key is required")
    center = _floats("center", kv.get("center", "0 0"))
    halfwidth = float(kv.get("halfwidth", 10.0))

    if kind == "disk":
        dom = geometry.disk(float(kv.get("radius", 1.0)), tuple(center[:2]))
    elif kind == "plane":
        dom = geometry.plane(halfwidth)
    elif kind == "half-plane":
        dom = geometry.half_plane(halfwidth)
    elif kind == "line":
        dom = geometry.line(halfwidth)
    elif kind == "half-line":
        dom = geometry.half_line(halfwidth)
    elif kind in ("rectangle", "interval", "strip"):
        nb = 2 if kind == "interval" else 4
        if "bounds" not in kv:
            raise ConfigError(f"bounds: required for domain = {kind}")
        b = _floats("bounds", kv["bounds"], nb)
        if kind == "interval":
            bcs = kv.get("bc", "robin truncation").split()
            if len(bcs) != 2 or any(x not in _FACES for x in bcs):
                raise ConfigError(f"bc: need 2 of {_FACES}")
            dom = geometry.interval(b[0], b[1], tuple(bcs))
        elif kind == "strip":
            dom = geometry.strip(b[0], b[1])
        else:
            bcs = kv.get("bc", "robin robin robin robin").split()
            if len(bcs) != 4 or any(x not in _FACES for x in bcs):
                raise ConfigError(f"bc: need 4 of {_FACES}")
            dom = geometry.rectangle(((b[0], b[1]), (b[2], b[3])),
                                     ((bcs[0], bcs[1]), (bcs[2], bcs[3])))
    else:
        raise ConfigError(f"domain: unknown kind {kind!r}")

    V = _parse_scalar_field("V", kv.get("v", "0"), center)
    A, B = _parse_field_b(kv.get("b", "0"), center, dom.dim)
    gamma = _parse_gamma(kv.get("gamma", "0"), center)
    spec = GeometrySpec(domain=dom, V=V, A=A, gamma=gamma, B=B,
                        name=kv.get("name", ""))
    return spec, resolved


def load_geometry(path: str) -> tuple[GeometrySpec, dict]:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    return parse_geometry(text)


@dataclass
class RunConfig:
    """Resolved run description embedded into every emitted table."""

    geometry: dict = field(default_factory=dict)
    p: float = 2.0
    h_list: list = field(default_factory=list)
    seed: int = 0
    spacing: float | None = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"p": self.p, "h_list": list(self.h_list), "seed": self.seed,
             "geometry": dict(self.geometry)}
        if self.spacing is not None:
            d["spacing"] = self.spacing
        d.update(self.extras)
        return d
