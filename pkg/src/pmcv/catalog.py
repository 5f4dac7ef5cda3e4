"""Classified biharmonic examples and controlled non-examples.

Every generator returns a :class:`CatalogEntry` whose immersion is written
in the expression language, so catalog entries and user files run through
exactly the same engine.  Entries are addressable by ids such as
``cyl:c=1:kappa=1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .exprdsl import parse_dsl
from .immersion import ImmersionSpec

__all__ = [
    "CatalogEntry",
    "CatalogError",
    "make_vertical_cylinder",
    "make_small_sphere_surface",
    "make_clifford_in_small_sphere",
    "make_cylinder_over_small_sphere",
    "make_great_sphere_slice",
    "make_perturbed_cylinder",
    "from_id",
    "list_kinds",
]

HARMONIC = "harmonic"
PROPER = "proper_biharmonic"
NEITHER = "neither"

_REL = 1e-12


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    spec: ImmersionSpec
    expected: dict = field(default_factory=dict)
    provenance: str = ""

    @property
    def source(self) -> str:
        from .exprdsl import print_dsl

        return print_dsl(self.spec.ast)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _REL * max(1.0, abs(a), abs(b))


def _fmt(x: float) -> str:
    return repr(float(x)).rstrip("0").rstrip(".") if float(x) != int(x) else str(int(x))


_CYLINDER = """\
chart m=2 outputs N=5 domain [0, 2*pi*rho]x[-1, 1]
# vertical cylinder over a latitude circle of S^2(c) in S^3(c), unit speed
rho*cos(u1/rho)
rho*sin(u1/rho)
z
0
u2 + t0
"""


def make_vertical_cylinder(c: float, kappa: float, t0: float = 0.0) -> CatalogEntry:
    """Cylinder over the latitude circle of geodesic curvature ``kappa``.

    The circle sits at polar angle ``phi`` with ``cot(phi) = kappa / sqrt(c)``.
    """
    if not c > 0:
        raise CatalogError("c must be positive")
    if not kappa >= 0:
        raise CatalogError("kappa must be non-negative")
    r = 1.0 / math.sqrt(c)
    phi = math.atan2(math.sqrt(c), kappa)
    params = {"rho": r * math.sin(phi), "z": r * math.cos(phi), "t0": t0}
    spec = ImmersionSpec(parse_dsl(_CYLINDER), c, params, name="vertical_cylinder")
    if kappa == 0:
        verdict = HARMONIC
    elif _close(kappa, math.sqrt(c)):
        verdict = PROPER
    else:
        verdict = NEITHER
    expected = {
        "H_norm": kappa / 2.0,
        "T_norm": 1.0,
        "sigma_norm_sq": kappa**2,
        "K": 0.0,
        "pmc": True,
        "pseudo_umbilical": kappa == 0,
        "verdict": verdict,
    }
    return CatalogEntry(
        _id("cyl", c=c, kappa=kappa, t0=t0),
        spec,
        expected,
        "vertical cylinder over a circle of curvature sqrt(c) in S^2(c)",
    )


_SPHERE = """\
chart m=2 outputs N=5 domain [0.3, pi - 0.3]x[0, 2*pi]
# round sphere of radius rho at height z inside S^3(c), at time t0
rho*sin(u1)*cos(u2)
rho*sin(u1)*sin(u2)
rho*cos(u1)
z
t0
"""


def make_small_sphere_surface(c: float, c_prime: float, t0: float = 0.0) -> CatalogEntry:
    """The sphere ``S^2(c')`` inside ``S^3(c)``, ``c' > c``, at height ``t0``."""
    if not c > 0:
        raise CatalogError("c must be positive")
    if not c_prime > c:
        raise CatalogError(f"no small sphere S^2({c_prime}) inside S^3({c}): need c' > c")
    r = 1.0 / math.sqrt(c)
    rho = 1.0 / math.sqrt(c_prime)
    params = {"rho": rho, "z": math.sqrt(r * r - rho * rho), "t0": t0}
    spec = ImmersionSpec(parse_dsl(_SPHERE), c, params, name="small_sphere")
    verdict = PROPER if _close(c_prime, 2 * c) else NEITHER
    H2 = c_prime - c
    expected = {
        "H_norm": math.sqrt(H2),
        "T_norm": 0.0,
        "sigma_norm_sq": 2 * H2,
        "K": c_prime,
        "pmc": True,
        "pseudo_umbilical": True,
        "verdict": verdict,
    }
    return CatalogEntry(
        _id("sphere", c=c, cprime=c_prime, t0=t0),
        spec,
        expected,
        "minimal surface (totally umbilical sphere) of a small hypersphere",
    )


_GREAT_SPHERE = """\
chart m=2 outputs N=5 domain [0.3, pi - 0.3]x[0, 2*pi]
# totally geodesic great sphere of S^3(c) at time t0
r*sin(u1)*cos(u2)
r*sin(u1)*sin(u2)
r*cos(u1)
0
t0
"""


def make_great_sphere_slice(c: float, t0: float = 0.0) -> CatalogEntry:
    if not c > 0:
        raise CatalogError("c must be positive")
    spec = ImmersionSpec(parse_dsl(_GREAT_SPHERE), c, {"r": 1 / math.sqrt(c), "t0": t0}, name="great_sphere")
    expected = {
        "H_norm": 0.0,
        "T_norm": 0.0,
        "sigma_norm_sq": 0.0,
        "K": c,
        "pmc": True,
        "pseudo_umbilical": True,
        "verdict": HARMONIC,
    }
    return CatalogEntry(_id("slice", c=c, t0=t0), spec, expected, "totally geodesic slice")


_CLIFFORD = """\
chart m=2 outputs N=6 domain [0, 2*pi*a]x[0, 2*pi*a]
# square torus, minimal in S^3(c'') which sits in S^4(c) at height z
a*cos(u1/a)
a*sin(u1/a)
a*cos(u2/a)
a*sin(u2/a)
z
t0
"""


def make_clifford_in_small_sphere(c: float, c_prime: float | None = None, t0: float = 0.0) -> CatalogEntry:
    """Minimal Clifford torus of ``S^3(c')`` inside ``S^4(c)``; ``c' = 2c`` by default."""
    if not c > 0:
        raise CatalogError("c must be positive")
    c_prime = 2.0 * c if c_prime is None else float(c_prime)
    if not c_prime > c:
        raise CatalogError("need c' > c")
    r = 1.0 / math.sqrt(c)
    R = 1.0 / math.sqrt(c_prime)
    params = {"a": R / math.sqrt(2.0), "z": math.sqrt(r * r - R * R), "t0": t0}
    spec = ImmersionSpec(parse_dsl(_CLIFFORD), c, params, name="clifford_torus")
    verdict = PROPER if _close(c_prime, 2 * c) else NEITHER
    H2 = c_prime - c
    expected = {
        "H_norm": math.sqrt(H2),
        "T_norm": 0.0,
        # minimal part: |sigma_0|^2 = 2 c' for the Clifford torus, plus the umbilical part
        "sigma_norm_sq": 2 * c_prime + 2 * H2,
        "K": 0.0,
        "pmc": True,
        "pseudo_umbilical": True,
        "verdict": verdict,
    }
    ident = _id("clifford", c=c, t0=t0) if _close(c_prime, 2 * c) else _id("clifford", c=c, cprime=c_prime, t0=t0)
    return CatalogEntry(ident, spec, expected, "minimal surface of a small hypersphere S^3(2c) in S^4(c)")


_CYL_SPHERE = """\
chart m=3 outputs N=5 domain [0.3, pi - 0.3]x[0, 2*pi]x[-1, 1]
# vertical cylinder over the sphere S^2(c') inside S^3(c)
rho*sin(u1)*cos(u2)
rho*sin(u1)*sin(u2)
rho*cos(u1)
z
u3 + t0
"""


def make_cylinder_over_small_sphere(c: float, c_prime: float | None = None, t0: float = 0.0) -> CatalogEntry:
    """Three-dimensional cylinder over ``S^2(c')``; ``c' = 2c`` by default."""
    if not c > 0:
        raise CatalogError("c must be positive")
    c_prime = 2.0 * c if c_prime is None else float(c_prime)
    if not c_prime > c:
        raise CatalogError("need c' > c")
    r = 1.0 / math.sqrt(c)
    rho = 1.0 / math.sqrt(c_prime)
    params = {"rho": rho, "z": math.sqrt(r * r - rho * rho), "t0": t0}
    spec = ImmersionSpec(parse_dsl(_CYL_SPHERE), c, params, name="cylinder_over_sphere")
    k2 = c_prime - c
    verdict = PROPER if _close(c_prime, 2 * c) else NEITHER
    expected = {
        "H_norm": 2.0 / 3.0 * math.sqrt(k2),
        "T_norm": 1.0,
        "sigma_norm_sq": 2 * k2,
        "pmc": True,
        "pseudo_umbilical": False,
        "verdict": verdict,
    }
    ident = _id("cylsphere", c=c, t0=t0) if _close(c_prime, 2 * c) else _id("cylsphere", c=c, cprime=c_prime, t0=t0)
    return CatalogEntry(ident, spec, expected, "vertical cylinder over a small hypersphere S^2(2c) in S^3(c)")


_PERTURBED = """\
chart m=2 outputs N=5 domain [0, 2*pi]x[-1, 1]
# latitude circles whose radius is modulated along the vertical direction
rho*(1 + eps*sin(u2))*cos(u1)
rho*(1 + eps*sin(u2))*sin(u1)
sqrt(r^2 - (rho*(1 + eps*sin(u2)))^2)
0
u2
"""


def make_perturbed_cylinder(c: float, kappa: float, eps: float = 0.1) -> CatalogEntry:
    """Non-pmc control: the cylinder with radius ``rho * (1 + eps sin(u2))``."""
    if not c > 0:
        raise CatalogError("c must be positive")
    r = 1.0 / math.sqrt(c)
    phi = math.atan2(math.sqrt(c), kappa)
    rho = r * math.sin(phi)
    if not rho * (1 + abs(eps)) < r:
        raise CatalogError("perturbation leaves the sphere")
    spec = ImmersionSpec(parse_dsl(_PERTURBED), c, {"rho": rho, "r": r, "eps": eps}, name="perturbed_cylinder")
    expected = {"pmc": eps == 0}
    return CatalogEntry(_id("pcyl", c=c, kappa=kappa, eps=eps), spec, expected, "controlled non-example")


# ---------------------------------------------------------------------------
# ids
# ---------------------------------------------------------------------------

_KINDS = {
    "cyl": (make_vertical_cylinder, ("c", "kappa"), ("t0",)),
    "sphere": (make_small_sphere_surface, ("c", "cprime"), ("t0",)),
    "clifford": (make_clifford_in_small_sphere, ("c",), ("cprime", "t0")),
    "cylsphere": (make_cylinder_over_small_sphere, ("c",), ("cprime", "t0")),
    "slice": (make_great_sphere_slice, ("c",), ("t0",)),
    "pcyl": (make_perturbed_cylinder, ("c", "kappa"), ("eps",)),
}

_ARG_NAMES = {"cprime": "c_prime"}


def _id(kind: str, **values) -> str:
    parts = [kind]
    required, optional = _KINDS[kind][1], _KINDS[kind][2]
    for key in required + optional:
        if key not in values:
            continue
        v = values[key]
        if key in optional and key == "t0" and v == 0:
            continue
        parts.append(f"{key}={_fmt(v)}")
    return ":".join(parts)


def list_kinds() -> dict[str, tuple[tuple[str, ...], tuple[str, ...]]]:
    return {k: (v[1], v[2]) for k, v in _KINDS.items()}


def from_id(ident: str) -> CatalogEntry:
    """Build the entry for an id like ``cyl:c=1:kappa=1``."""
    kind, *rest = ident.strip().split(":")
    if kind not in _KINDS:
        raise CatalogError(f"unknown catalog kind {kind!r}; known: {', '.join(_KINDS)}")
    fn, required, optional = _KINDS[kind]
    values = {}
    for part in rest:
        key, sep, val = part.partition("=")
        if not sep or key not in required + optional:
            raise CatalogError(f"bad field {part!r} in catalog id {ident!r}")
        try:
            values[_ARG_NAMES.get(key, key)] = float(val)
        except ValueError:
            raise CatalogError(f"field {key!r} must be a number, got {val!r}") from None
    missing = [k for k in required if _ARG_NAMES.get(k, k) not in values]
    if missing:
        raise CatalogError(f"catalog id {ident!r} is missing {', '.join(missing)}")
    return fn(**values)


# Fixed list for `catalog list`: the classified examples and their controls.
STANDARD_IDS = (
    "cyl:c=1:kappa=1",
    "cyl:c=4:kappa=2",
    "cyl:c=1:kappa=0.5",
    "cyl:c=1:kappa=0",
    "sphere:c=1:cprime=2",
    "sphere:c=1:cprime=3",
    "clifford:c=1",
    "cylsphere:c=1",
    "slice:c=1",
    "pcyl:c=1:kappa=1:eps=0.1",
)
