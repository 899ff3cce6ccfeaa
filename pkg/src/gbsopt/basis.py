"""Gaussian orbitals (GTO -> CGTO -> MCGTO), basis-set builders and file parsers."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .integrals import kernels
from .pgraph import Derived, GraphError, ParamGraph, ParamNode, affine, grid_box, identity

BOHR_PER_ANGSTROM = 1.8897259886

ELEMENTS = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr",
)
SHELL_L = {"S": 0, "P": 1, "D": 2, "F": 3, "G": 4, "H": 5, "I": 6}


class BasisError(ValueError):
    pass


def _odd_dfact(n):
    """n!! for odd n >= -1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def gto_norm(alpha, ang):
    """Normalization constant of the Cartesian Gaussian ``x^i y^j z^k exp(-alpha r^2)``."""
    if not alpha > 0:
        raise BasisError(f"exponent must be positive, got {alpha}")
    i, j, k = ang
    if min(ang) < 0:
        raise BasisError(f"angular momenta must be non-negative, got {ang}")
    l = i + j + k
    denom = _odd_dfact(2 * i - 1) * _odd_dfact(2 * j - 1) * _odd_dfact(2 * k - 1)
    return (2.0 * alpha / math.pi) ** 0.75 * (4.0 * alpha) ** (0.5 * l) / math.sqrt(denom)


def cartesian_components(l):
    """Cartesian exponent triples of total degree ``l`` (xx, xy, xz, yy, ... order)."""
    return [(i, j, l - i - j) for i in range(l, -1, -1) for j in range(l - i, -1, -1)]


@dataclass(frozen=True)
class PrimitiveGTO:
    alpha: float
    ang: tuple[int, int, int]
    center: tuple[float, float, float]
    norm: float

    @classmethod
    def make(cls, alpha, ang, center):
        return cls(float(alpha), tuple(int(a) for a in ang), tuple(float(c) for c in center),
                   gto_norm(alpha, ang))

    def __call__(self, r):
        r = np.atleast_2d(r) - np.asarray(self.center)
        poly = r[:, 0] ** self.ang[0] * r[:, 1] ** self.ang[1] * r[:, 2] ** self.ang[2]
        return self.norm * poly * np.exp(-self.alpha * np.sum(r * r, axis=1))


@dataclass(frozen=True)
class CgtoSlots:
    """Graph slot names feeding one contracted function."""
    center: tuple[str, str, str]
    alphas: tuple[str, ...]
    coeffs: tuple[str, ...]


@dataclass(frozen=True)
class ContractedGTO:
    center: tuple[float, float, float]
    ang: tuple[int, int, int]
    alphas: tuple[float, ...]
    coeffs: tuple[float, ...]
    scale: float = 1.0
    slots: CgtoSlots | None = None
    normalize: bool = True

    @property
    def prims(self):
        return [PrimitiveGTO.make(a, self.ang, self.center) for a in self.alphas]

    def expand(self):
        """(coefficient, alpha, center, ang) of each unnormalized primitive."""
        return [(self.scale * d * gto_norm(a, self.ang), a, self.center, self.ang)
                for a, d in zip(self.alphas, self.coeffs)]

    def __call__(self, r):
        return _eval_expansion(self.expand(), r)


def _eval_expansion(terms, r):
    r = np.atleast_2d(np.asarray(r, dtype=float))
    out = np.zeros(len(r))
    for c, a, R, l in terms:
        x = r - np.asarray(R)
        out += c * x[:, 0] ** l[0] * x[:, 1] ** l[1] * x[:, 2] ** l[2] * np.exp(-a * np.sum(x * x, axis=1))
    return out


def _concentric_overlap(alphas, coeffs, ang):
    total = 0.0
    for am, dm in zip(alphas, coeffs):
        for an, dn in zip(alphas, coeffs):
            p = am + an
            s = (math.pi / p) ** 1.5
            for i in ang:
                s *= _odd_dfact(2 * i - 1) / (2.0 * p) ** i
            total += dm * dn * gto_norm(am, ang) * gto_norm(an, ang) * s
    return total


def make_cgto(center, alphas, coeffs, ang=(0, 0, 0), slots=None, normalize=True):
    """Contraction of concentric primitives sharing ``ang``, each primitive normalized."""
    alphas = tuple(float(a) for a in alphas)
    coeffs = tuple(float(d) for d in coeffs)
    if len(alphas) != len(coeffs):
        raise BasisError(f"{len(alphas)} exponents but {len(coeffs)} coefficients")
    if not alphas:
        raise BasisError("a contraction needs at least one primitive")
    for a in alphas:
        if not a > 0:
            raise BasisError(f"exponent must be positive, got {a}")
    ang = tuple(int(i) for i in ang)
    center = tuple(float(c) for c in center)
    scale = 1.0
    if normalize:
        s = _concentric_overlap(alphas, coeffs, ang)
        if not s > 1e-12:
            raise BasisError("contraction has zero norm")
        scale = 1.0 / math.sqrt(s)
    return ContractedGTO(center, ang, alphas, coeffs, scale, slots, normalize)


def expansion_arrays(terms):
    """Split an expansion list into coefficient and primitive arrays."""
    coef = np.array([t[0] for t in terms], dtype=float)
    alpha = np.array([t[1] for t in terms], dtype=float)
    center = np.array([t[2] for t in terms], dtype=float).reshape(-1, 3)
    ang = np.array([t[3] for t in terms], dtype=int).reshape(-1, 3)
    return coef, (alpha, center, ang)


def expansion_overlap(f, g):
    """<f|g> for two expansion lists."""
    if not f or not g:
        return 0.0
    cf, pf = expansion_arrays(f)
    cg, pg = expansion_arrays(g)
    return float(cf @ kernels.overlap_matrix(pf, pg) @ cg)


@dataclass(frozen=True)
class MixedContractedGTO:
    terms: tuple[ContractedGTO, ...]
    weights: tuple[float, ...]
    scale: float = 1.0
    normalize: bool = True

    def expand(self):
        out = []
        for t, w in zip(self.terms, self.weights):
            for c, a, R, l in t.expand():
                out.append((self.scale * w * c, a, R, l))
        return out

    @property
    def n_prims(self):
        return sum(len(t.alphas) for t in self.terms)

    def __call__(self, r):
        return _eval_expansion(self.expand(), r)


def make_mcgto(terms, weights=None, normalize=True):
    """Linear combination of contracted functions, optionally renormalized."""
    terms = tuple(terms)
    if not terms:
        raise BasisError("an MCGTO needs at least one term")
    weights = tuple(float(w) for w in (weights if weights is not None else [1.0] * len(terms)))
    if len(weights) != len(terms):
        raise BasisError("one weight per term required")
    if not all(math.isfinite(w) for w in weights):
        raise BasisError("weights must be finite")
    f = MixedContractedGTO(terms, weights, 1.0, normalize)
    if normalize:
        s = expansion_overlap(f.expand(), f.expand())
        if not s > 1e-12:
            raise BasisError("mixed contraction has zero self-overlap")
        f = replace(f, scale=1.0 / math.sqrt(s))
    return f


def _rebuild(f, p, idx):
    terms = []
    for t in f.terms:
        if t.slots is None:
            terms.append(t)
            continue
        terms.append(make_cgto([p[idx[s]] for s in t.slots.center],
                               [p[idx[s]] for s in t.slots.alphas],
                               [p[idx[s]] for s in t.slots.coeffs],
                               t.ang, t.slots, t.normalize))
    return make_mcgto(terms, f.weights, f.normalize)


@dataclass(frozen=True)
class BasisSet:
    functions: tuple[MixedContractedGTO, ...]
    graph: ParamGraph
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "labels", tuple(self.labels))
        known = set(self.graph.slots)
        for f in self.functions:
            for t in f.terms:
                if t.slots is None:
                    continue
                for s in (*t.slots.center, *t.slots.alphas, *t.slots.coeffs):
                    if s not in known:
                        raise GraphError(f"basis reads slot {s!r} missing from the graph")

    @property
    def W(self):
        return len(self.functions)

    @property
    def n_gto(self):
        return sum(f.n_prims for f in self.functions)

    def at(self, theta):
        """The same basis with every parameter re-evaluated at ``theta``."""
        graph = self.graph.with_values(theta)
        p = graph.evaluate()
        idx = graph.slot_index()
        return BasisSet(tuple(_rebuild(f, p, idx) for f in self.functions), graph, self.labels)

    def to_dict(self):
        funcs = []
        for f in self.functions:
            terms = []
            for t in f.terms:
                if t.slots is None:
                    raise BasisError("only slot-driven bases can be serialized")
                terms.append({"ang": list(t.ang), "normalize": t.normalize,
                              "center": list(t.slots.center), "alphas": list(t.slots.alphas),
                              "coeffs": list(t.slots.coeffs)})
            funcs.append({"weights": list(f.weights), "normalize": f.normalize, "terms": terms})
        return {"kind": "explicit", "graph": self.graph.to_dict(), "functions": funcs,
                "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, data):
        graph = ParamGraph.from_dict(data["graph"])
        p = graph.evaluate()
        idx = graph.slot_index()
        funcs = []
        for fd in data["functions"]:
            terms = []
            for td in fd["terms"]:
                slots = CgtoSlots(tuple(td["center"]), tuple(td["alphas"]), tuple(td["coeffs"]))
                terms.append(make_cgto([p[idx[s]] for s in slots.center], [p[idx[s]] for s in slots.alphas],
                                       [p[idx[s]] for s in slots.coeffs], td["ang"], slots,
                                       td.get("normalize", True)))
            funcs.append(make_mcgto(terms, fd["weights"], fd.get("normalize", True)))
        return cls(tuple(funcs), graph, tuple(data.get("labels", ())))


@dataclass(frozen=True, eq=False)
class NuclearField:
    positions: np.ndarray
    charges: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        z = np.asarray(self.charges, dtype=float).reshape(-1)
        if len(pos) != len(z):
            raise BasisError("one charge per nucleus required")
        if not np.all(np.isfinite(pos)):
            raise BasisError("nuclear positions must be finite")
        if np.any(z <= 0):
            raise BasisError("nuclear charges must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", z)
        object.__setattr__(self, "labels", tuple(self.labels))

    def nuclear_repulsion(self):
        e = 0.0
        for a in range(len(self.charges)):
            for b in range(a):
                e += self.charges[a] * self.charges[b] / np.linalg.norm(self.positions[a] - self.positions[b])
        return float(e)

    def n_electrons(self, charge=0):
        return int(round(self.charges.sum())) - int(charge)


def element_charge(symbol):
    sym = symbol.strip().capitalize()
    if sym not in ELEMENTS:
        raise BasisError(f"unknown element {symbol!r}")
    return ELEMENTS.index(sym) + 1


def parse_xyz(text, units="bohr"):
    """Parse XYZ text into a ``NuclearField`` with positions in bohr."""
    if units not in ("bohr", "angstrom"):
        raise BasisError(f"unknown length unit {units!r}")
    lines = text.strip("\n").splitlines()
    if not lines:
        raise BasisError("empty XYZ input")
    try:
        n = int(lines[0].split()[0])
    except (ValueError, IndexError):
        raise BasisError("first XYZ line must hold the atom count") from None
    rows = [ln for ln in lines[2:] if ln.strip()]
    if len(rows) != n:
        raise BasisError(f"XYZ header announces {n} atoms but {len(rows)} rows follow")
    fac = BOHR_PER_ANGSTROM if units == "angstrom" else 1.0
    labels, pos, z = [], [], []
    for row in rows:
        tok = row.split()
        if len(tok) < 4:
            raise BasisError(f"malformed XYZ row {row!r}")
        sym = re.match(r"[A-Za-z]+", tok[0])
        if sym is None:
            raise BasisError(f"malformed XYZ row {row!r}")
        z.append(element_charge(sym.group(0)))
        labels.append(ELEMENTS[z[-1] - 1])
        pos.append([float(v) * fac for v in tok[1:4]])
    return NuclearField(np.array(pos), np.array(z, dtype=float), tuple(labels))


@dataclass(frozen=True)
class Shell:
    l: int
    exponents: tuple[float, ...]
    coeffs: tuple[float, ...]

    @property
    def n_functions(self):
        return len(cartesian_components(self.l))


def _num(tok):
    return float(tok.replace("D", "E").replace("d", "e"))


def parse_gaussian94(text):
    """Parse Gaussian94 basis text into ``{element: [Shell, ...]}``.

    SP (or L) shells are split into an S and a P shell with the same exponents.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("!")]
    out = {}
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if head[0] == "****":
            i += 1
            continue
        if len(head) != 2 or not head[0].isalpha() or head[1] != "0":
            raise BasisError(f"expected element header, got {lines[i]!r}")
        element = head[0].capitalize()
        element_charge(element)
        shells = out.setdefault(element, [])
        i += 1
        while i < len(lines) and lines[i] != "****":
            tok = lines[i].split()
            if len(tok) != 3:
                raise BasisError(f"malformed shell line {lines[i]!r}")
            kind = tok[0].upper()
            try:
                nprim = int(tok[1])
            except ValueError:
                raise BasisError(f"malformed shell line {lines[i]!r}") from None
            ls = [0, 1] if kind in ("SP", "L") else [SHELL_L.get(kind)]
            if None in ls:
                raise BasisError(f"unknown shell type {tok[0]!r}")
            rows = lines[i + 1:i + 1 + nprim]
            if len(rows) != nprim:
                raise BasisError(f"shell {kind} announces {nprim} primitives, file ends early")
            data = []
            for row in rows:
                vals = row.split()
                if len(vals) != 1 + len(ls):
                    raise BasisError(f"primitive row {row!r} has wrong column count for {kind}")
                try:
                    data.append([_num(v) for v in vals])
                except ValueError:
                    raise BasisError(f"primitive count mismatch or bad number near {row!r}") from None
            for col, l in enumerate(ls):
                shells.append(Shell(l, tuple(r[0] for r in data), tuple(r[1 + col] for r in data)))
            i += 1 + nprim
        if i >= len(lines):
            raise BasisError(f"element block {element} not terminated by ****")
        i += 1
    return out


# ---------------------------------------------------------------- builders


def basis_from_shells(shells_by_element, field, free=("alpha", "d", "center"),
                      share_element=False, inversion=False):
    """Atom-centered basis with one graph variable per parameter.

    ``share_element`` ties exponents/coefficients of equal shells on atoms of
    the same element; ``inversion`` ties atom centers related by inversion
    through the molecular centroid. Variables whose role is not in ``free``
    are frozen.
    """
    labels = field.labels or tuple(ELEMENTS[int(z) - 1] for z in field.charges)
    pos = field.positions
    thetas, derived, functions, flabels = [], [], [], []
    theta_ids = set()

    def add_theta(tid, value, role):
        if tid not in theta_ids:
            theta_ids.add(tid)
            thetas.append(ParamNode(tid, float(value), role not in free, role))

    partner = {}
    if inversion:
        c = pos.mean(axis=0)
        for a in range(len(pos)):
            for b in range(len(pos)):
                if labels[a] == labels[b] and np.allclose(pos[b], 2 * c - pos[a], atol=1e-8):
                    partner[a] = b
        if len(partner) != len(pos):
            raise BasisError("geometry is not inversion symmetric")
    for a, el in enumerate(labels):
        if el not in shells_by_element:
            raise BasisError(f"no basis functions for element {el}")
        center_slots = tuple(f"{el}{a}.{ax}" for ax in "xyz")
        b = partner.get(a, a)
        for d, ax in enumerate("xyz"):
            if b < a:
                c = pos.mean(axis=0)
                derived.append(Derived(center_slots[d], affine(f"R{b}.{ax}", -1.0, 2 * c[d]), "center"))
            else:
                add_theta(f"R{a}.{ax}", pos[a, d], "center")
                derived.append(Derived(center_slots[d], identity(f"R{a}.{ax}"), "center"))
        for s, shell in enumerate(shells_by_element[el]):
            key = f"{el}.s{s}" if share_element else f"{el}{a}.s{s}"
            aslots, dslots = [], []
            for n, (alpha, dcoef) in enumerate(zip(shell.exponents, shell.coeffs)):
                add_theta(f"{key}.alpha{n}", alpha, "alpha")
                add_theta(f"{key}.d{n}", dcoef, "d")
                aslots.append(f"{el}{a}.shell{s}.alpha{n}")
                dslots.append(f"{el}{a}.shell{s}.d{n}")
                derived.append(Derived(aslots[-1], identity(f"{key}.alpha{n}"), "alpha"))
                derived.append(Derived(dslots[-1], identity(f"{key}.d{n}"), "d"))
            slots = CgtoSlots(center_slots, tuple(aslots), tuple(dslots))
            for ang in cartesian_components(shell.l):
                cg = make_cgto(pos[a], shell.exponents, shell.coeffs, ang, slots)
                functions.append(make_mcgto([cg]))
                flabels.append(f"{el}{a} {'spdfghi'[shell.l]}{_ang_label(ang)}")
    return BasisSet(tuple(functions), ParamGraph(thetas, derived), tuple(flabels))


def _ang_label(ang):
    return "".join(ax * n for ax, n in zip("xyz", ang))


def cdo3_basis(n_gto, alphas, coeffs, radius, origin=(0.0, 0.0, 0.0)):
    """Three delocalized functions, each a symmetric pair of identical floating CGTOs.

    The six CGTOs sit at ``origin +- radius`` along x, y and z (an
    octahedron), so each pair's connecting segment perpendicularly bisects
    the other two. All six share the same ``n_gto`` exponents and
    coefficients; the variables are the exponents, the coefficients and the
    radius.
    """
    if n_gto < 1:
        raise BasisError("n_gto must be at least 1")
    if len(alphas) != n_gto or len(coeffs) != n_gto:
        raise BasisError(f"need {n_gto} exponents and coefficients")
    thetas = [ParamNode(f"cdo.alpha{k}", float(a), False, "alpha") for k, a in enumerate(alphas)]
    thetas += [ParamNode(f"cdo.d{k}", float(d), False, "d") for k, d in enumerate(coeffs)]
    thetas.append(ParamNode("cdo.r", float(radius), False, "center"))
    derived, functions = [], []
    for axis in range(3):
        terms = []
        for sign in (1.0, -1.0):
            name = f"cdo{'xyz'[axis]}{'+' if sign > 0 else '-'}"
            cslots = []
            center = []
            for d in range(3):
                a = sign if d == axis else 0.0
                cslots.append(f"{name}.{'xyz'[d]}")
                derived.append(Derived(cslots[-1], affine("cdo.r", a, origin[d]), "center"))
                center.append(origin[d] + a * radius)
            aslots = tuple(f"{name}.alpha{k}" for k in range(n_gto))
            dslots = tuple(f"{name}.d{k}" for k in range(n_gto))
            for k in range(n_gto):
                derived.append(Derived(aslots[k], identity(f"cdo.alpha{k}"), "alpha"))
                derived.append(Derived(dslots[k], identity(f"cdo.d{k}"), "d"))
            terms.append(make_cgto(center, alphas, coeffs, (0, 0, 0),
                                   CgtoSlots(tuple(cslots), aslots, dslots)))
        functions.append(make_mcgto(terms, (1.0, 1.0)))
    labels = ("cdo-x", "cdo-y", "cdo-z")
    return BasisSet(tuple(functions), ParamGraph(thetas, derived), labels)


def grid_box_basis(dims, spacing, alphas, coeffs, origin=(0.0, 0.0, 0.0), share="symmetry"):
    """s-type CGTOs on the points of a grid box controlled by one spacing variable.

    ``share`` selects how exponents/coefficients are tied: "symmetry" (points
    equivalent under the box's mirror planes share), "all" or "none".
    """
    if share not in ("symmetry", "all", "none"):
        raise BasisError(f"unknown sharing mode {share!r}")
    nx, ny, nz = dims
    L = ParamNode("grid.L", float(spacing), False, "center")
    points = grid_box(nx, ny, nz, L, origin)
    thetas = [L]
    seen = set()
    derived, functions = [], []
    for pidx, (idx, triple) in enumerate(zip(np.ndindex(nx + 1, ny + 1, nz + 1), points)):
        derived.extend(triple)
        if share == "all":
            key = "all"
        elif share == "none":
            key = f"p{pidx}"
        else:
            key = "c" + "_".join(str(abs(2 * i - n)) for i, n in zip(idx, dims))
        aslots, dslots = [], []
        for k, (a, d) in enumerate(zip(alphas, coeffs)):
            if key not in seen:
                thetas.append(ParamNode(f"grid.{key}.alpha{k}", float(a), False, "alpha"))
                thetas.append(ParamNode(f"grid.{key}.d{k}", float(d), False, "d"))
            aslots.append(f"grid{pidx}.alpha{k}")
            dslots.append(f"grid{pidx}.d{k}")
            derived.append(Derived(aslots[-1], identity(f"grid.{key}.alpha{k}"), "alpha"))
            derived.append(Derived(dslots[-1], identity(f"grid.{key}.d{k}"), "d"))
        seen.add(key)
        center = [origin[d] + (i - n / 2.0) * spacing for d, (i, n) in enumerate(zip(idx, dims))]
        slots = CgtoSlots(tuple(t.slot for t in triple), tuple(aslots), tuple(dslots))
        functions.append(make_mcgto([make_cgto(center, alphas, coeffs, (0, 0, 0), slots)]))
    return BasisSet(tuple(functions), ParamGraph(thetas, derived),
                    tuple(f"grid{k}" for k in range(len(functions))))


def fixed_basis(functions, labels=()):
    """Wrap already-built functions (no variables) as a basis set."""
    return BasisSet(tuple(functions), ParamGraph((), ()), tuple(labels))


__all__ = [
    "BasisError", "BasisSet", "CgtoSlots", "ContractedGTO", "MixedContractedGTO", "NuclearField",
    "PrimitiveGTO", "Shell", "basis_from_shells", "cartesian_components", "cdo3_basis", "fixed_basis",
    "gto_norm", "grid_box_basis", "make_cgto", "make_mcgto", "parse_gaussian94", "parse_xyz",
]
