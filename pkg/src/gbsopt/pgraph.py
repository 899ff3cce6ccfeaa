"""Parameter-correlation graph.

Free real variables (``ParamNode``) feed a small vocabulary of differentiable
mapping functions whose outputs are the orbital parameters ("slots") read by
the basis functions. Several slots may share one variable, which is how
symmetry constraints, grid spacings and shared exponents are expressed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("identity", "affine", "negate", "exp", "product", "sum")
ROLES = ("alpha", "d", "center")


class GraphError(ValueError):
    """Raised for malformed graphs or invalid parameter values."""


@dataclass(frozen=True)
class ParamNode:
    id: str
    value: float
    frozen: bool = False
    role: str | None = None


@dataclass(frozen=True)
class MappingFn:
    kind: str
    inputs: tuple[str, ...]
    constants: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))
        if self.kind not in KINDS:
            raise GraphError(f"unknown mapping kind {self.kind!r}")
        n = len(self.inputs)
        if self.kind in ("identity", "negate", "exp", "affine") and n != 1:
            raise GraphError(f"{self.kind} takes exactly one input, got {n}")
        if self.kind in ("product", "sum") and n < 1:
            raise GraphError(f"{self.kind} needs at least one input")
        if self.kind == "affine" and len(self.constants) != 2:
            raise GraphError("affine needs constants (a, b)")

    def apply(self, xs):
        k = self.kind
        if k == "identity":
            return xs[0]
        if k == "affine":
            a, b = self.constants
            return a * xs[0] + b
        if k == "negate":
            return -xs[0]
        if k == "exp":
            return math.exp(xs[0])
        if k == "sum":
            return float(sum(xs))
        return float(np.prod(xs))

    def partials(self, xs):
        """d(output)/d(input_k) for each input."""
        k = self.kind
        if k == "identity":
            return (1.0,)
        if k == "affine":
            return (self.constants[0],)
        if k == "negate":
            return (-1.0,)
        if k == "exp":
            return (math.exp(xs[0]),)
        if k == "sum":
            return (1.0,) * len(xs)
        return tuple(float(np.prod([x for m, x in enumerate(xs) if m != j])) for j in range(len(xs)))


def identity(src):
    return MappingFn("identity", (src,))


def affine(src, a, b=0.0):
    return MappingFn("affine", (src,), (a, b))


@dataclass(frozen=True)
class Derived:
    slot: str
    fn: MappingFn
    role: str | None = None


@dataclass(frozen=True)
class ParamGraph:
    thetas: tuple[ParamNode, ...]
    derived: tuple[Derived, ...]
    _order: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(self.thetas))
        object.__setattr__(self, "derived", tuple(self.derived))
        ids = [t.id for t in self.thetas] + [d.slot for d in self.derived]
        seen = set()
        for i in ids:
            if i in seen:
                raise GraphError(f"duplicate node id {i!r}")
            seen.add(i)
        theta_ids = {t.id for t in self.thetas}
        by_slot = {d.slot: k for k, d in enumerate(self.derived)}
        for d in self.derived:
            for src in d.fn.inputs:
                if src not in theta_ids and src not in by_slot:
                    raise GraphError(f"slot {d.slot!r} reads unknown node {src!r}")
        # depth-first topological sort over derived entries
        order, state = [], {}

        def visit(k, stack):
            s = state.get(k)
            if s == 2:
                return
            if s == 1:
                raise GraphError("cycle detected: " + " -> ".join(stack + [self.derived[k].slot]))
            state[k] = 1
            for src in self.derived[k].fn.inputs:
                if src in by_slot:
                    visit(by_slot[src], stack + [self.derived[k].slot])
            state[k] = 2
            order.append(k)

        for k in range(len(self.derived)):
            visit(k, [])
        object.__setattr__(self, "_order", tuple(order))

    @property
    def n_theta(self):
        return len(self.thetas)

    @property
    def slots(self):
        return [d.slot for d in self.derived]

    def slot_index(self):
        return {d.slot: k for k, d in enumerate(self.derived)}

    def theta_values(self):
        return np.array([t.value for t in self.thetas], dtype=float)

    def free_mask(self):
        return np.array([not t.frozen for t in self.thetas], dtype=bool)

    def with_values(self, theta):
        theta = self._check_theta(theta)
        nodes = tuple(ParamNode(t.id, float(v), t.frozen, t.role) for t, v in zip(self.thetas, theta))
        return ParamGraph(nodes, self.derived)

    def with_frozen(self, frozen_ids):
        frozen_ids = set(frozen_ids)
        nodes = tuple(ParamNode(t.id, t.value, t.id in frozen_ids, t.role) for t in self.thetas)
        return ParamGraph(nodes, self.derived)

    def _check_theta(self, theta):
        theta = self.theta_values() if theta is None else np.asarray(theta, dtype=float)
        if theta.shape != (self.n_theta,):
            raise GraphError(f"expected {self.n_theta} parameters, got shape {theta.shape}")
        return theta

    def _forward(self, theta, with_jac):
        vals = {t.id: float(v) for t, v in zip(self.thetas, theta)}
        jac = {}
        if with_jac:
            for i, t in enumerate(self.thetas):
                row = np.zeros(self.n_theta)
                row[i] = 1.0
                jac[t.id] = row
        for k in self._order:
            d = self.derived[k]
            xs = [vals[s] for s in d.fn.inputs]
            v = d.fn.apply(xs)
            if d.role == "alpha" and not v > 0.0:
                raise GraphError(f"non-positive exponent {v!r} in slot {d.slot!r}")
            vals[d.slot] = v
            if with_jac:
                row = np.zeros(self.n_theta)
                for src, g in zip(d.fn.inputs, d.fn.partials(xs)):
                    row += g * jac[src]
                jac[d.slot] = row
        p = np.array([vals[d.slot] for d in self.derived])
        if not with_jac:
            return p, None
        J = np.array([jac[d.slot] for d in self.derived]).reshape(len(self.derived), self.n_theta)
        return p, J

    def evaluate(self, theta=None):
        return self._forward(self._check_theta(theta), False)[0]

    def jacobian(self, theta=None):
        """Slot values and d(slot)/d(theta), shape (n_slots, n_theta)."""
        return self._forward(self._check_theta(theta), True)

    def to_dict(self):
        return {
            "thetas": [{"id": t.id, "value": t.value, "frozen": t.frozen, "role": t.role}
                       for t in self.thetas],
            "derived": [{"slot": d.slot, "kind": d.fn.kind, "inputs": list(d.fn.inputs),
                         "constants": list(d.fn.constants), "role": d.role} for d in self.derived],
        }

    @classmethod
    def from_dict(cls, data):
        thetas = [ParamNode(t["id"], float(t["value"]), bool(t.get("frozen", False)), t.get("role"))
                  for t in data["thetas"]]
        derived = [Derived(d["slot"], MappingFn(d["kind"], tuple(d["inputs"]), tuple(d.get("constants", ()))),
                           d.get("role")) for d in data["derived"]]
        return cls(thetas, derived)


def eval_graph(graph, theta):
    """All slot values, in slot order, for the variable vector ``theta``."""
    return graph.evaluate(theta)


def pullback(graph, dE_dp, theta=None):
    """Chain ``dE/d(slot)`` back to ``dE/d(theta)``; frozen variables get 0."""
    dE_dp = np.asarray(dE_dp, dtype=float)
    if dE_dp.shape != (len(graph.derived),):
        raise GraphError(f"expected {len(graph.derived)} slot sensitivities, got shape {dE_dp.shape}")
    _, J = graph.jacobian(theta)
    out = J.T @ dE_dp
    out[~graph.free_mask()] = 0.0
    return out


def grid_box(nx, ny, nz, spacing, origin=(0.0, 0.0, 0.0), prefix="grid"):
    """Center slots for an ``nx x ny x nz`` box of grid points driven by one spacing node.

    Returns one ``(x, y, z)`` triple of ``Derived`` per grid point, points
    enumerated with z varying fastest. The box is centered on ``origin``.
    """
    if min(nx, ny, nz) < 0:
        raise GraphError("grid dimensions must be non-negative")
    if not spacing.value > 0:
        raise GraphError(f"grid spacing must be positive, got {spacing.value}")
    dims = (nx, ny, nz)
    points = []
    for idx in np.ndindex(nx + 1, ny + 1, nz + 1):
        triple = []
        for axis, (i, n) in enumerate(zip(idx, dims)):
            coef = i - n / 2.0
            triple.append(Derived(f"{prefix}{len(points)}.{'xyz'[axis]}",
                                  affine(spacing.id, coef, float(origin[axis])), "center"))
        points.append(tuple(triple))
    return points
