import json
import os
import sys

import numpy as np
import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "data")
sys.path.insert(0, HERE)

from gbsopt.basis import NuclearField, basis_from_shells, parse_gaussian94  # noqa: E402


def data_path(name):
    return os.path.join(DATA, name)


def example_path(name):
    """Files under the repository's top-level data/ directory."""
    return os.path.join(os.path.dirname(HERE), "data", name)


def shells(name):
    with open(data_path(f"{name}.gbs")) as fh:
        return parse_gaussian94(fh.read())


def reference():
    with open(os.path.join(HERE, "reference", "pyscf_reference.json")) as fh:
        return json.load(fh)


def h2_field(bond=1.4):
    return NuclearField(np.array([[0.0, 0.0, -bond / 2], [0.0, 0.0, bond / 2]]), np.ones(2), ("H", "H"))


def h_chain(n, spacing=1.0):
    return NuclearField(np.array([[0.0, 0.0, spacing * i] for i in range(n)]), np.ones(n), ("H",) * n)


@pytest.fixture
def h2():
    return h2_field()


@pytest.fixture
def h2_sto3g(h2):
    return basis_from_shells(shells("sto-3g"), h2)


def random_mcgto_basis(seed=0):
    """Three normalized MCGTOs (s/p terms on distinct centers), one variable per slot."""
    from gbsopt.basis import BasisSet, CgtoSlots, make_cgto, make_mcgto
    from gbsopt.pgraph import Derived, ParamGraph, ParamNode, identity

    rng = np.random.default_rng(seed)
    thetas, derived, funcs = [], [], []

    def var(name, value, role):
        thetas.append(ParamNode(name, float(value), False, role))
        derived.append(Derived(name + ".p", identity(name), role))
        return name + ".p"

    for n in range(3):
        terms = []
        for t, ang in enumerate([(0, 0, 0), tuple(np.eye(3, dtype=int)[n % 3])]):
            R = rng.normal(scale=0.6, size=3)
            al = rng.uniform(0.3, 2.5, size=2)
            d = rng.uniform(0.3, 1.0, size=2)
            c = tuple(var(f"f{n}t{t}.{ax}", R[k], "center") for k, ax in enumerate("xyz"))
            a = tuple(var(f"f{n}t{t}.alpha{k}", al[k], "alpha") for k in range(2))
            dd = tuple(var(f"f{n}t{t}.d{k}", d[k], "d") for k in range(2))
            terms.append(make_cgto(R, al, d, ang, CgtoSlots(c, a, dd)))
        funcs.append(make_mcgto(terms, (1.0, float(rng.uniform(0.3, 0.9)))))
    return BasisSet(tuple(funcs), ParamGraph(tuple(thetas), tuple(derived)))


ACCEPTANCE = []


def record_criterion(number, title, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
