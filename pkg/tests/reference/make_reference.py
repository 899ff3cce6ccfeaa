"""Regenerate pyscf_reference.json (needs PySCF; not a package dependency).

Energies are electronic RHF energies (total minus nuclear repulsion) with
Cartesian basis functions, convergence 1e-12.
"""
import json
import os

from pyscf import gto, scf

HERE = os.path.dirname(os.path.abspath(__file__))


def electronic(atoms, basis, charge=0):
    mol = gto.M(atom=atoms, basis=basis, unit="Bohr", cart=True, charge=charge, verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    e = mf.kernel()
    assert mf.converged
    return e - mol.energy_nuc(), e


def main():
    out = {"h_chain_sto3g_spacing1": {}, "h2_1p4": {}}
    for n in range(2, 7):
        atoms = [["H", (0.0, 0.0, float(i))] for i in range(n)]
        charge = n % 2
        e_el, e_tot = electronic(atoms, "sto-3g", charge)
        out["h_chain_sto3g_spacing1"][f"H{n}"] = {"charge": charge, "E_elec": e_el, "E_total": e_tot}
    h2 = [["H", (0.0, 0.0, -0.7)], ["H", (0.0, 0.0, 0.7)]]
    for b in ("sto-3g", "6-31g", "cc-pvdz"):
        e_el, e_tot = electronic(h2, b)
        out["h2_1p4"][b] = {"E_elec": e_el, "E_total": e_tot}
    with open(os.path.join(HERE, "pyscf_reference.json"), "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
