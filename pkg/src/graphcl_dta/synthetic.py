"""Davis-shaped synthetic datasets for fixtures and demos.

Drugs are real drug-like SMILES; proteins are random sequences; affinities are
pKd-like values in [5, 10.8] produced by a hidden bilinear score, with a large
mass at the 5.0 floor as in Davis.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from .protein import AMINO_ACIDS
from .smiles import NUM_ATOM_FEATURES, parse_smiles

DRUG_SMILES = [
    "Cc1ccc(NC(=O)c2ccc(CN3CCN(C)CC3)cc2)cc1Nc1nccc(-c2cccnc2)n1",
    "COc1cc2ncnc(Nc3ccc(F)c(Cl)c3)c2cc1OCCCN1CCOCC1",
    "COCCOc1cc2ncnc(Nc3cccc(C#C)c3)c2cc1OCCOC",
    "CNC(=O)c1cc(Oc2ccc(NC(=O)Nc3ccc(Cl)c(C(F)(F)F)c3)cc2)ccn1",
    "CCN(CC)CCNC(=O)c1c(C)[nH]c(C=C2C(=O)Nc3ccc(F)cc32)c1C",
    "Cc1nc(Nc2ncc(C(=O)Nc3c(C)cccc3Cl)s2)cc(N2CCN(CCO)CC2)n1",
    "CS(=O)(=O)CCNCc1ccc(-c2ccc3ncnc(Nc4ccc(OCc5cccc(F)c5)c(Cl)c4)c3c2)o1",
    "Cc1cn(-c2cc(NC(=O)c3ccc(C)c(Nc4nccc(-c5cccnc5)n4)c3)cc(C(F)(F)F)c2)cn1",
    "CN1CCN(Cc2ccc(C(=O)Nc3ccc(C)c(C#Cc4cnc5cccnn45)c3)cc2C(F)(F)F)CC1",
    "Nc1ncnc2c1c(-c1ccc(Oc3ccccc3)cc1)nn2C1CCCN(C(=O)C=C)C1",
    "CC(C)n1nc(-c2ccc(N)cc2)c2c(N)ncnc21",
    "O=C(Nc1ccc(Cl)cc1)c1ccccc1Nc1ccncc1",
    "Cc1ccc(F)c(NC(=O)Nc2ccc(-c3cccc4[nH]nc(N)c34)cc2)c1",
    "CC1=C(C(=O)Nc2ccccc2)C(c2ccccc2)C(C(=O)OC)=C(C)N1",
    "OC(=O)CCCc1ccc(N(CCCl)CCCl)cc1",
    "CN(C)CC=CC(=O)Nc1cc2c(Nc3ccc(F)c(Cl)c3)ncnc2cc1OC1CCOC1",
    "O=c1[nH]c(=O)c2[nH]cnc2[nH]1",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "CC(=O)Nc1ccc(O)cc1",
    "CC(C)Cc1ccc(C(C)C(=O)O)cc1",
    "OCC1OC(O)C(O)C(O)C1O",
    "CC(=O)Oc1ccccc1C(=O)O",
    "O=[N+]([O-])c1ccccc1",
    "OB(O)c1ccccc1",
    "c1ccc2[nH]ccc2c1",
    "CC(C)(C)OC(=O)N1CCC(CC1)C(=O)O",
    "O=C(O)c1ccccc1O",
    "Clc1ccc(cc1)C(c1ccc(Cl)cc1)C(Cl)(Cl)Cl",
    "c1ccc(cc1)-c1ccccc1",
    "CS(=O)(=O)Nc1ccc(cc1)C(=O)c1ccccc1",
    "Cc1ccc(cc1)S(=O)(=O)N",
    "COc1ccc(cc1)C(=O)Nc1ccccn1",
    "Nc1nc(N)c2nc(-c3ccccc3)c(N)nc2n1",
    "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "OC(=O)c1cccnc1",
    "Cc1onc(-c2ccccc2)c1C(=O)N",
    "FC(F)(F)c1ccc(Oc2ccc(cc2)C#N)cc1",
    "O=C1NC(=O)C(N1)(c1ccccc1)c1ccccc1",
    "CC(=O)N1CCN(CC1)c1ccc(OCC2COC(Cn3ccnc3)(O2)c2ccc(Cl)cc2Cl)cc1",
    "Cc1c(Nc2ncnc3ccc(cc23)N)cccc1",
    "COc1cc(cc(OC)c1OC)C(=O)NCCN1CCOCC1",
    "Oc1ccc(cc1)-c1nc2ccccc2s1",
    "Nc1ccc(cc1)S(=O)(=O)c1ccc(N)cc1",
    "CCOC(=O)c1c[nH]c2ccc(O)cc12",
    "O=C(Nc1cccc(c1)C#C)c1ccc(F)cc1",
    "Cn1c(=O)c2c(ncn2C)n(C)c1=O",
    "CC(C)NCC(O)COc1cccc2ccccc12",
    "N#Cc1ccc(cc1)C(O)(c1ccc(F)cc1)CCN",
]

_AA_FREQ = np.array([8.3, 0.1, 1.4, 5.5, 6.8, 3.9, 7.1, 2.3, 5.9, 5.8, 9.7, 2.4, 4.1, 0.1, 4.7, 3.9, 5.3,
                     6.6, 5.3, 0.1, 6.9, 1.1, 0.1, 2.9, 0.1])


def random_protein(rng: np.random.Generator, length: int) -> str:
    p = _AA_FREQ / _AA_FREQ.sum()
    return "".join(rng.choice(list(AMINO_ACIDS), size=length, p=p))


def davis_like(n_drugs: int, n_targets: int, seed: int = 0, min_len: int = 200, max_len: int = 900,
               n_samples: int | None = None):
    """Return (drugs, targets, affinities) row lists for a synthetic dataset."""
    if n_drugs > len(DRUG_SMILES):
        raise ValueError(f"at most {len(DRUG_SMILES)} distinct drugs available")
    rng = np.random.default_rng(seed)
    drug_rows = [(f"D{i:03d}", DRUG_SMILES[i]) for i in range(n_drugs)]
    target_rows = [(f"T{j:03d}", random_protein(rng, int(rng.integers(min_len, max_len + 1))))
                   for j in range(n_targets)]

    drug_feat = np.stack([parse_smiles(s).atom_features.mean(axis=0) for _, s in drug_rows])
    comp = np.stack([[seq.count(a) / len(seq) for a in AMINO_ACIDS] for _, seq in target_rows])
    comp = (comp - comp.mean(axis=0)) / (comp.std(axis=0) + 1e-9)
    drug_feat = (drug_feat - drug_feat.mean(axis=0)) / (drug_feat.std(axis=0) + 1e-9)
    latent = 6
    u = drug_feat @ rng.standard_normal((NUM_ATOM_FEATURES, latent)) / np.sqrt(NUM_ATOM_FEATURES)
    v = comp @ rng.standard_normal((len(AMINO_ACIDS), latent)) / np.sqrt(len(AMINO_ACIDS))
    score = u @ v.T + 0.6 * u[:, :1] + 0.4 * v[:, :1].T
    score = (score - score.mean()) / score.std()
    pkd = np.clip(5.0 + 1.6 * (score + 0.3), 5.0, 10.8)

    pairs = [(i, j) for i in range(n_drugs) for j in range(n_targets)]
    if n_samples is not None and n_samples < len(pairs):
        keep = np.sort(rng.choice(len(pairs), size=n_samples, replace=False))
        pairs = [pairs[k] for k in keep]
    aff_rows = [(drug_rows[i][0], target_rows[j][0], round(float(pkd[i, j]), 4)) for i, j in pairs]
    return drug_rows, target_rows, aff_rows


def write_dataset(out_dir, drugs, targets, affinities) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"drugs": out / "drugs.tsv", "targets": out / "targets.tsv", "affinities": out / "affinities.tsv"}
    for key, header, rows in (("drugs", ["drug_id", "smiles"], drugs),
                              ("targets", ["target_id", "sequence"], targets),
                              ("affinities", ["drug_id", "target_id", "affinity"], affinities)):
        with open(paths[key], "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    return paths


def main(argv=None):
    ap = argparse.ArgumentParser(description="write a synthetic Davis-shaped dataset")
    ap.add_argument("out_dir")
    ap.add_argument("--drugs", type=int, default=8)
    ap.add_argument("--targets", type=int, default=8)
    ap.add_argument("--samples", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--min-len", type=int, default=200)
    ap.add_argument("--max-len", type=int, default=900)
    args = ap.parse_args(argv)
    rows = davis_like(args.drugs, args.targets, args.seed, args.min_len, args.max_len, args.samples)
    for k, p in write_dataset(args.out_dir, *rows).items():
        print(f"{k}\t{p}")


if __name__ == "__main__":
    main()
