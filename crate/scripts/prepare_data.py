"""Build the bundled data files under data/.

Inputs (not shipped; fetch the packages from PyPI and extract them):
  ESOL.csv, FreeSolv.csv, Lipophilicity.csv  from gauche 0.1.6 (gauche/datasets/property_prediction/)
  train.csv.gz                                from molsets 0.3.1 (moses/dataset/data/)

Outputs:
  data/esol.csv              MoleculeNet ESOL (Delaney), unchanged
  data/pretrain.smi          60,000 SMILES sampled from the MOSES training split
  data/memorize100.smi       100 SMILES from MOSES disjoint from pretrain.smi
  data/parser_corpus.smi     single-fragment SMILES from ESOL, FreeSolv and Lipophilicity
  data/parser_reference.tsv  RDKit-computed graph facts for parser_corpus.smi

RDKit is only used here, to produce reference facts that the Rust tests
compare against. The Rust code does not depend on it.
"""

import csv
import gzip
import random
import shutil
import sys
from pathlib import Path

from rdkit import Chem, RDLogger

RDLogger.DisableLog("rdApp.*")

src = Path(sys.argv[1] if len(sys.argv) > 1 else "/tmp/dl")
out = Path(__file__).resolve().parent.parent / "data"
out.mkdir(exist_ok=True)

shutil.copy(src / "ESOL.csv", out / "esol.csv")

with gzip.open(src / "moses_train.csv.gz", "rt") as fh:
    moses = [line.strip() for line in fh][1:]
rng = random.Random(20191019)
picked = rng.sample(range(len(moses)), 60_100)
with open(out / "pretrain.smi", "w") as fh:
    for i in picked[:60_000]:
        fh.write(moses[i] + "\n")
with open(out / "memorize100.smi", "w") as fh:
    for i in picked[60_000:]:
        fh.write(moses[i] + "\n")


def column(path, name):
    with open(path) as fh:
        return [row[name] for row in csv.DictReader(fh)]


pool = column(src / "ESOL.csv", "smiles") + column(src / "FreeSolv.csv", "smiles")
pool += column(src / "Lipophilicity.csv", "smiles")[:800]

seen = set()
corpus = []
for s in (p.strip() for p in pool):
    if "." in s or "[H]" in s or "[2H]" in s or "*" in s or s in seen:
        continue
    raw = Chem.MolFromSmiles(s, sanitize=False)
    params = Chem.SmilesParserParams()
    params.removeHs = False
    full = Chem.MolFromSmiles(s, params)
    if raw is None or full is None:
        continue
    seen.add(s)
    corpus.append((s, raw, full))

with open(out / "parser_corpus.smi", "w") as fh, open(out / "parser_reference.tsv", "w") as ref:
    ref.write("smiles\tatoms\tbonds\taromatic_atoms\tcharge_sum\ttotal_h\telements\n")
    for s, raw, full in corpus:
        fh.write(s + "\n")
        elements = ",".join(sorted(a.GetSymbol() for a in raw.GetAtoms()))
        ref.write(
            "\t".join(
                str(v)
                for v in (
                    s,
                    raw.GetNumAtoms(),
                    raw.GetNumBonds(),
                    sum(a.GetIsAromatic() for a in raw.GetAtoms()),
                    sum(a.GetFormalCharge() for a in raw.GetAtoms()),
                    sum(a.GetTotalNumHs() for a in full.GetAtoms()),
                    elements,
                )
            )
            + "\n"
        )

print(f"pretrain 60000, memorize 100, parser corpus {len(corpus)}")
