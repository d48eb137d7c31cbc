#!/usr/bin/env python3
"""Writes the example HLA tables shipped in data/.

The tables are invented: allele families use real HLA naming, but the allele
frequencies, the eplet names and the allele -> eplet assignments are random
(seeded), shaped only so that typical scores sit in a plausible range.

    python3 tools/make_synthetic_tables.py [--out data] [--seed 20240611]
"""
import argparse
import csv
import json
import os
import random

FAMILIES = {
    "A": ["01", "02", "03", "11", "23", "24", "25", "26", "29", "30", "31", "32", "33",
          "34", "66", "68", "69", "74", "80"],
    "B": ["07", "08", "13", "14", "15", "18", "27", "35", "37", "38", "39", "40", "41",
          "42", "44", "45", "46", "47", "49", "50", "51", "52", "53", "54", "55", "56",
          "57", "58", "67", "73", "78", "81", "82"],
    "C": ["01", "02", "03", "04", "05", "06", "07", "08", "12", "14", "15", "16", "17", "18"],
    "DR": ["01", "03", "04", "07", "08", "09", "10", "11", "12", "13", "14", "15", "16"],
    "DQ": ["02", "03", "04", "05", "06"],
}

# Alleles whose serological antigen differs from the first field.
SPLITS = {
    ("B", "15", "01"): "B62", ("B", "15", "07"): "B62", ("B", "15", "16"): "B63",
    ("B", "15", "10"): "B71", ("B", "15", "03"): "B72", ("B", "15", "02"): "B75",
    ("B", "40", "01"): "B60", ("B", "40", "02"): "B61",
    ("DR", "03", "01"): "DR17", ("DR", "03", "02"): "DR18",
    ("DQ", "03", "01"): "DQ07", ("DQ", "03", "02"): "DQ08", ("DQ", "03", "03"): "DQ09",
}

GROUP = {"A": "I", "B": "I", "C": "I", "DR": "DR", "DQ": "DQ"}
# group -> (pool size, core eplets per family, extra eplets per subtype)
EPLET_SHAPE = {"I": (180, (10, 14), (2, 4)), "DR": (80, (9, 12), (1, 3)), "DQ": (60, (8, 10), (1, 3))}

ETHNICITIES = [
    # label, probability, distinctness, flatness, blood O/A/B/AB
    ("Caucasian", 0.600, 0.10, 0.00, [0.45, 0.40, 0.11, 0.04]),
    ("Afroamerican", 0.170, 0.55, 0.30, [0.51, 0.26, 0.19, 0.04]),
    ("Latin", 0.150, 0.40, 0.10, [0.57, 0.31, 0.10, 0.02]),
    ("Asian", 0.056, 0.80, 0.05, [0.40, 0.28, 0.25, 0.07]),
    ("AmericanIndian", 0.008, 0.60, 0.10, [0.55, 0.35, 0.08, 0.02]),
    ("PacificIslander", 0.016, 0.70, 0.10, [0.46, 0.31, 0.17, 0.06]),
]


def eplet_names(rng, taken, count, prefix=""):
    letters = "ACDEFGHIKLMNPQRSTVWY"
    out = []
    while len(out) < count:
        name = f"{prefix}{rng.randint(1, 199)}{''.join(rng.choice(letters) for _ in range(rng.randint(1, 3)))}"
        if name not in taken:
            taken.add(name)
            out.append(name)
    return out


def normalized(weights):
    total = sum(weights.values())
    items = sorted(weights.items())
    probs = {k: round(v / total, 12) for k, v in items}
    last = items[-1][0]
    probs[last] = round(1.0 - sum(v for k, v in probs.items() if k != last), 12)
    return probs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    os.makedirs(args.out, exist_ok=True)

    alleles = {}  # locus -> list of (field, subtype)
    for locus, fields in FAMILIES.items():
        alleles[locus] = []
        for field in fields:
            subs = ["01"] + sorted(rng.sample(["02", "03", "04", "05", "06", "07", "10", "16"],
                                              rng.randint(0, 3)))
            for key, _ in SPLITS.items():
                if key[0] == locus and key[1] == field and key[2] not in subs:
                    subs.append(key[2])
            alleles[locus] += [(field, s) for s in sorted(subs)]

    with open(os.path.join(args.out, "antigen_map.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["locus", "family", "subtype", "antigen_family"])
        for locus, items in alleles.items():
            for field, sub in items:
                w.writerow([locus, f"{locus}{field}", f"{field}:{sub}",
                            SPLITS.get((locus, field, sub), f"{locus}{field}")])

    taken = set()
    pools = {g: eplet_names(rng, taken, size, "" if g == "I" else g[0].lower())
             for g, (size, _, _) in EPLET_SHAPE.items()}
    with open(os.path.join(args.out, "eplet_registry.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["locus", "family", "subtype", "eplet_id", "class_group"])
        for locus, items in alleles.items():
            group = GROUP[locus]
            _, core_range, extra_range = EPLET_SHAPE[group]
            pool = pools[group]
            core = {}
            for field, sub in items:
                if field not in core:
                    core[field] = rng.sample(pool, rng.randint(*core_range))
                extra = [e for e in rng.sample(pool, rng.randint(*extra_range)) if e not in core[field]]
                for e in sorted(set(core[field]) | set(extra)):
                    w.writerow([locus, f"{locus}{field}", f"{field}:{sub}", e, group])

    base = {locus: {f"{locus}*{field}:{sub}": rng.paretovariate(1.2) for field, sub in items}
            for locus, items in alleles.items()}
    ethnicities = []
    for label, prob, distinct, flat, blood in ETHNICITIES:
        tables = {}
        for locus in FAMILIES:
            own = {name: rng.paretovariate(1.2) for name in base[locus]}
            weights = {name: (base[locus][name] ** (1 - distinct) * own[name] ** distinct) ** (1 - flat)
                       for name in base[locus]}
            tables[locus] = normalized(weights)
        ethnicities.append({
            "label": label,
            "probability": prob,
            "blood_types": dict(zip(["O", "A", "B", "AB"], blood)),
            "alleles": tables,
        })

    spec = {
        "target_pair_count": 990,
        "recipient_count": 1332,
        "donor_count": 1401,
        "loci": "full",
        "seed": 1,
        "dsa_rate": 0.05,
        "dsa_candidates": 20,
        "dsa_antigen_level_fraction": 0.5,
        "blood_types": {"O": 0.44, "A": 0.42, "B": 0.10, "AB": 0.04},
        "ethnicities": ethnicities,
    }
    with open(os.path.join(args.out, "population.json"), "w") as f:
        json.dump(spec, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
