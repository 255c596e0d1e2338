#!/usr/bin/env python3
"""Writes the synthetic demo corpus under data/demo/.

Deterministic: the same seed always produces byte-identical files.
"""

import argparse
import json
import random
from pathlib import Path

PERIODS = [("2006-2008", 2006, 2008), ("2012-2014", 2012, 2014), ("2019-2021", 2019, 2021)]
CLUSTERS = [(1, "Core", 12), (2, "Finance", 11), (3, "Development", 10), (4, "Labor", 10), (5, "History", 5)]
# Per-cluster pull toward its own journals, rising over time.
WITHIN = {1: 0.30, 2: 0.45, 3: 0.35, 4: 0.40, 5: 0.25}
DRIFT = [0.0, 0.05, 0.10]


def build(seed):
    rng = random.Random(seed)
    journals = []
    n = 0
    for cid, _, size in CLUSTERS:
        for _ in range(size):
            n += 1
            journals.append({"id": f"S{n:03d}", "name": f"Journal {n}", "cluster": cid})
    for _ in range(2):
        n += 1
        journals.append({"id": f"S{n:03d}", "name": f"Journal {n}", "cluster": None})
    for i, j in enumerate(journals):
        j["econlit"] = 0 if i % 17 == 16 else 1
        j["truc"] = 1 if j["econlit"] and rng.random() < 0.6 else 0
        j["openalex_econ"] = 1
    external = [f"X{i:02d}" for i in range(8)]
    econ_external = external[:5]

    # Cited-only items outside the registry.
    metadata = []
    outside = []
    kinds = ["book"] * 6 + ["conference"] * 1 + ["repository"] * 3 + ["journal"] * 12
    for i in range(600):
        kind = rng.choice(kinds)
        item = {"id": f"https://openalex.org/M{i:04d}", "publication_year": rng.randint(1980, 2020)}
        if kind == "journal":
            item["journal_id"] = rng.choice(external)
            item["type"] = "journal"
        else:
            item["type"] = kind
        metadata.append(item)
        outside.append(item["id"])

    works = []
    by_journal = {j["id"]: [] for j in journals}
    by_cluster = {cid: [] for cid, _, _ in CLUSTERS}
    wid = 0
    for p, (_, start, end) in enumerate(PERIODS):
        for year in range(start, end + 1):
            for j in journals:
                for _ in range(rng.randint(2, 4)):
                    wid += 1
                    w = {"id": f"https://openalex.org/W{wid:05d}", "journal_id": j["id"], "publication_year": year,
                         "type": "journal", "referenced_works": []}
                    refs = []
                    cluster = j["cluster"]
                    pull = WITHIN.get(cluster, 0.1) + DRIFT[p]
                    for _ in range(rng.randint(8, 20)):
                        r = rng.random()
                        pool = None
                        if r < 0.08 and by_journal[j["id"]]:
                            pool = by_journal[j["id"]]
                        elif r < 0.08 + pull and cluster and by_cluster[cluster]:
                            pool = by_cluster[cluster]
                        elif r < 0.75 and wid > 1:
                            pool = [x["id"] for x in works[-400:]]
                        if pool:
                            refs.append(rng.choice(pool))
                        elif rng.random() < 0.9:
                            refs.append(rng.choice(outside))
                        else:
                            refs.append(f"https://openalex.org/U{rng.randint(0, 99):03d}")
                    w["referenced_works"] = refs
                    works.append(w)
                    by_journal[j["id"]].append(w["id"])
                    if cluster:
                        by_cluster[cluster].append(w["id"])
    # A few works outside every window, and one without a year.
    for k in range(5):
        wid += 1
        works.append({"id": f"https://openalex.org/W{wid:05d}", "journal_id": journals[k]["id"],
                      "publication_year": 2010, "type": "journal", "referenced_works": [outside[k]]})
    wid += 1
    works.append({"id": f"https://openalex.org/W{wid:05d}", "journal_id": journals[0]["id"], "type": "journal",
                  "referenced_works": []})
    return journals, econ_external, works, metadata


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20240501)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "demo"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    journals, econ_external, works, metadata = build(args.seed)

    with open(out / "registry.csv", "w", newline="\n") as f:
        f.write("journal_id,name,cluster_id,econlit,truc,openalex_econ\n")
        for j in journals:
            cl = "" if j["cluster"] is None else str(j["cluster"])
            f.write(f"{j['id']},{j['name']},{cl},{j['econlit']},{j['truc']},{j['openalex_econ']}\n")
    with open(out / "clusters.csv", "w", newline="\n") as f:
        f.write("cluster_id,label\n")
        for cid, label, _ in CLUSTERS:
            f.write(f"{cid},{label}\n")
    with open(out / "periods.csv", "w", newline="\n") as f:
        f.write("period_id,year_start,year_end\n")
        for pid, a, b in PERIODS:
            f.write(f"{pid},{a},{b}\n")
    with open(out / "openalex_econ.txt", "w", newline="\n") as f:
        f.write("# economics journals outside the registry\n")
        for x in econ_external:
            f.write(x + "\n")
    with open(out / "works.jsonl", "w", newline="\n") as f:
        for w in works:
            f.write(json.dumps(w, separators=(",", ":")) + "\n")
    with open(out / "metadata.jsonl", "w", newline="\n") as f:
        for m in metadata:
            f.write(json.dumps(m, separators=(",", ":")) + "\n")
    config = {
        "registry": "registry.csv",
        "clusters": "clusters.csv",
        "periods": "periods.csv",
        "works": ["works.jsonl"],
        "metadata": ["metadata.jsonl"],
        "scheme_lists": {"openalex_econ": "openalex_econ.txt"},
        "schemes": ["econlit", "truc", "openalex_econ"],
        "scheme": "econlit",
        "stages": ["ingest", "cube", "indicators", "asymmetry", "tests", "robustness", "report"],
        "out": "out",
        "seed": 42,
        "threads": 1,
        "permutations": 9999,
        "min_cluster_size": 10,
    }
    with open(out / "config.json", "w", newline="\n") as f:
        f.write(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
