#!/usr/bin/env python3
"""Convert the public Cora / Citeseer / Words releases into the TSV formats read by `sbsn`.

Usage:
    prepare_datasets.py --cora DIR --citeseer DIR [--words adjnoun.gml] --out data/

--cora      directory holding the LINQS release (cora.cites, cora.content)
--citeseer  directory holding the Planetoid release (ind.citeseer.*)
--words     Newman's adjnoun.gml (node `value` 0 = adjective, 1 = noun)

Output per dataset: <name>.edges ("src<TAB>dst") and <name>.labels ("node<TAB>class").
"""
import argparse
import os
import pickle
import re
import sys

import numpy as np


def cora(src, out):
    # cora.cites rows are "<cited> <citing>"; the interaction is citing -> cited.
    with open(os.path.join(src, "cora.cites")) as f, open(os.path.join(out, "cora.edges"), "w") as g:
        g.write("# Cora citation network (LINQS release), citing -> cited\n")
        for line in f:
            cited, citing = line.split()
            g.write(f"{citing}\t{cited}\n")
    with open(os.path.join(src, "cora.content")) as f, open(os.path.join(out, "cora.labels"), "w") as g:
        for line in f:
            parts = line.split()
            g.write(f"{parts[0]}\t{parts[-1]}\n")


def _load(src, name):
    with open(os.path.join(src, f"ind.citeseer.{name}"), "rb") as f:
        return pickle.load(f, encoding="latin1")


def citeseer(src, out):
    ally, ty, graph = _load(src, "ally"), _load(src, "ty"), _load(src, "graph")
    test_index = [int(l) for l in open(os.path.join(src, "ind.citeseer.test.index"))]
    labels = {}
    for i, row in enumerate(np.asarray(ally)):
        labels[i] = int(np.argmax(row))
    for i, row in zip(test_index, np.asarray(ty)):
        if row.sum() > 0:
            labels[i] = int(np.argmax(row))
    # The Planetoid adjacency is symmetric, so each citation is written once (lower id first).
    pairs = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            pairs.add((min(u, v), max(u, v)))
    with open(os.path.join(out, "citeseer.edges"), "w") as g:
        g.write("# Citeseer citation network (Planetoid release); direction not preserved upstream\n")
        for u, v in sorted(pairs):
            g.write(f"n{u}\tn{v}\n")
    names = ["AI", "ML", "IR", "DB", "Agents", "HCI"]
    touched = {u for p in pairs for u in p}
    with open(os.path.join(out, "citeseer.labels"), "w") as g:
        for node in sorted(labels):
            if node in touched:
                g.write(f"n{node}\t{names[labels[node]]}\n")


def words(gml, out):
    text = open(gml).read()
    nodes = {}
    for block in re.findall(r"node\s*\[(.*?)\]", text, re.S):
        nid = re.search(r"id\s+(\d+)", block).group(1)
        label = re.search(r'label\s+"([^"]+)"', block).group(1)
        value = re.search(r"value\s+(\d+)", block).group(1)
        nodes[nid] = (label, "noun" if value == "1" else "adjective")
    with open(os.path.join(out, "words.edges"), "w") as g:
        g.write("# Adjective/noun adjacency network from David Copperfield\n")
        for block in re.findall(r"edge\s*\[(.*?)\]", text, re.S):
            s = re.search(r"source\s+(\d+)", block).group(1)
            t = re.search(r"target\s+(\d+)", block).group(1)
            g.write(f"{nodes[s][0]}\t{nodes[t][0]}\n")
    with open(os.path.join(out, "words.labels"), "w") as g:
        for label, cls in nodes.values():
            g.write(f"{label}\t{cls}\n")


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--cora")
    p.add_argument("--citeseer")
    p.add_argument("--words")
    p.add_argument("--out", required=True)
    a = p.parse_args()
    os.makedirs(a.out, exist_ok=True)
    if a.cora:
        cora(a.cora, a.out)
    if a.citeseer:
        citeseer(a.citeseer, a.out)
    if a.words:
        words(a.words, a.out)
    if not (a.cora or a.citeseer or a.words):
        sys.exit("nothing to do")


if __name__ == "__main__":
    main()
