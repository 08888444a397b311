#!/usr/bin/env python3
"""Convert public dataset releases into the canonical nlcs directory layout.

Every converter writes `edges.txt`, `labels.txt` and, where the release has
node attributes, `features.txt` (sparse `id dim:value` lines). LINQS
`.content`/`.cites` pairs are handled by `nlcs convert` instead.

    python scripts/convert.py planetoid --root raw/planetoid --name pubmed --out data/pubmed
    python scripts/convert.py facebook100 --mat raw/Rice31.mat --out data/rice31
    python scripts/convert.py arxiv --root raw/ogbn_arxiv --out data/arxiv

Needs numpy and scipy. Nothing is downloaded.
"""

import argparse
import gzip
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


def write_edges(out, adj):
    upper = sp.triu(adj, k=1).tocoo()
    with open(out / "edges.txt", "w") as f:
        for i, j, w in zip(upper.row, upper.col, upper.data):
            if w == 1:
                f.write(f"{i} {j}\n")
            else:
                f.write(f"{i} {j} {w:g}\n")
    return upper.nnz


def write_labels(out, labels):
    with open(out / "labels.txt", "w") as f:
        for i, y in enumerate(labels):
            f.write(f"{i} {y}\n")


def write_features(out, x):
    x = sp.csr_matrix(x)
    with open(out / "features.txt", "w") as f:
        for i in range(x.shape[0]):
            lo, hi = x.indptr[i], x.indptr[i + 1]
            cells = " ".join(f"{j}:{v:g}" for j, v in zip(x.indices[lo:hi], x.data[lo:hi]))
            f.write(f"{i} {cells}".rstrip() + "\n")


def dense_labels(raw):
    """Map arbitrary label values onto 0..c-1 in sorted order."""
    values, codes = np.unique(raw, return_inverse=True)
    return codes, values


def symmetric(adj):
    adj = sp.csr_matrix(adj, dtype=np.float64)
    adj = adj.maximum(adj.T)
    adj.setdiag(0)
    adj.eliminate_zeros()
    return adj


def planetoid(args):
    root, name = Path(args.root), args.name

    def load(part):
        with open(root / f"ind.{name}.{part}", "rb") as f:
            return pickle.load(f, encoding="latin1")

    x, y, tx, ty, allx, ally, graph = (load(p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(root / f"ind.{name}.test.index", dtype=np.int64)
    ordered = np.sort(test_idx)
    if name == "citeseer":
        # some test ids are isolated and missing from tx; pad them with zeros
        span = range(ordered.min(), ordered.max() + 1)
        tx_full = sp.lil_matrix((len(span), tx.shape[1]))
        tx_full[ordered - ordered.min(), :] = tx
        tx = tx_full
        ty_full = np.zeros((len(span), ty.shape[1]))
        ty_full[ordered - ordered.min(), :] = ty
        ty = ty_full

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[ordered, :]
    onehot = np.vstack((ally, ty))
    onehot[test_idx, :] = onehot[ordered, :]

    n = features.shape[0]
    rows, cols = [], []
    for i, nbrs in graph.items():
        for j in nbrs:
            if i < n and j < n:
                rows.append(i)
                cols.append(j)
    adj = symmetric(sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)))

    # padded citeseer rows carry no label; drop them
    keep = onehot.sum(axis=1) > 0
    return finish(args.out, adj, onehot.argmax(axis=1), features.tocsr(), keep)


def facebook100(args):
    mat = scipy.io.loadmat(args.mat)
    adj = symmetric(mat["A"])
    # local_info columns: status, gender, major, second major, dorm, year, high school
    dorm = np.asarray(mat["local_info"])[:, 4].astype(np.int64)
    keep = dorm != 0
    return finish(args.out, adj, dorm, None, keep, largest_component=True)


def arxiv(args):
    root = Path(args.root) / "raw"

    def csv(name, dtype):
        with gzip.open(root / f"{name}.csv.gz", "rt") as f:
            return np.loadtxt(f, delimiter=",", dtype=dtype, ndmin=2)

    edges = csv("edge", np.int64)
    features = csv("node-feat", np.float64)
    labels = csv("node-label", np.int64)[:, 0]
    n = features.shape[0]
    adj = symmetric(sp.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)))
    return finish(args.out, adj, labels, features, np.ones(n, dtype=bool))


def finish(out, adj, raw_labels, features, keep, largest_component=False):
    keep = np.asarray(keep, dtype=bool)
    if largest_component:
        _, comp = connected_components(adj, directed=False)
        sizes = np.bincount(comp)
        keep &= comp == sizes.argmax()
    idx = np.flatnonzero(keep)
    adj = adj[idx][:, idx]
    labels, values = dense_labels(np.asarray(raw_labels)[idx])

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    m = write_edges(out, adj)
    write_labels(out, labels)
    if features is not None:
        write_features(out, sp.csr_matrix(features)[idx])
    with open(out / "classes.txt", "w") as f:
        for c, v in enumerate(values):
            f.write(f"{c} {v}\n")
    print(f"{out}: {len(idx)} nodes, {m} edges, {len(values)} classes", file=sys.stderr)
    return 0


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="format", required=True)

    q = sub.add_parser("planetoid", help="Kipf & Welling ind.<name>.* pickles (cora, citeseer, pubmed)")
    q.add_argument("--root", required=True)
    q.add_argument("--name", required=True, choices=["cora", "citeseer", "pubmed"])
    q.add_argument("--out", required=True)
    q.set_defaults(run=planetoid)

    q = sub.add_parser("facebook100", help="Facebook100 .mat file, labelled by dorm")
    q.add_argument("--mat", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(run=facebook100)

    q = sub.add_parser("arxiv", help="ogbn-arxiv raw CSV release")
    q.add_argument("--root", required=True, help="directory containing raw/")
    q.add_argument("--out", required=True)
    q.set_defaults(run=arxiv)

    args = p.parse_args()
    return args.run(args)


if __name__ == "__main__":
    sys.exit(main())
