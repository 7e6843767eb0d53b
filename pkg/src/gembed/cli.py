"""Command-line pipelines: embed, eval, project, stability.

Every run writes a config echo alongside its artifacts so that the same
seed reproduces the same bytes in single-threaded mode. Exit codes: 0 on
success, 1 on runtime/data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import evaluate, gauss, graph as graphlib, sgns, walks
from .graph import ParseError, ValidationError

POINT_METHODS = ("deepwalk", "node2vec", "line1", "line2")
GAUSSIAN_METHODS = ("g2g", "kg2e")


def _write_config(outdir: str, args: argparse.Namespace) -> None:
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    with open(os.path.join(outdir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_id_map(path: str, id_map: graphlib.IdMap) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ext, dense in id_map.items():
            fh.write(f"{ext}\t{dense}\n")


def _load_graph(args: argparse.Namespace) -> graphlib.Graph:
    g = graphlib.load_edge_list(args.edges, directed=args.directed,
                                weighted=args.weighted)
    if getattr(args, "attributes", None):
        g = graphlib.load_attributes(g, args.attributes)
    if getattr(args, "labels", None):
        g = graphlib.load_labels(g, args.labels)
    return g


def cmd_embed(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    _write_config(args.out, args)
    if args.method in ("deepwalk", "node2vec", "line1", "line2"):
        g = _load_graph(args)
        epochs = args.epochs if args.epochs is not None else 5
        lr = args.lr if args.lr is not None else 0.025
        config = sgns.SgnsConfig(dim=args.dim, epochs=epochs, lr=lr,
                                 negatives=args.k_negatives, seed=args.seed)
        if args.method in ("deepwalk", "node2vec"):
            p, q = (1.0, 1.0) if args.method == "deepwalk" else (args.p, args.q)
            table = walks.preprocess_transition_probs(g, p, q)
            wc = walks.WalkConfig(num_walks=args.num_walks,
                                  walk_length=args.walk_length,
                                  window=args.window, p=p, q=q, seed=args.seed)
            corpus = walks.simulate_walks(g, table, wc, threads=args.threads)
            if args.dump_walks:
                with open(os.path.join(args.out, "walks.txt"), "w") as fh:
                    walks.dump_walks(corpus, g, fh)
            emb = sgns.train_skipgram(corpus, config, node_count=g.node_count,
                                      threads=args.threads)
        else:
            order = 1 if args.method == "line1" else 2
            emb = sgns.train_line(g, order, config, threads=args.threads)
        with open(os.path.join(args.out, "embeddings.txt"), "w") as fh:
            sgns.save_point_embedding(emb, g, fh)
        _write_id_map(os.path.join(args.out, "id_map.tsv"), g.id_map)
    elif args.method == "g2g":
        g = _load_graph(args)
        epochs = args.epochs if args.epochs is not None else 200
        lr = args.lr if args.lr is not None else 1e-3
        hidden = tuple(int(h) for h in args.hidden.split(",") if h)
        config = gauss.G2GConfig(dim=args.dim, hidden=hidden, K=args.k_hops,
                                 epochs=epochs, lr=lr, seed=args.seed)
        result = gauss.train_g2g(g, config)
        ids = [g.external(v) for v in range(g.node_count)]
        with open(os.path.join(args.out, "gaussian_embeddings.txt"), "w") as fh:
            gauss.save_gaussian_embedding(result.embedding, ids, fh)
        with open(os.path.join(args.out, "variance.csv"), "w") as fh:
            gauss.save_variance_history(result.sigma_history, fh)
        _write_id_map(os.path.join(args.out, "id_map.tsv"), g.id_map)
    else:  # kg2e
        kt = graphlib.load_knowledge_triples(args.triples)
        epochs = args.epochs if args.epochs is not None else 200
        lr = args.lr if args.lr is not None else 0.02
        config = gauss.Kg2eConfig(dim=args.dim, gamma=args.gamma,
                                  energy=args.energy, mode=args.corruption,
                                  epochs=epochs, lr=lr, seed=args.seed)
        kg = gauss.train_kg2e(kt, config)
        ent_ids = [kt.entities.external(i) for i in range(len(kt.entities))]
        rel_ids = [kt.relations.external(i) for i in range(len(kt.relations))]
        with open(os.path.join(args.out, "entities.txt"), "w") as fh:
            gauss.save_gaussian_embedding(kg.entities, ent_ids, fh)
        with open(os.path.join(args.out, "relations.txt"), "w") as fh:
            gauss.save_gaussian_embedding(kg.relations, rel_ids, fh)
        _write_id_map(os.path.join(args.out, "entity_id_map.tsv"), kt.entities)
        _write_id_map(os.path.join(args.out, "relation_id_map.tsv"), kt.relations)
    return 0


def _read_label_map(path: str) -> dict[str, int]:
    out = {}
    for _, line in graphlib._iter_lines(path):
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(f"expected 'node label', got {line!r}")
        out[tokens[0]] = int(tokens[1])
    return out


def _pair_scores(ids: list[str], point: np.ndarray | None,
                 gaussian: gauss.GaussianEmbedding | None,
                 g: graphlib.Graph, pairs) -> list[float]:
    row = {ext: i for i, ext in enumerate(ids)}
    scores = []
    for u, v in pairs:
        try:
            i = row[str(g.external(u))]
            j = row[str(g.external(v))]
        except KeyError as e:
            raise ValidationError(f"embedding is missing node {e}") from None
        if gaussian is not None:
            scores.append(-gauss.kl_energy(gaussian.mu[i], gaussian.sigma[i],
                                           gaussian.mu[j], gaussian.sigma[j]))
        else:
            scores.append(float(point[i] @ point[j]))
    return scores


def cmd_eval(args: argparse.Namespace) -> int:
    if args.gaussian:
        ids, gemb = gauss.load_gaussian_embedding(args.embedding)
        features = gemb.mu
        point = None
    else:
        ids, point = sgns.load_point_embedding(args.embedding)
        gemb = None
        features = point
    if args.task == "linkpred":
        g = graphlib.load_edge_list(args.edges, directed=args.directed,
                                    weighted=args.weighted)
        split = graphlib.split_edges(g, args.p_val, args.p_test, args.seed)
        metrics = {}
        for name, edges, nonedges in (
                ("val", split.val_edges, split.val_nonedges),
                ("test", split.test_edges, split.test_nonedges)):
            if not edges:
                continue
            pairs = [(u, v) for u, v, _ in edges] + list(nonedges)
            labels = [1] * len(edges) + [0] * len(nonedges)
            scores = _pair_scores(ids, point, gemb, g, pairs)
            auc, ap = evaluate.link_prediction(labels, scores)
            metrics[f"{name}_auc"] = auc
            metrics[f"{name}_ap"] = ap
        if not metrics:
            raise ValidationError("split produced no evaluation edges")
        report = evaluate.MetricsReport("linkpred", metrics, [args.seed],
                                        {"p_val": args.p_val,
                                         "p_test": args.p_test,
                                         "embedding": args.embedding})
    elif args.task == "nodeclf":
        label_map = _read_label_map(args.labels)
        labels = [label_map.get(str(ext), -1) for ext in ids]
        micro, macro = evaluate.node_classification(
            features, labels, train_fraction=args.train_fraction,
            n_repeat=args.repeats, seed=args.seed, normalize=args.normalize)
        report = evaluate.MetricsReport(
            "nodeclf", {"f1_micro": micro, "f1_macro": macro}, [args.seed],
            {"repeats": args.repeats, "train_fraction": args.train_fraction,
             "embedding": args.embedding})
    else:  # cluster
        label_map = _read_label_map(args.labels)
        labels = np.array([label_map.get(str(ext), -1) for ext in ids])
        if np.any(labels < 0):
            raise ValidationError("every embedded node needs a label")
        k = args.k if args.k is not None else len(np.unique(labels))
        assign = evaluate.kmeans(features, k, seed=args.seed)
        nmi, acc = evaluate.nmi_and_accuracy(assign, labels)
        report = evaluate.MetricsReport(
            "cluster",
            {"silhouette": evaluate.silhouette(features, assign),
             "nmi": nmi, "accuracy": acc}, [args.seed],
            {"k": k, "embedding": args.embedding})
    report.save(args.out)
    return 0


def cmd_project(args: argparse.Namespace) -> int:
    if args.gaussian:
        ids, gemb = gauss.load_gaussian_embedding(args.embedding)
        coords = evaluate.pca_project(gemb.mu, 2)
        uncertainty = gemb.sigma.mean(axis=1)
    else:
        ids, vectors = sgns.load_point_embedding(args.embedding)
        coords = evaluate.pca_project(vectors, 2)
        uncertainty = None
    with open(args.out, "w", encoding="utf-8") as fh:
        if uncertainty is None:
            fh.write("id\tx\ty\n")
            for ext, (x, y) in zip(ids, coords):
                fh.write(f"{ext}\t{x:.17g}\t{y:.17g}\n")
        else:
            fh.write("id\tx\ty\tuncertainty\n")
            for ext, (x, y), u in zip(ids, coords, uncertainty):
                fh.write(f"{ext}\t{x:.17g}\t{y:.17g}\t{u:.17g}\n")
    return 0


def cmd_stability(args: argparse.Namespace) -> int:
    seq = graphlib.load_snapshots(args.snapshots, directed=args.directed,
                                  weighted=args.weighted)
    if len(args.embeddings) != len(seq.snapshots):
        raise ValidationError(
            f"{len(seq.snapshots)} snapshots but {len(args.embeddings)} embeddings")
    universe = seq.snapshots[0].id_map
    n = seq.snapshots[0].node_count
    embs, have = [], []
    dim = None
    for path in args.embeddings:
        ids, vectors = sgns.load_point_embedding(path)
        dim = vectors.shape[1] if dim is None else dim
        if vectors.shape[1] != dim:
            raise ValidationError("snapshot embeddings must share one dimension")
        mat = np.zeros((n, dim))
        present = np.zeros(n, dtype=bool)
        for ext, row in zip(ids, vectors):
            if ext in universe:
                i = universe.dense(ext)
                mat[i] = row
                present[i] = True
        embs.append(mat)
        have.append(present)
    node_sets = []
    for t, g in enumerate(seq.snapshots):
        nodes = sorted({u for u, v, _ in g.edges()} | {v for _, v, _ in g.edges()})
        node_sets.append(nodes)
        needs = have[t] if t == len(seq.snapshots) - 1 else have[t] & have[t + 1]
        missing = [v for v in nodes if not needs[v]]
        if missing and t < len(seq.snapshots) - 1:
            ext = universe.external(missing[0])
            raise ValidationError(
                f"embedding for snapshot {t} or {t + 1} is missing node {ext!r}")
    ks, s_r = evaluate.stability_constant(embs, list(seq.snapshots),
                                          node_sets=node_sets)
    metrics = {"stability_constant": ks}
    for t, v in enumerate(s_r):
        metrics[f"s_r_{t}"] = float(v)
    report = evaluate.MetricsReport("stability", metrics, [],
                                    {"snapshots": args.snapshots,
                                     "labels": list(seq.interval_labels)})
    report.save(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gembed",
        description="Graph embedding toolkit: walks, point and Gaussian "
                    "embeddings, and downstream evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_embed = sub.add_parser("embed", help="train an embedding and write artifacts")
    p_embed.add_argument("--method", required=True,
                         choices=POINT_METHODS + GAUSSIAN_METHODS)
    p_embed.add_argument("--edges", help="edge list file")
    p_embed.add_argument("--attributes", help="sparse attribute triples file")
    p_embed.add_argument("--labels", help="node label file")
    p_embed.add_argument("--triples", help="knowledge triples file (kg2e)")
    p_embed.add_argument("--directed", action="store_true")
    p_embed.add_argument("--weighted", action="store_true")
    p_embed.add_argument("-L", "--dim", type=int, default=128,
                         help="embedding size L (even for Gaussian methods)")
    p_embed.add_argument("--num-walks", type=int, default=10)
    p_embed.add_argument("--walk-length", type=int, default=80)
    p_embed.add_argument("--window", type=int, default=10)
    p_embed.add_argument("--p", type=float, default=1.0)
    p_embed.add_argument("--q", type=float, default=1.0)
    p_embed.add_argument("--k-negatives", type=int, default=5)
    p_embed.add_argument("--k-hops", type=int, default=2)
    p_embed.add_argument("--epochs", type=int, default=None)
    p_embed.add_argument("--lr", type=float, default=None)
    p_embed.add_argument("--gamma", type=float, default=1.0)
    p_embed.add_argument("--energy", choices=("kl", "el"), default="kl")
    p_embed.add_argument("--corruption", choices=("unif", "bern"), default="unif")
    p_embed.add_argument("--hidden", default="512",
                         help="comma-separated encoder hidden sizes (g2g)")
    p_embed.add_argument("--one-hot", action="store_true",
                         help="use identity rows when attributes are absent (g2g)")
    p_embed.add_argument("--dump-walks", action="store_true")
    p_embed.add_argument("--seed", type=int, default=0)
    p_embed.add_argument("--threads", type=int, default=1)
    p_embed.add_argument("--out", required=True, help="output directory")
    p_embed.set_defaults(func=cmd_embed)

    p_eval = sub.add_parser("eval", help="evaluate an embedding artifact")
    p_eval.add_argument("--task", required=True,
                        choices=("linkpred", "nodeclf", "cluster"))
    p_eval.add_argument("--embedding", required=True)
    p_eval.add_argument("--gaussian", action="store_true",
                        help="embedding file holds mu+sigma rows")
    p_eval.add_argument("--edges")
    p_eval.add_argument("--labels")
    p_eval.add_argument("--directed", action="store_true")
    p_eval.add_argument("--weighted", action="store_true")
    p_eval.add_argument("--p-val", type=float, default=0.10)
    p_eval.add_argument("--p-test", type=float, default=0.05)
    p_eval.add_argument("--repeats", type=int, default=10)
    p_eval.add_argument("--train-fraction", type=float, default=0.1)
    p_eval.add_argument("--no-normalize", dest="normalize", action="store_false")
    p_eval.add_argument("--k", type=int, default=None,
                        help="cluster count (default: number of classes)")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", required=True, help="metrics report file")
    p_eval.set_defaults(func=cmd_eval)

    p_proj = sub.add_parser("project", help="project an embedding to 2-D")
    p_proj.add_argument("--embedding", required=True)
    p_proj.add_argument("--gaussian", action="store_true")
    p_proj.add_argument("--out", required=True, help="coordinates TSV file")
    p_proj.set_defaults(func=cmd_project)

    p_stab = sub.add_parser("stability",
                            help="stability constant over snapshot embeddings")
    p_stab.add_argument("--snapshots", required=True,
                        help="directory of snapshot edge lists")
    p_stab.add_argument("--embeddings", required=True, nargs="+",
                        help="one point-embedding file per snapshot, in order")
    p_stab.add_argument("--directed", action="store_true")
    p_stab.add_argument("--weighted", action="store_true")
    p_stab.add_argument("--out", required=True, help="metrics report file")
    p_stab.set_defaults(func=cmd_stability)
    return parser


def _validate_usage(parser: argparse.ArgumentParser,
                    args: argparse.Namespace) -> None:
    if args.command == "embed":
        if args.method == "kg2e":
            if not args.triples:
                parser.error("--method kg2e requires --triples")
        elif not args.edges:
            parser.error(f"--method {args.method} requires --edges")
        if args.method in GAUSSIAN_METHODS and args.dim % 2 != 0:
            parser.error("Gaussian methods need an even embedding size L")
        if args.method == "g2g" and not args.attributes and not args.one_hot:
            parser.error("--method g2g requires --attributes or --one-hot")
    if args.command == "eval":
        if args.task == "linkpred" and not args.edges:
            parser.error("--task linkpred requires --edges")
        if args.task in ("nodeclf", "cluster") and not args.labels:
            parser.error(f"--task {args.task} requires --labels")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate_usage(parser, args)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
