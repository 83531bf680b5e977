"""Command-line pipeline: gen-data, train-base, train-agent, encode,
search, eval.

Exit codes: 0 success, 2 configuration error (bad keys/values/paths,
dimension conflicts), 3 file format error (missing file, bad magic or
version, truncation), 4 numeric failure (non-finite objective, reward or
activation).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from mch import formats
from mch.agent import train_agent
from mch.basemodel import NumericFailure, train_base
from mch.config import ConfigError, PipelineConfig, load_config
from mch.datagen import SynthConfig, composite_demo_scenario, generate
from mch.encoder import encode_corpus
from mch.formats import FormatError
from mch.hamming import HashCode
from mch.index import bucket_search
from mch.loss import SimilarityLabels
from mch.metrics import build_report


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY=VALUE", help="override one configuration key",
    )


def _config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config, args.overrides)
    cfg.log()
    return cfg


def _split_dataset(cfg: PipelineConfig):
    """One generation pass, deterministically shuffled into train/query."""
    total = SynthConfig(
        n=cfg.n + cfg.n_queries,
        categories=cfg.categories,
        dim=cfg.dim,
        composite_fraction=cfg.composite_fraction,
        noise_sigma=cfg.noise_sigma,
        regions_per_item=cfg.regions_per_item,
        seed=cfg.data_seed,
    )
    ds = generate(total)
    perm = np.random.default_rng(total.seed + 1).permutation(ds.n)
    train, query = perm[: cfg.n], perm[cfg.n :]
    return ds, train, query


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if args.preset == "demo":
        for key, value in (
            ("n", 60), ("n_queries", 12), ("categories", 2), ("dim", 16),
            ("q", 3), ("composite_fraction", 0.25),
        ):
            setattr(cfg, key, value)
    ds, train, query = _split_dataset(cfg)
    prefix = args.out_prefix
    formats.write_features(f"{prefix}-train.mchf", ds.features[train])
    formats.write_regions(
        f"{prefix}-train.mchr", [ds.region_features[i] for i in train]
    )
    formats.write_labels(f"{prefix}-train.mchl", ds.labels[train])
    formats.write_features(f"{prefix}-query.mchf", ds.features[query])
    formats.write_regions(
        f"{prefix}-query.mchr", [ds.region_features[i] for i in query]
    )
    formats.write_labels(f"{prefix}-query.mchl", ds.labels[query])
    written = [
        f"{prefix}-{part}.{ext}"
        for part in ("train", "query")
        for ext in ("mchf", "mchr", "mchl")
    ]
    if args.preset == "demo":
        scenario = composite_demo_scenario()
        formats.write_index(f"{prefix}-demo.mchi", scenario.build_index())
        written.append(f"{prefix}-demo.mchi")
    for path in written:
        print(path)
    return 0


def cmd_train_base(args: argparse.Namespace) -> int:
    cfg = _config(args)
    feats = formats.read_features(args.features)
    labels = SimilarityLabels(formats.read_labels(args.labels))
    model = train_base(
        feats, labels, cfg.loss_spec(), cfg.base_train_config(),
        mode=cfg.base_mode(),
    )
    formats.write_model(args.out, model)
    trace = model.objective_trace
    if trace:
        print(
            f"objective: first epoch {trace[0]:.6g}, last epoch {trace[-1]:.6g}",
            file=sys.stderr,
        )
    print(args.out)
    return 0


def cmd_train_agent(args: argparse.Namespace) -> int:
    cfg = _config(args)
    feats = formats.read_features(args.features)
    regions, _ = formats.read_regions(args.regions)
    labels = SimilarityLabels(formats.read_labels(args.labels))
    base = formats.read_model(args.model)
    net = train_agent(
        feats, regions, labels, base, cfg.agent_train_config(),
        cfg.reward_config(), hidden=cfg.hidden_widths(),
    )
    formats.write_policy(args.out, net)
    if net.reward_trace:
        print(
            f"mean reward: first iter {net.reward_trace[0]:.6g}, "
            f"last iter {net.reward_trace[-1]:.6g}",
            file=sys.stderr,
        )
    print(args.out)
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    cfg = _config(args)
    feats = formats.read_features(args.features)
    regions, _ = formats.read_regions(args.regions)
    base = formats.read_model(args.model)
    policy = formats.read_policy(args.policy)
    # extra stored regions are dropped; max_regions=0 encodes single-code
    regions = [block[: cfg.max_regions] for block in regions]
    entries = encode_corpus(base, policy, feats, regions, cfg.encoder_config())
    formats.write_entries(args.out, base.q, entries)
    kept = sum(e.t for e in entries) / len(entries)
    print(f"encoded {len(entries)} items, {kept:.4f} codes/item", file=sys.stderr)
    print(args.out)
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    cfg = _config(args)
    index = formats.read_index(args.index)
    if args.code is not None:
        if set(args.code) - {"0", "1"} or len(args.code) != index.q:
            raise ConfigError(
                f"--code must be a {index.q}-character bit string"
            )
        query = HashCode.from_string(args.code)
    else:
        if args.features is None or args.model is None:
            raise ConfigError("--query-id needs --features and --model")
        feats = formats.read_features(args.features)
        if not 0 <= args.query_id < feats.shape[0]:
            raise ConfigError(f"query id {args.query_id} out of range")
        model = formats.read_model(args.model)
        _, query = model.encode(feats[args.query_id])
    r_max = min(cfg.effective_r_max(), index.q)
    result = bucket_search(index, query, args.k, r_max)
    ids, dist = index.asymmetric_distances(query)
    id_to_dist = dict(zip(ids.tolist(), dist.tolist()))
    print(f"query {query}  k={args.k}  r_max={r_max}")
    print(
        f"final_radius={result.final_radius}  "
        f"buckets_probed={result.buckets_probed}  "
        f"buckets_nonempty={result.buckets_nonempty}"
    )
    for rank, item in enumerate(result.items, 1):
        print(f"{rank}\t{item}\t{id_to_dist[item]}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config(args)
    index = formats.read_index(args.index)
    db_labels = formats.read_labels(args.db_labels)
    q_feats = formats.read_features(args.query_features)
    q_labels = formats.read_labels(args.query_labels)
    model = formats.read_model(args.model)
    if q_feats.shape[0] != q_labels.shape[0]:
        raise ConfigError("query features/labels row counts differ")
    if q_labels.shape[1] != db_labels.shape[1]:
        raise ConfigError("query/database label widths differ")

    query_codes: list = []
    if cfg.query_multicode:
        if args.query_regions is None or args.policy is None:
            raise ConfigError(
                "query_multicode=true needs --query-regions and --policy"
            )
        q_regions, _ = formats.read_regions(args.query_regions)
        q_regions = [block[: cfg.max_regions] for block in q_regions]
        policy = formats.read_policy(args.policy)
        entries = encode_corpus(
            model, policy, q_feats, q_regions, cfg.encoder_config()
        )
        query_codes = [e.codes for e in entries]
    else:
        for qi in range(q_feats.shape[0]):
            _, code = model.encode(q_feats[qi])
            query_codes.append(code)

    db_ids = np.array(sorted(index.entries), dtype=np.int64)
    if db_labels.shape[0] < db_ids.max() + 1:
        raise ConfigError("database label file smaller than index ids")
    shared = (q_labels @ db_labels[db_ids].T) > 0
    queries = []
    for qi in range(q_feats.shape[0]):
        gt = {int(db_ids[j]) for j in np.nonzero(shared[qi])[0]}
        queries.append((query_codes[qi], gt))

    report = build_report(
        index, queries, cfg.ks(), r_max=min(cfg.effective_r_max(), index.q)
    )
    prefix = args.out_prefix
    with open(f"{prefix}.report.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(f"{prefix}.curve.tsv", "w", encoding="utf-8") as fh:
        fh.write(report.curve_tsv())
    with open(f"{prefix}.perquery.tsv", "w", encoding="utf-8") as fh:
        fh.write(report.per_query_tsv())
    print(
        f"R@H=0 {report.recall_h0:.4f}  P@H=0 {report.precision_h0:.4f} "
        f"(coverage {report.precision_coverage}/{report.n_queries})  "
        f"mAP {report.map_score:.4f}  codes/item {report.anhc:.4f}",
        file=sys.stderr,
    )
    for name in ("report.json", "curve.tsv", "perquery.tsv"):
        print(f"{prefix}.{name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mch",
        description="multi-code Hamming indexing and retrieval pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic dataset files")
    _add_common(p)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--preset", choices=["demo"], default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-base", help="train the base hash model")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_base)

    p = sub.add_parser("train-agent", help="train the keep/discard policy")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_agent)

    p = sub.add_parser("encode", help="encode a corpus into a bucket index")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("search", help="radius-expansion bucket search")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--code", help="query as a bit string, e.g. 010")
    p.add_argument("--query-id", type=int)
    p.add_argument("--features")
    p.add_argument("--model")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="retrieval metrics against ground truth")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--db-labels", required=True)
    p.add_argument("--query-features", required=True)
    p.add_argument("--query-labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--query-regions", help="needed when query_multicode=true")
    p.add_argument("--policy", help="needed when query_multicode=true")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "search":
        if (args.code is None) == (args.query_id is None):
            print("error: give exactly one of --code / --query-id", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
