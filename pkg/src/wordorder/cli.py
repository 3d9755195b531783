"""Command-line pipeline orchestration.

Subcommands: ingest, pipeline, serve, aggregate, report.  Configuration
is a flat ``key = value`` text file; any key can be overridden on the
command line with ``--set key=value``.  Pipeline outputs are namespaced
by a run id derived from the configuration and seed, are never
overwritten, and are byte-reproducible given the same config and seed.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from wordorder import __version__, features, judge, ngramlm, pairrank, stats, treebank, variantgen

log = logging.getLogger(__name__)

DEFAULTS = {
    "cap": "100",
    "mu": "0.05",
    "history": "100",
    "adapt_k": "1",
    "folds": "10",
    "gt_max": "7",
    "min_count": "1",
    "out": "runs",
    "host": "127.0.0.1",
    "port": "8765",
}

# Table-style single-letter subset names for the canonical columns.
SUBSET_LETTERS = [
    ("a", "is_score"),
    ("b", "dep_length"),
    ("c", "pcfg_surp"),
    ("d", "lex_rept_surp"),
    ("e", "trigram_surp"),
    ("f", "lstm_surp"),
    ("g", "adaptive_lstm_surp"),
]

PATH_KEYS = ("treebank", "lm_corpus", "stimuli", "predictions", "assets_dir")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def parse_config_text(text: str) -> dict[str, str]:
    config = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


def load_config(path: str | None, overrides: list[str]) -> dict[str, str]:
    config = dict(DEFAULTS)
    if path:
        config.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        config[key.strip()] = value.strip()
    return config


def validate_paths(config: dict[str, str], required: tuple[str, ...]) -> None:
    for key in required:
        if key not in config:
            raise ConfigError(f"config key {key!r} is required")
    for key, value in config.items():
        base = key.split(".", 1)[0]
        if (base in PATH_KEYS or key.startswith("external.")) and not Path(value).exists():
            raise ConfigError(f"config key {key!r}: path {value!r} does not exist")


def require_seed(config: dict[str, str]) -> int:
    if "seed" not in config:
        raise ConfigError("config key 'seed' is required (no wall-clock default)")
    return int(config["seed"])


def run_id_of(config: dict[str, str]) -> str:
    """Hash of the semantic configuration.  The output root is excluded
    so identical runs into different directories stay byte-identical.
    """
    semantic = {k: v for k, v in sorted(config.items()) if k != "out"}
    digest = hashlib.sha256(json.dumps(semantic, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:12]


# -- ingest -----------------------------------------------------------


def ingest_summary(trees: list[treebank.DependencyTree]) -> dict:
    relations = Counter(t.deprel for tree in trees for t in tree.tokens)
    return {
        "sentences": len(trees),
        "documents": len({t.doc_id for t in trees}),
        "tokens": sum(len(t.tokens) for t in trees),
        "relations": dict(sorted(relations.items())),
    }


def cmd_ingest(config: dict[str, str]) -> int:
    validate_paths(config, required=("treebank",))
    path = Path(config["treebank"])
    try:
        with path.open("r", encoding="utf-8") as fh:
            trees = treebank.parse_treebank(fh, source_name=path.stem)
    except treebank.TreebankError as exc:
        print(f"invalid treebank: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(ingest_summary(trees), indent=2, sort_keys=True))
    return 0


# -- pipeline ---------------------------------------------------------


def default_subsets(columns: list[str]) -> dict[str, list[str]]:
    """Single-feature rows a..g plus the collective base rows, restricted
    to the columns that are actually present.
    """
    subsets: dict[str, list[str]] = {}
    present = {name for _, name in SUBSET_LETTERS if name in columns}
    for letter, name in SUBSET_LETTERS:
        if name in present:
            subsets[letter] = [name]
    base1 = [n for _, n in SUBSET_LETTERS[:-1] if n in present]  # a..f
    if len(base1) >= 2:
        subsets["base1"] = base1
        if "adaptive_lstm_surp" in present:
            subsets["base1+g"] = base1 + ["adaptive_lstm_surp"]
        base2 = [n for n in base1 if n != "lex_rept_surp"]
        if len(base2) >= 2 and base2 != base1:
            subsets["base2"] = base2
            if "adaptive_lstm_surp" in present:
                subsets["base2+g"] = base2 + ["adaptive_lstm_surp"]
    return subsets


def configured_subsets(config: dict[str, str], columns: list[str]) -> dict[str, list[str]]:
    explicit = {
        key.split(".", 1)[1]: [f.strip() for f in value.split(",") if f.strip()]
        for key, value in sorted(config.items())
        if key.startswith("subset.")
    }
    return explicit or default_subsets(columns)


def build_families(
    trees: list[treebank.DependencyTree],
    cap: int,
    seed: int,
    context_len: int,
) -> list[features.FamilyContext]:
    attested = variantgen.collect_attested_bigrams(trees)
    by_doc: dict[str, list[treebank.DependencyTree]] = {}
    for tree in trees:
        by_doc.setdefault(tree.doc_id, []).append(tree)
    families = []
    for doc_trees in by_doc.values():
        for i, tree in enumerate(doc_trees):
            if len(treebank.preverbal_constituents(tree)) < 2:
                continue
            records = variantgen.generate_variants(
                tree, attested, cap, variantgen.family_seed(seed, tree.sentence_id)
            )
            if len(records) < 2:
                log.info("family %s: no variants survived filtering", tree.sentence_id)
                continue
            preceding = doc_trees[max(0, i - context_len):i]
            families.append(features.FamilyContext(tree, records, preceding))
    return families


def _write_text(path: Path, text: str) -> str:
    path.write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def run_pipeline(config: dict[str, str], echo=print) -> Path:
    """Execute every stage and return the run directory."""
    validate_paths(config, required=("treebank", "lm_corpus"))
    seed = require_seed(config)
    cap = int(config["cap"])
    run_id = run_id_of(config)
    run_dir = Path(config["out"]) / f"run_{run_id}"
    manifest_path = run_dir / "manifest.json"
    if run_dir.exists():
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            if manifest.get("run_id") == run_id:
                echo(f"run {run_id} already complete at {run_dir}; nothing to do")
                return run_dir
        raise StageError("setup", f"refusing to overwrite existing {run_dir}")
    run_dir.mkdir(parents=True)

    artifacts: dict[str, str] = {}
    stages: list[str] = []

    def stage(name):
        stages.append(name)
        echo(f"[{len(stages)}] {name}")

    try:
        stage("ingest")
        tb_path = Path(config["treebank"])
        with tb_path.open("r", encoding="utf-8") as fh:
            trees = treebank.parse_treebank(fh, source_name=tb_path.stem)

        stage("variants")
        families = build_families(trees, cap, seed, max(int(config["adapt_k"]), 1))
        if not families:
            raise ValueError("no families with permutable constituents")
        all_records = [r for fam in families for r in fam.records]
        buf = io.StringIO()
        variantgen.write_variants_tsv(buf, all_records)
        artifacts["variants.tsv"] = _write_text(run_dir / "variants.tsv", buf.getvalue())

        stage("train-lm")
        with Path(config["lm_corpus"]).open("r", encoding="utf-8") as fh:
            model = ngramlm.train(fh, gt_max=int(config["gt_max"]), min_count=int(config["min_count"]))
        buf = io.StringIO()
        ngramlm.to_arpa(model, buf)
        artifacts["model.arpa"] = _write_text(run_dir / "model.arpa", buf.getvalue())

        stage("featurize")
        external = []
        for key, value in sorted(config.items()):
            if key.startswith("external."):
                name = key.split(".", 1)[1]
                with Path(value).open("r", encoding="utf-8") as fh:
                    external.append(features.read_score_column(name, fh))
        vectors = features.featurize(
            families, model, external,
            adapt_k=int(config["adapt_k"]), mu=float(config["mu"]),
            history_len=int(config["history"]),
        )
        buf = io.StringIO()
        features.write_feature_csv(buf, vectors)
        artifacts["features.csv"] = _write_text(run_dir / "features.csv", buf.getvalue())
        buf = io.StringIO()
        ngramlm.write_surprisal_tsv(
            buf,
            (
                (fam.tree.sentence_id, ngramlm.surprisal(model, fam.tree.forms()))
                for fam in families
            ),
        )
        artifacts["surprisal.tsv"] = _write_text(run_dir / "surprisal.tsv", buf.getvalue())

        stage("transform")
        instances = pairrank.joachims_transform(vectors, alternation_seed=seed)
        buf = io.StringIO()
        pairrank.write_pair_csv(buf, instances)
        artifacts["pairs.csv"] = _write_text(run_dir / "pairs.csv", buf.getvalue())

        stage("fit")
        ranker = pairrank.fit(instances)
        artifacts["ranker.json"] = _write_text(run_dir / "ranker.json", ranker.to_json())

        stage("evaluate")
        columns = features.feature_names(vectors)
        subsets = configured_subsets(config, columns)
        tags = {
            fam.tree.sentence_id: stats.construction_tag(fam.records[0].relation_sequence)
            for fam in families
        }
        plan = stats.FoldPlan.build([f.tree.sentence_id for f in families], int(config["folds"]), seed)
        report = stats.evaluate(instances, plan, subsets, tags)
        artifacts["report.json"] = _write_text(run_dir / "report.json", report.to_json())
        artifacts["report.txt"] = _write_text(run_dir / "report.txt", stats.format_report(report))

        stage("manifest")
        manifest = {
            "run_id": run_id,
            "seed": seed,
            "version": __version__,
            "config": {k: v for k, v in sorted(config.items()) if k != "out"},
            "stages": stages,
            "artifacts": artifacts,
            "n_families": len(families),
            "n_records": len(all_records),
            "n_pairs": len(instances),
        }
        _write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True))
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stages[-1] if stages else "setup", exc) from exc
    echo(f"run {run_id} complete: {run_dir}")
    return run_dir


def cmd_pipeline(config: dict[str, str]) -> int:
    try:
        run_pipeline(config)
    except (ConfigError, StageError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0


# -- serve / aggregate / report ---------------------------------------


def load_predictions(path: str | None) -> dict | None:
    if not path:
        return None
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cmd_serve(config: dict[str, str]) -> int:
    validate_paths(config, required=("stimuli",))
    seed = require_seed(config)
    try:
        with Path(config["stimuli"]).open("r", encoding="utf-8") as fh:
            stimuli = judge.read_stimuli(fh)
    except judge.StimuliError as exc:
        print(f"refusing to start: {exc}", file=sys.stderr)
        return 1
    service = judge.JudgeService(
        stimuli,
        log_path=config.get("judgment_log", "judgments.jsonl"),
        seed=seed,
        predictions=load_predictions(config.get("predictions")),
        assets_dir=config.get("assets_dir"),
    )
    try:
        judge.serve_forever(service, config["host"], int(config["port"]))
    except OSError as exc:
        print(f"cannot serve on {config['host']}:{config['port']}: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_aggregate(config: dict[str, str]) -> int:
    validate_paths(config, required=("stimuli",))
    if "judgment_log" not in config:
        raise ConfigError("config key 'judgment_log' is required")
    with Path(config["stimuli"]).open("r", encoding="utf-8") as fh:
        stimuli = judge.read_stimuli(fh)
    with Path(config["judgment_log"]).open("r", encoding="utf-8") as fh:
        judgments = judge.read_judgments(fh)
    table = judge.aggregate_judgments(stimuli, judgments, load_predictions(config.get("predictions")))
    print(json.dumps(table, indent=2, sort_keys=True))
    return 0


def cmd_report(run: str) -> int:
    report_path = Path(run) / "report.json"
    if not report_path.exists():
        print(f"no report.json under {run}", file=sys.stderr)
        return 1
    report = report_from_json(report_path.read_text(encoding="utf-8"))
    print(stats.format_report(report), end="")
    return 0


def report_from_json(text: str) -> stats.EvalReport:
    d = json.loads(text)
    results = {
        name: stats.SubsetResult(
            accuracy=r["accuracy"], per_fold=r["per_fold"], slices=r["slices"],
            slice_counts=r["slice_counts"], correct=np.zeros(0, dtype=bool),
        )
        for name, r in d["results"].items()
    }
    corr = stats.CorrelationMatrix(
        d["correlations"]["names"],
        np.array(d["correlations"]["values"], dtype=float)
        if d["correlations"]["values"] else np.zeros((0, 0)),
        d["correlations"]["degenerate"],
    )
    vif = {k: (float("inf") if v == "inf" else v) for k, v in d["vif"].items()}
    return stats.EvalReport(
        subsets=d["subsets"], results=results, mcnemar=d["mcnemar"], lrt=d["lrt"],
        vif=vif, correlations=corr, ols=d["ols"], n_pairs=d["n_pairs"],
    )


# -- entry point ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wordorder",
        description="Word-order preference modeling pipeline",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key")

    common(sub.add_parser("ingest", help="parse and validate a treebank"))
    common(sub.add_parser("pipeline", help="run the full modeling pipeline"))
    serve = sub.add_parser("serve", help="run the human-judgment service")
    common(serve)
    serve.add_argument("--port", type=int)
    common(sub.add_parser("aggregate", help="aggregate a judgment log"))
    report = sub.add_parser("report", help="render a run's evaluation report")
    report.add_argument("--run", required=True, help="run directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "report":
            return cmd_report(args.run)
        config = load_config(args.config, args.set)
        if args.command == "serve" and args.port is not None:
            config["port"] = str(args.port)
        handler = {
            "ingest": cmd_ingest,
            "pipeline": cmd_pipeline,
            "serve": cmd_serve,
            "aggregate": cmd_aggregate,
        }[args.command]
        return handler(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
