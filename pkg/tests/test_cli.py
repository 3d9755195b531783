import json
import re

import pytest

from wordorder import cli, toydata
from wordorder.cli import (
    ConfigError,
    StageError,
    configured_subsets,
    default_subsets,
    load_config,
    parse_config_text,
    run_id_of,
    run_pipeline,
)


@pytest.fixture(scope="module")
def toy_paths(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    corpus = toydata.generate(n_families=30, doc_size=10, seed=5)
    return toydata.write(corpus, out)


def toy_config(toy_paths, out_dir, **extra):
    tb, lm = toy_paths
    config = dict(cli.DEFAULTS)
    config.update(
        {"treebank": str(tb), "lm_corpus": str(lm), "out": str(out_dir), "seed": "13"}
    )
    config.update({k: str(v) for k, v in extra.items()})
    return config


class TestConfig:
    def test_parse_flat_keys(self):
        text = "# comment\nseed = 4\ncap=100\nsubset.e = trigram_surp\n"
        config = parse_config_text(text)
        assert config == {"seed": "4", "cap": "100", "subset.e": "trigram_surp"}

    def test_bad_line_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_text("not a config line\n")

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("seed = 1\ncap = 50\n")
        config = load_config(str(path), ["cap=75"])
        assert config["cap"] == "75"
        assert config["seed"] == "1"

    def test_seed_is_mandatory(self):
        with pytest.raises(ConfigError, match="seed"):
            cli.require_seed(dict(cli.DEFAULTS))

    def test_missing_path_rejected(self):
        config = dict(cli.DEFAULTS)
        config["treebank"] = "/nonexistent/file.conll"
        with pytest.raises(ConfigError, match="does not exist"):
            cli.validate_paths(config, required=("treebank",))

    def test_run_id_ignores_output_root(self, toy_paths, tmp_path):
        c1 = toy_config(toy_paths, tmp_path / "a")
        c2 = toy_config(toy_paths, tmp_path / "b")
        assert run_id_of(c1) == run_id_of(c2)
        assert run_id_of(c1) != run_id_of(toy_config(toy_paths, tmp_path / "a", seed=99))


class TestSubsets:
    def test_default_subsets_from_available_columns(self):
        columns = ["dep_length", "trigram_surp", "lex_rept_surp", "is_score"]
        subsets = default_subsets(columns)
        assert subsets["a"] == ["is_score"]
        assert subsets["e"] == ["trigram_surp"]
        assert set(subsets["base1"]) == set(columns)
        assert set(subsets["base2"]) == set(columns) - {"lex_rept_surp"}
        assert "base1+g" not in subsets

    def test_default_subsets_with_external_columns(self):
        columns = [
            "dep_length", "trigram_surp", "lex_rept_surp", "is_score",
            "pcfg_surp", "lstm_surp", "adaptive_lstm_surp",
        ]
        subsets = default_subsets(columns)
        assert subsets["g"] == ["adaptive_lstm_surp"]
        assert len(subsets["base1"]) == 6
        assert subsets["base1+g"] == subsets["base1"] + ["adaptive_lstm_surp"]

    def test_config_subsets_override(self):
        config = {"subset.mine": "dep_length, trigram_surp"}
        subsets = configured_subsets(config, ["dep_length", "trigram_surp"])
        assert subsets == {"mine": ["dep_length", "trigram_surp"]}


class TestIngest:
    def test_summary_counts(self, toy_paths, capsys):
        tb, _ = toy_paths
        rc = cli.main(["ingest", "--set", f"treebank={tb}"])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["sentences"] == 30
        assert summary["documents"] == 3
        assert "k1" in summary["relations"]

    def test_invalid_treebank_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.conll"
        bad.write_text(
            "#sent_id = broken\n"
            "1\ta\ta\tNN\tNN\t_\t2\tdep\n"
            "2\tb\tb\tNN\tNN\t_\t1\tdep\n"
            "3\tv\tv\tVM\tVM\t_\t0\troot\n"
        )
        rc = cli.main(["ingest", "--set", f"treebank={bad}"])
        assert rc == 2
        assert "broken" in capsys.readouterr().err


class TestPipeline:
    def test_artifacts_written(self, toy_paths, tmp_path):
        run_dir = run_pipeline(toy_config(toy_paths, tmp_path / "runs"), echo=lambda *a: None)
        expected = {
            "variants.tsv", "features.csv", "surprisal.tsv", "model.arpa",
            "pairs.csv", "ranker.json", "report.json", "report.txt", "manifest.json",
        }
        assert {p.name for p in run_dir.iterdir()} == expected
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["n_families"] == 30
        assert set(manifest["artifacts"]) == expected - {"manifest.json"}

    def test_rerun_same_config_is_idempotent(self, toy_paths, tmp_path):
        config = toy_config(toy_paths, tmp_path / "runs")
        d1 = run_pipeline(config, echo=lambda *a: None)
        before = {p.name: p.read_bytes() for p in d1.iterdir()}
        d2 = run_pipeline(config, echo=lambda *a: None)
        assert d1 == d2
        after = {p.name: p.read_bytes() for p in d2.iterdir()}
        assert before == after

    def test_refuses_to_clobber_foreign_run_dir(self, toy_paths, tmp_path):
        config = toy_config(toy_paths, tmp_path / "runs")
        run_dir = tmp_path / "runs" / f"run_{run_id_of(config)}"
        run_dir.mkdir(parents=True)
        (run_dir / "manifest.json").write_text('{"run_id": "different"}')
        with pytest.raises(StageError, match="refusing"):
            run_pipeline(config, echo=lambda *a: None)

    def test_determinism_across_output_roots(self, toy_paths, tmp_path):
        d1 = run_pipeline(toy_config(toy_paths, tmp_path / "r1"), echo=lambda *a: None)
        d2 = run_pipeline(toy_config(toy_paths, tmp_path / "r2"), echo=lambda *a: None)
        for name in ("manifest.json", "features.csv", "report.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_stage_error_names_stage(self, toy_paths, tmp_path):
        config = toy_config(toy_paths, tmp_path / "runs", **{"external.pcfg_surp": None})
        # point the external column at a file that lacks the variant ids
        missing = tmp_path / "scores.tsv"
        missing.write_text("sentence_id\tscore\nd000s00\t1.0\n")
        config["external.pcfg_surp"] = str(missing)
        with pytest.raises(StageError, match="featurize"):
            run_pipeline(config, echo=lambda *a: None)

    def test_report_command_renders(self, toy_paths, tmp_path, capsys):
        run_dir = run_pipeline(toy_config(toy_paths, tmp_path / "runs"), echo=lambda *a: None)
        rc = cli.main(["report", "--run", str(run_dir)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "Prediction accuracy" in out
        assert re.search(r"base1\s+\d+\.\d\d", out)


class TestFullColumnProtocol:
    def test_pipeline_with_all_external_columns(self, toy_paths, tmp_path):
        """All seven feature columns present: the report carries the full
        single-feature row set a..g plus base1/base2 with and without the
        adaptive column, both single-addition LRTs, and a 7x7 VIF table.
        """
        tb, lm = toy_paths
        with open(tb, encoding="utf-8") as fh:
            from wordorder import treebank

            trees = treebank.parse_treebank(fh, source_name="toy")
        families = cli.build_families(trees, cap=100, seed=13, context_len=1)
        rng = __import__("numpy").random.default_rng(0)
        score_paths = {}
        for name in ("pcfg_surp", "lstm_surp", "adaptive_lstm_surp"):
            path = tmp_path / f"{name}.tsv"
            with path.open("w") as fh:
                fh.write("sentence_id\tscore\n")
                for fam in families:
                    for record in fam.records:
                        # informative but noisy: longer reorderings score worse
                        jitter = rng.normal(scale=3.0)
                        value = (0.0 if record.is_reference else 10.0) + jitter
                        fh.write(f"{record.sentence_id}\t{value:.4f}\n")
            score_paths[name] = path

        config = toy_config(toy_paths, tmp_path / "runs")
        for name, path in score_paths.items():
            config[f"external.{name}"] = str(path)
        run_dir = run_pipeline(config, echo=lambda *a: None)
        report = json.loads((run_dir / "report.json").read_text())
        assert set(report["subsets"]) == {
            "a", "b", "c", "d", "e", "f", "g", "base1", "base1+g", "base2", "base2+g",
        }
        # every nested single-feature addition gets a test; the adaptive
        # additions must be among them
        assert {"base1->base1+g", "base2->base2+g"} <= set(report["lrt"])
        for key in report["lrt"]:
            reduced, full = key.split("->")
            assert set(report["subsets"][reduced]) < set(report["subsets"][full])
            assert len(report["subsets"][full]) == len(report["subsets"][reduced]) + 1
        assert "base1|base1+g" in report["mcnemar"]
        assert len(report["vif"]) == 7
        assert len(report["correlations"]["names"]) == 7
        for name in ("c", "f", "g"):
            assert 55.0 <= report["results"][name]["accuracy"] <= 100.0


class TestAggregateCommand:
    def test_aggregate_over_log(self, tmp_path, capsys):
        from wordorder import judge

        stimuli = [
            judge.Stimulus(f"it{i}", f"ctx{i}", f"ref{i}", f"var{i}", "canonical")
            for i in range(3)
        ]
        stim_path = tmp_path / "stimuli.jsonl"
        with stim_path.open("w") as fh:
            judge.write_stimuli(fh, stimuli)
        log_path = tmp_path / "log.jsonl"
        svc = judge.JudgeService(stimuli, log_path, seed=4)
        for participant in ("p1", "p2"):
            for _ in range(3):
                view = svc.next_stimulus(participant)
                svc.submit(
                    {"item_id": view["item_id"], "participant_id": participant, "selected": "A"}
                )
        svc.close()
        rc = cli.main([
            "aggregate",
            "--set", f"stimuli={stim_path}",
            "--set", f"judgment_log={log_path}",
        ])
        assert rc == 0
        table = json.loads(capsys.readouterr().out)
        assert table["total"]["items"] == 3
