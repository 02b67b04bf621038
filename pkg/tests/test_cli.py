import json
import sys

import pytest

from legalner.cli import (
    EXIT_FOLD_FAILURE,
    EXIT_OK,
    EXIT_PARAMETER,
    EXIT_PARSE,
    EXIT_VALIDATION,
    main,
)
from legalner.corpus import serialize_annotations
from legalner.partition import Partition

from corpusgen import make_memorizable, make_paper_like


@pytest.fixture(scope="module")
def fixture_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "fixture.json"
    path.write_text(serialize_annotations(make_paper_like(seed=7, n_docs=20)), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def memorizable_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "mem.json"
    path.write_text(serialize_annotations(make_memorizable(n_docs=15)), encoding="utf-8")
    return path


def test_ingest_writes_stats_and_corpus(fixture_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["ingest", str(fixture_file), "-o", str(out)]) == EXIT_OK
    stats = json.loads((out / "stats.json").read_text(encoding="utf-8"))
    assert stats["documents"] == 20
    assert stats["label_inventory_size"] == 15
    assert stats["script"] == "lat"
    assert sum(stats["type_counts"].values()) > 0
    assert (out / "corpus.json").exists() and (out / "corpus.txt").exists()
    echoed = json.loads(capsys.readouterr().out)
    assert echoed == stats


def test_ingest_transliterates_cyrillic(tmp_path):
    raw = {
        "documents": [
            {
                "id": "d",
                "script": "cyr",
                "sentences": [
                    {"text": "Суд доноси одлуку", "spans": [{"start": 0, "end": 3, "type": "COURT"}]}
                ],
            }
        ]
    }
    src = tmp_path / "cyr.json"
    src.write_text(json.dumps(raw, ensure_ascii=False), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["ingest", str(src), "-o", str(out)]) == EXIT_OK
    corpus = json.loads((out / "corpus.json").read_text(encoding="utf-8"))
    assert corpus["documents"][0]["script"] == "lat"
    assert corpus["documents"][0]["sentences"][0]["text"] == "Sud donosi odluku"


def test_ingest_error_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope", encoding="utf-8")
    assert main(["ingest", str(bad), "-o", str(tmp_path / "o1")]) == EXIT_PARSE
    empty = tmp_path / "empty.json"
    empty.write_text('{"documents": []}', encoding="utf-8")
    assert main(["ingest", str(empty), "-o", str(tmp_path / "o2")]) == EXIT_VALIDATION


def test_partition_deterministic_and_balanced(fixture_file, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        code = main(["partition", str(fixture_file), "--k", "5", "--seed", "42",
                     "-o", str(out)])
        assert code == EXIT_OK
    assert (out_a / "partition.json").read_bytes() == (out_b / "partition.json").read_bytes()
    assert (out_a / "balance.csv").read_bytes() == (out_b / "balance.csv").read_bytes()
    part = Partition.from_json((out_a / "partition.json").read_text(encoding="utf-8"))
    assert part.k == 5
    assert sum(len(s) for s in part.subsets) == 20


def test_partition_k_too_large_is_parameter_error(fixture_file, tmp_path):
    code = main(["partition", str(fixture_file), "--k", "50", "-o", str(tmp_path)])
    assert code == EXIT_PARAMETER


def test_evaluate_dictionary_perfect(memorizable_file, tmp_path):
    part_dir = tmp_path / "part"
    assert main(["partition", str(memorizable_file), "--k", "5", "--seed", "7",
                 "-o", str(part_dir)]) == EXIT_OK
    out = tmp_path / "eval"
    code = main([
        "evaluate", str(memorizable_file), str(part_dir / "partition.json"),
        "--tagger", "dictionary", "--seed", "7", "-o", str(out),
    ])
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["pooled"]["entity"]["overall"]["f1"] == 1.0
    assert len(report["folds"]) == 5
    table = (out / "table.csv").read_text(encoding="utf-8").strip().splitlines()
    assert table[0] == "Class,Recall,Precision,Accuracy,F1"
    assert table[-1] == "Average,1.00,1.00,1.00,1.00"
    confusion = (out / "confusion.csv").read_text(encoding="utf-8").strip().splitlines()
    assert len(confusion) == len(report["classes"]) + 1


def test_evaluate_with_noise_grid_writes_robustness(memorizable_file, tmp_path):
    part_dir = tmp_path / "part"
    main(["partition", str(memorizable_file), "--k", "5", "--seed", "3", "-o", str(part_dir)])
    out = tmp_path / "eval"
    code = main([
        "evaluate", str(memorizable_file), str(part_dir / "partition.json"),
        "--tagger", "oracle", "--rates", "0.0,0.1", "--seed", "3", "-o", str(out),
    ])
    assert code == EXIT_OK
    lines = (out / "robustness.csv").read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 3
    first = lines[1].split(",")
    assert float(first[5]) == 0.0  # rate 0 -> delta 0


def test_evaluate_fold_failure_exit_code(memorizable_file, tmp_path):
    part_dir = tmp_path / "part"
    main(["partition", str(memorizable_file), "--k", "5", "--seed", "3", "-o", str(part_dir)])
    code = main([
        "evaluate", str(memorizable_file), str(part_dir / "partition.json"),
        "--tagger", "external", "--adapter-cmd", f"{sys.executable} -c 'raise SystemExit(9)'",
        "-o", str(tmp_path / "eval"),
    ])
    assert code == EXIT_FOLD_FAILURE


def test_robustness_subcommand(memorizable_file, tmp_path):
    out = tmp_path / "rob"
    code = main([
        "robustness", str(memorizable_file), "--tagger", "dictionary",
        "--rates", "0.0,0.2", "--noise-seed", "5", "-o", str(out),
    ])
    assert code == EXIT_OK
    lines = (out / "robustness.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "operations,rate,seed,clean_f1,noisy_f1,delta_f1"
    assert len(lines) == 3


def test_losses_subcommand(tmp_path, capsys):
    batch = {
        "replaced": [1, 0],
        "disc_probs": [0.8, 0.1],
        "masked": [0],
        "gen_probs": [0.5],
        "lambda": 1.0,
    }
    path = tmp_path / "batch.json"
    path.write_text(json.dumps(batch), encoding="utf-8")
    assert main(["losses", str(path)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["generator_loss"] == pytest.approx(0.6931471805599453, abs=1e-9)
    assert out["discriminator_loss"] == pytest.approx(0.328504066972036, abs=1e-9)
    assert out["combined_loss"] == pytest.approx(
        out["generator_loss"] + out["discriminator_loss"], abs=1e-12
    )


def test_export_conll(memorizable_file, tmp_path):
    out = tmp_path / "conll"
    assert main(["export-conll", str(memorizable_file), "-o", str(out)]) == EXIT_OK
    text = (out / "corpus.conll").read_text(encoding="utf-8")
    first = text.splitlines()[0].split("\t")
    assert len(first) == 4
    assert first[1].isdigit() and first[2].isdigit()


def test_aggregate_subcommand(tmp_path, capsys):
    rows = [
        "Class,Recall,Precision,Accuracy,F1",
        "O,0.99,0.99,0.99,0.99",
        "B-Court,0.98,0.97,0.99,0.97",
        "Average,0.99,0.98,0.99,0.98",  # must be ignored on re-aggregation
    ]
    path = tmp_path / "table.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    assert main(["aggregate", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    payload = json.loads(out[: out.rindex("}") + 1])
    assert payload["classes"] == 2
    assert payload["recall"] == pytest.approx((0.99 + 0.98) / 2)
    assert out.strip().splitlines()[-1].startswith("Average,0.98,0.98,0.99,")


def test_config_file_merge_flags_win(fixture_file, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"k": 4, "seed": 1}), encoding="utf-8")
    out = tmp_path / "out"
    code = main(["partition", str(fixture_file), "--config", str(config),
                 "--k", "2", "-o", str(out)])
    assert code == EXIT_OK
    part = Partition.from_json((out / "partition.json").read_text(encoding="utf-8"))
    assert part.k == 2      # flag beats config
    assert part.seed == 1   # config beats default
