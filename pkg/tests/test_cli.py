import hashlib
import json
import re

import pytest

from socialsearch.cli import main
from socialsearch.corpus import read_corpus, write_corpus
from socialsearch.demo import BILLIE_EXPECTED, billie_graph
from socialsearch.graph import NodeKind, PostingDoc, SocialGraph, conn_postings
from socialsearch.index import InvertedIndex
from socialsearch.query import parse
from socialsearch.rewriter import RewriteModel, keyword_query, uniform

GEN = ["--persons", "150", "--groups", "15", "--pages", "15", "--postings", "1500", "--vocab", "600",
       "--queries", "60", "--sessions", "400", "--topics", "10"]


def _digests(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}


@pytest.fixture(scope="module")
def gen(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "--seed", "7", "--out", str(out), *GEN]) == 0
    assert main(["index", "--corpus", str(out / "corpus.jsonl"), "--out", str(out / "index.ssix")]) == 0
    return out


def test_generate_is_deterministic(gen, tmp_path, capsys):
    assert main(["generate", "--seed", "7", "--out", str(tmp_path), *GEN]) == 0
    (tmp_path / "index.ssix").write_bytes((gen / "index.ssix").read_bytes())
    assert _digests(tmp_path) == _digests(gen)
    assert "postings=1500" in capsys.readouterr().out


def test_generate_rejects_zero_postings(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--out", str(tmp_path), "--postings", "0"])
    assert exc.value.code == 2
    assert "--postings" in capsys.readouterr().err


def test_index_reload_matches_memory(gen):
    _, docs, _ = read_corpus(gen / "corpus.jsonl")
    mem = InvertedIndex.build(docs)
    disk = InvertedIndex.load(gen / "index.ssix")
    assert disk.terms() == mem.terms()
    for t in mem.terms()[:: max(1, len(mem.terms()) // 200)]:
        assert disk.lookup(t).tolist() == mem.lookup(t).tolist()


def test_index_single_posting(tmp_path, capsys):
    g = SocialGraph()
    for p in (7, 8):
        g.add_node(p, NodeKind.PERSON)
    g.add_node(20, NodeKind.GROUP)
    doc = PostingDoc(1, "Hello, hello World", "world_cup 2026", author=7, container=20,
                     container_kind=NodeKind.GROUP, involved=frozenset({8}))
    g.add_posting(doc)
    write_corpus(tmp_path / "c.jsonl", g, [doc])
    assert main(["index", "--corpus", str(tmp_path / "c.jsonl"), "--out", str(tmp_path / "i")]) == 0
    # authored-by:7 involves:7 involves:8 group-of:20 text:hello text:world text:cup text:2026
    assert "docs=1 terms=8" in capsys.readouterr().out


def test_truncated_index(gen, tmp_path, capsys):
    bad = tmp_path / "bad.ssix"
    bad.write_bytes((gen / "index.ssix").read_bytes()[:-10])
    rc = main(["search", "--index", str(bad), "--corpus", str(gen / "corpus.jsonl"), "--searcher", "0", "--query", "x"])
    assert rc == 2
    assert "error" in capsys.readouterr().err


@pytest.fixture()
def billie(tmp_path):
    g, docs = billie_graph()
    write_corpus(tmp_path / "b.jsonl", g, docs)
    InvertedIndex.build(docs).save(tmp_path / "b.ssix")
    return tmp_path


def _search(d, *extra, corpus="b.jsonl", index="b.ssix"):
    return main(["search", "--index", str(d / index), "--corpus", str(d / corpus), *extra])


def test_search_prints_rewritten_query(billie, capsys):
    assert _search(billie, "--searcher", "0", "--query", "Billie Eilish") == 0
    out = capsys.readouterr().out
    sexpr = out.split("\n# ")[0]
    assert parse(sexpr) == BILLIE_EXPECTED
    ids = [int(line.split("\t")[1]) for line in out.splitlines() if re.match(r"\d+\t", line)]
    assert sorted(ids) == [100, 101, 102, 103, 104]


def test_search_without_rewrite_reaches_strangers(billie, capsys):
    assert _search(billie, "--searcher", "0", "--query", "Billie Eilish", "--no-rewrite") == 0
    ids = [int(line.split("\t")[1]) for line in capsys.readouterr().out.splitlines() if re.match(r"\d+\t", line)]
    assert 105 in ids


def test_search_results_stay_in_conn_postings(gen, capsys):
    g, docs, _ = read_corpus(gen / "corpus.jsonl")
    queries = [line.split("\t") for line in (gen / "workload.tsv").read_text().splitlines()[:15]]
    leaked = 0
    for u, q in queries:
        reach = conn_postings(g, int(u))
        for flag in ((), ("--no-rewrite",)):
            assert _search(gen, "--searcher", u, "--query", q, "--top", "1000", *flag,
                           corpus="corpus.jsonl", index="index.ssix") == 0
            ids = {int(line.split("\t")[1]) for line in capsys.readouterr().out.splitlines() if re.match(r"\d+\t", line)}
            if flag:
                leaked += len(ids - reach)
            else:
                assert ids <= reach
    assert leaked > 0


def test_search_unknown_searcher(billie, capsys):
    assert _search(billie, "--searcher", "999", "--query", "billie") == 2
    assert "unknown searcher" in capsys.readouterr().err


def test_search_no_connections_falls_back(billie, capsys, caplog):
    rw = billie / "zero.json"
    rw.write_text(json.dumps(RewriteModel(thresholds=uniform(0)).to_dict()))
    assert _search(billie, "--searcher", "0", "--query", "billie", "--rewriter", str(rw)) == 0
    out = capsys.readouterr().out
    assert parse(out.split("\n# ")[0]) == keyword_query("billie")
    assert "falling back to keyword-only" in caplog.text
    assert "\t105\t" in out


def test_missing_path(tmp_path, capsys):
    assert main(["index", "--corpus", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "i")]) == 2
    assert "no such file" in capsys.readouterr().err


def test_sweep_example(capsys):
    assert main(["sweep-tp", "--example", "--budget", "200"]) == 0
    out = capsys.readouterr().out
    assert "t* = 2" in out.splitlines()
    assert "t=1 mean_cost=100" in out and "t=2 mean_cost=180" in out and "t=3 mean_cost=270" in out


def test_train_rewriter_and_sweep_on_generated(gen, tmp_path, capsys):
    model = tmp_path / "rw.json"
    args = ["train-rewriter", "--rows", str(gen / "ground_truth.tsv"), "--out", str(model), "--t", "3", "--seed", "1"]
    assert main(args) == 0
    first = model.read_bytes()
    assert main(args) == 0
    assert model.read_bytes() == first
    assert "recall_at_t=" in capsys.readouterr().out
    assert main(["sweep-tp", "--budget", "50", "--corpus", str(gen / "corpus.jsonl"), "--index", str(gen / "index.ssix"),
                 "--workload", str(gen / "workload.tsv"), "--rewriter", str(model), "--limit", "40"]) == 0
    assert re.search(r"^t\* = \d+$", capsys.readouterr().out, re.M)


def test_train_ranker_deterministic(gen, tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        p = tmp_path / f"{name}.sstt"
        assert main(["train-ranker", "--corpus", str(gen / "corpus.jsonl"), "--clicks", str(gen / "clicks.tsv"),
                     "--out", str(p), "--setting", "ctr+tr", "--seed", "3"]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    assert main(["search", "--index", str(gen / "index.ssix"), "--corpus", str(gen / "corpus.jsonl"),
                 "--searcher", "1", "--query", "a", "--model", str(tmp_path / "a.sstt")]) == 0


def test_ablate_all(gen, capsys):
    assert main(["ablate", "--corpus", str(gen / "corpus.jsonl"), "--clicks", str(gen / "clicks.tsv"),
                 "--settings", "all", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    table = out.split("\n\n")[0].splitlines()
    assert len(table) == 2 + 6
    assert json.loads((gen / "split.json").read_text())["first_eval_session"] > 0


def test_ablate_bad_setting(gen, capsys):
    assert main(["ablate", "--corpus", str(gen / "corpus.jsonl"), "--clicks", str(gen / "clicks.tsv"),
                 "--settings", "ctr,bm25"]) == 2
