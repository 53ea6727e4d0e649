import pytest

from socialsearch.corpus import CorpusError, corpus_lines, read_clicks, read_corpus, write_clicks, write_corpus
from socialsearch.demo import billie_graph
from socialsearch.index import InvertedIndex


def test_corpus_roundtrip_regenerates_index(tmp_path, small_data):
    d = small_data
    p = tmp_path / "c.jsonl"
    write_corpus(p, d.graph, d.docs, {"now": d.now})
    g, docs, header = read_corpus(p)
    assert header["now"] == d.now
    assert docs == d.docs
    assert g.edges == d.graph.edges
    assert g.interactions == d.graph.interactions
    assert g.profiles == d.graph.profiles
    assert InvertedIndex.build(docs).to_bytes() == d.index.to_bytes()
    assert corpus_lines(g, docs, {"now": d.now}) == p.read_text().splitlines()


def test_small_graph_roundtrip(tmp_path):
    g, docs = billie_graph()
    p = tmp_path / "b.jsonl"
    write_corpus(p, g, docs)
    g2, docs2, _ = read_corpus(p)
    assert g2.nodes == g.nodes and g2.edges == g.edges and docs2 == docs


@pytest.mark.parametrize("bad,line", [
    ('{"kind":"node","id":1,"type":"ROBOT"}', 3),
    ('not json', 3),
    ('{"kind":"spaceship"}', 3),
    ('{"kind":"edge","src":0,"dst":99,"type":"FRIEND_OF"}', 3),
])
def test_bad_line_is_located(tmp_path, bad, line):
    g, docs = billie_graph()
    p = tmp_path / "b.jsonl"
    write_corpus(p, g, docs)
    lines = p.read_text().splitlines()
    lines.insert(line - 1, bad)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusError, match=rf"b\.jsonl:{line}:"):
        read_corpus(p)


def test_header_required(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"kind":"node","id":1,"type":"PERSON"}\n')
    with pytest.raises(CorpusError, match=":1:"):
        read_corpus(p)
    p.write_text("")
    with pytest.raises(CorpusError, match="empty"):
        read_corpus(p)


def test_clicks_roundtrip(tmp_path, small_data):
    d = small_data
    p = tmp_path / "clicks.tsv"
    write_clicks(p, d.clicks)
    back = read_clicks(p, {x.id: x for x in d.docs}, d.index)
    assert len(back) == len(d.clicks)
    for a, b in zip(back, d.clicks):
        assert (a.session_id, a.query, a.doc.id, a.label, a.sparse) == (b.session_id, b.query, b.doc.id, b.label, b.sparse)
        assert a.dense.tolist() == list(b.dense)
        assert a.tr_dense == b.tr_dense


def test_clicks_bad_lines(tmp_path, small_data):
    d = small_data
    docs = {x.id: x for x in d.docs}
    p = tmp_path / "c.tsv"
    good = (tmp_path / "g.tsv")
    write_clicks(good, d.clicks[:3])
    lines = good.read_text().splitlines()
    for bad in ("1\tq\t999999999\t0\t0.0\t1,2", lines[0].rsplit("\t", 3)[0] + "\t7\t1.0\t1,2", "too\tfew"):
        p.write_text("\n".join(lines[:2] + [bad]) + "\n")
        with pytest.raises(CorpusError, match=":3:"):
            read_clicks(p, docs, d.index)
