import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aode.eval import (
    EmptyReference,
    NormalizationConfig,
    WerBreakdown,
    corpus_wer,
    default_config,
    eval_report,
    format_sig,
    geometric_mean,
    load_config,
    normalize_text,
    word_error_rate,
)
from aode.eval import _align_py, wer as wer_mod
from aode.eval.normalize import load_contractions, load_hesitations

from conftest import FIXTURES


def edit_distance(a, b):
    """Exhaustive recursion over edit operations (no tables)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(
        edit_distance(a[1:], b[1:]) + (a[0] != b[0]),
        edit_distance(a[1:], b) + 1,
        edit_distance(a, b[1:]) + 1,
    )


def all_alignments(ref, hyp):
    """Yield every (S, D, I) reachable by an alignment of ref to hyp."""
    if not ref and not hyp:
        yield (0, 0, 0)
        return
    if ref and hyp:
        for s, d, i in all_alignments(ref[1:], hyp[1:]):
            yield (s + (ref[0] != hyp[0]), d, i)
    if ref:
        for s, d, i in all_alignments(ref[1:], hyp):
            yield (s, d + 1, i)
    if hyp:
        for s, d, i in all_alignments(ref, hyp[1:]):
            yield (s, d, i + 1)


def random_pair(rng, alphabet="abc", max_len=8):
    ref = [alphabet[k] for k in rng.integers(0, len(alphabet), rng.integers(0, max_len + 1))]
    hyp = [alphabet[k] for k in rng.integers(0, len(alphabet), rng.integers(0, max_len + 1))]
    return ref, hyp


# ---------------------------------------------------------------- normalize

def test_basic_normalization():
    assert normalize_text("Hello, WORLD!") == "hello world"
    assert normalize_text("") == ""
    assert normalize_text("   \t ") == ""


def test_contraction_and_hesitation_example():
    cfg = NormalizationConfig(contraction_table={"do not": "don't"}, hesitation_set=frozenset({"um"}))
    assert normalize_text("Um, I do not know", cfg) == "i don't know"


def test_apostrophes():
    assert normalize_text("It's the dogs' 'toy'") == "it's the dogs toy"
    assert normalize_text("rock 'n' roll") == "rock n roll"


def test_longest_match_first():
    cfg = NormalizationConfig(contraction_table={"i am": "i'm", "i am not": "i ain't"})
    assert normalize_text("I am not here", cfg) == "i ain't here"
    assert normalize_text("I am here", cfg) == "i'm here"


def test_overlapping_phrases_prefer_the_longer_reach():
    assert normalize_text("They will not call") == "they won't call"
    assert normalize_text("it is not") == "it isn't"
    assert normalize_text("they will go") == "they'll go"
    cfg = NormalizationConfig(contraction_table={"a b": "X", "b c d": "Y"})
    assert normalize_text("a b c d", cfg) == "a Y"
    assert normalize_text("a b c", cfg) == "X c"


def test_hesitation_inside_phrase_is_idempotent():
    once = normalize_text("do um not")
    assert once == "don't"
    assert normalize_text(once) == once


def test_default_tables_loaded():
    assert {"um", "uh", "hmm", "mhm", "mm", "er", "ah", "huh", "eh"} <= load_hesitations()
    table = load_contractions()
    for k, v in {"do not": "don't", "cannot": "can't", "it is": "it's", "i am": "i'm",
                 "will not": "won't"}.items():
        assert table[k] == v
    assert all(k == k.lower() for k in table)
    assert all(" " not in h for h in load_hesitations())


def test_switches_off():
    cfg = NormalizationConfig(lowercase=False, strip_punctuation=False)
    assert normalize_text("Hi,  There!", cfg) == "Hi, There!"


def test_plugin_stage():
    cfg = NormalizationConfig(plugins=(lambda t: t.replace("10", "ten"),))
    assert normalize_text("Grew 10 percent", cfg) == "grew ten percent"


def test_load_config(tmp_path):
    p = tmp_path / "norm.json"
    p.write_text(json.dumps({"contractions": {"we are": "we're"}, "hesitations": ["so"]}))
    cfg = load_config(p)
    assert normalize_text("So we are done", cfg) == "we're done"


_pieces = list("abcdoINTmu' ,.!?-\t\n_é") + ["do", "not", "um", "it", "is", "will", "they", "would", "you",
                                                    "cannot", "can", "I'm", "am", "let", "us"]
_text = st.lists(st.sampled_from(_pieces), max_size=30).map("".join)


@given(_text)
@settings(max_examples=1500)
def test_idempotent(t):
    once = normalize_text(t)
    assert normalize_text(once) == once


@given(st.text(max_size=40))
def test_total_on_arbitrary_unicode(t):
    out = normalize_text(t)
    assert out == out.strip() and "  " not in out


# ---------------------------------------------------------------- WER

def test_wer_examples():
    assert word_error_rate("the cat sat".split(), "the cat sat".split()).wer == 0
    b = word_error_rate("a b c d".split(), "a x c".split())
    assert (b.substitutions, b.deletions, b.insertions, b.wer) == (1, 1, 0, 0.5)
    b = word_error_rate(["a"], "a b c".split())
    assert (b.insertions, b.wer) == (2, 2.0)


def test_example_matches_exhaustive_enumeration():
    ref, hyp = "a b c d".split(), "a x c".split()
    options = set(all_alignments(ref, hyp))
    best = min(sum(o) for o in options)
    assert best == 2
    # (1, 1, 0) is the only optimum without both an insertion and a deletion
    assert {o for o in options if sum(o) == best} == {(1, 1, 0)}


def test_empty_reference():
    with pytest.raises(EmptyReference):
        word_error_rate([], ["x"])


def test_tie_break_prefers_substitution_then_insertion():
    # cost-2 alignments of "a b" vs "b c" include (2,0,0) and (0,1,1)
    b = word_error_rate("a b".split(), "b c".split())
    assert (b.substitutions, b.deletions, b.insertions) == (2, 0, 0)


def _check_tie_break(ref, hyp, counts):
    # Among all optimal alignments, the returned one maximises substitutions,
    # then insertions.
    best = sum(counts)
    opts = [o for o in set(all_alignments(ref, hyp)) if sum(o) == best]
    assert counts == max(opts, key=lambda o: (o[0], o[2]))


def test_tie_break_against_enumeration():
    rng = np.random.default_rng(12)
    for _ in range(300):
        ref, hyp = random_pair(rng, max_len=4)
        counts = wer_mod.align_counts(ref, hyp)
        assert sum(counts) == edit_distance(tuple(ref), tuple(hyp))
        _check_tie_break(ref, hyp, counts)


def test_oracle_equivalence():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        ref, hyp = random_pair(rng)
        s, d, i = wer_mod.align_counts(ref, hyp)
        assert s + d + i == edit_distance(tuple(ref), tuple(hyp))
        assert i - d == len(hyp) - len(ref)
        assert s + d <= len(ref)


def test_backends_agree():
    rng = np.random.default_rng(7)
    for _ in range(500):
        ref, hyp = random_pair(rng, alphabet="abcdef", max_len=20)
        r, h = wer_mod._encode(ref, hyp)
        assert wer_mod._kernel.align_counts(r, h) == _align_py.align_counts(r, h)


def test_backend_reported():
    assert wer_mod.BACKEND in ("compiled", "python")


@given(st.lists(st.sampled_from("abc"), min_size=1, max_size=10),
       st.lists(st.sampled_from("abc"), max_size=10))
def test_wer_properties(ref, hyp):
    assert word_error_rate(ref, ref).wer == 0
    b = word_error_rate(ref, hyp)
    assert b.wer >= abs(len(ref) - len(hyp)) / len(ref)
    assert b.wer == (b.substitutions + b.deletions + b.insertions) / len(ref)
    assert b.substitutions + b.deletions <= len(ref)


def test_corpus_pooling():
    pairs = [("a b c d".split(), "a x c d".split()), ("p q".split(), "p".split())]
    b = corpus_wer(pairs)
    assert (b.errors, b.ref_len) == (2, 6)
    assert math.isclose(b.wer, 2 / 6)
    single = corpus_wer([pairs[0]])
    assert single == word_error_rate(*pairs[0])


def test_corpus_empty_reference_adds_insertions():
    b = corpus_wer([("a".split(), "a".split()), ([], ["x", "y"])])
    assert (b.insertions, b.ref_len) == (2, 1)
    with pytest.raises(EmptyReference):
        corpus_wer([([], ["x"]), ([], [])])


def test_breakdown_zero_ref_wer_errors():
    with pytest.raises(EmptyReference):
        WerBreakdown(0, 0, 2, 0).wer


def test_fixture_transcripts():
    def read(p):
        return dict(line.split("\t", 1) for line in p.read_text().splitlines())

    ref, hyp = read(FIXTURES / "ref.txt"), read(FIXTURES / "hyp.txt")
    total = [0, 0]
    for uid in ref:
        r = normalize_text(ref[uid]).split()
        h = normalize_text(hyp[uid]).split()
        total[0] += edit_distance(tuple(r), tuple(h))
        total[1] += len(r)
    pooled = corpus_wer((normalize_text(ref[u]).split(), normalize_text(hyp[u]).split()) for u in ref)
    assert [pooled.errors, pooled.ref_len] == total


# ---------------------------------------------------------------- aggregate

def _published():
    for name in ("published_conformer_ctc.json", "published_whisper_small_en.json"):
        raw = json.loads((FIXTURES / name).read_text())
        for key, row in raw["rows"].items():
            yield name, key, [row["errors"][d] for d in raw["domains"]], raw["printed_geometric_mean"][key]


@pytest.mark.parametrize("source,row,values,printed", list(_published()))
def test_published_geometric_means(source, row, values, printed):
    assert abs(geometric_mean(values) - float(printed)) <= 0.05


def test_published_rows_count():
    assert len(list(_published())) == 16


def test_paper_examples():
    assert abs(geometric_mean([5.47, 28.6, 70.7, 2.15, 4.48]) - 10.1) <= 0.05
    assert abs(geometric_mean([3.04, 18.2, 45.2, 2.18, 4.86]) - 7.67) <= 0.05
    assert geometric_mean([4.2, 4.2, 4.2]) == 4.2


@pytest.mark.parametrize("bad", [[], [1.0, 0.0], [2.0, -1.0]])
def test_geometric_mean_domain(bad):
    with pytest.raises(ValueError):
        geometric_mean(bad)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=12), st.floats(1e-3, 1e3))
def test_geometric_mean_properties(values, c):
    g = geometric_mean(values)
    assert min(values) * (1 - 1e-12) <= g <= max(values) * (1 + 1e-12)
    assert math.isclose(geometric_mean(reversed(values)), g, rel_tol=1e-15)
    assert math.isclose(geometric_mean([c * v for v in values]), c * g, rel_tol=1e-12)


def test_format_sig():
    assert format_sig(10.0) == "10.0"
    assert format_sig(7.6712) == "7.67"
    assert format_sig(0.0) == "0.00"
    assert format_sig(123.4) == "123"
    assert format_sig(None) == "n/a"


def test_eval_report():
    rep = eval_report({
        "pre": WerBreakdown(4, 0, 0, 100),
        "other": WerBreakdown(1, 0, 0, 100),
    })
    assert rep.percentages == {"pre": 4.0, "other": 1.0}
    assert math.isclose(rep.geometric_mean, 2.0)
    single = eval_report({"x": WerBreakdown(3, 1, 0, 50)})
    assert math.isclose(single.geometric_mean, 8.0)
    with pytest.raises(ValueError):
        eval_report({})


def test_eval_report_zero_wer_is_undefined():
    rep = eval_report({"a": WerBreakdown(0, 0, 0, 10), "b": WerBreakdown(1, 0, 0, 10)})
    assert rep.geometric_mean is None
    assert rep.as_dict()["geometric_mean"] is None
    assert "n/a" in rep.render()


def test_python_fallback_selected_without_extension(monkeypatch):
    import importlib.util
    import sys

    import aode.eval

    monkeypatch.setitem(sys.modules, "aode.eval._calign", None)  # makes the import fail
    monkeypatch.delattr(aode.eval, "_calign", raising=False)
    spec = importlib.util.spec_from_file_location("aode.eval._wer_probe", wer_mod.__file__)
    probe = importlib.util.module_from_spec(spec)
    monkeypatch.setitem(sys.modules, spec.name, probe)
    spec.loader.exec_module(probe)
    assert probe.BACKEND == "python"
    assert probe._kernel is _align_py
    assert probe.align_counts("a b c d".split(), "a x c".split()) == (1, 1, 0)
