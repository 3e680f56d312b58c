import hashlib
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scriptorium.dataset import (
    LineRecord,
    ManifestError,
    SplitError,
    SplitManifest,
    SynthConfig,
    choose_separate_codices,
    codex_look,
    generate_synthetic,
    load_manifest,
    make_alphabet,
    make_splits,
    make_styles,
    render_line,
)
from scriptorium.imaging import read_image, to_grayscale


def write_csv(path, rows, header="line_id,image_path,scribe,codex,page"):
    path.write_text("\n".join([header, *rows]) + "\n")


def test_load_manifest(tmp_path):
    for name in ("a.png", "b.png", "c.png"):
        (tmp_path / name).write_bytes(b"")
    write_csv(tmp_path / "m.csv", ["L1,a.png,S0,C0,p0", "L2,b.png,S0,C0,p0", "L3,c.png,S1,C1,"])
    recs = load_manifest(tmp_path / "m.csv")
    assert [r.line_id for r in recs] == ["L1", "L2", "L3"]
    assert recs[0].image_path == tmp_path / "a.png"
    assert recs[0].page_key == "C0/p0" and recs[2].page_key is None


def test_load_manifest_errors(tmp_path):
    write_csv(tmp_path / "empty.csv", [])
    assert load_manifest(tmp_path / "empty.csv") == []
    (tmp_path / "a.png").write_bytes(b"")
    write_csv(tmp_path / "dup.csv", ["L1,a.png,S0,C0,p0", "L1,a.png,S0,C0,p0"])
    with pytest.raises(ManifestError, match="'L1'"):
        load_manifest(tmp_path / "dup.csv")
    write_csv(tmp_path / "cols.csv", ["L1,a.png,S0"], header="line_id,image_path,scribe")
    with pytest.raises(ManifestError, match="codex"):
        load_manifest(tmp_path / "cols.csv")
    write_csv(tmp_path / "img.csv", ["L1,a.png,S0,C0,p0", "L2,missing.png,S0,C0,p0"])
    with pytest.raises(ManifestError, match="row 3.*missing.png") as exc:
        load_manifest(tmp_path / "img.csv")
    assert len(exc.value.problems) == 1


def fake_records(spec):
    """spec: {(scribe, codex): n_lines}"""
    recs = []
    for (scribe, codex), n in sorted(spec.items()):
        recs += [LineRecord(f"{codex}-{i:04d}", Path("x.png"), scribe, codex, f"p{i // 10}") for i in range(n)]
    return recs


def test_split_example():
    recs = fake_records({("S0", "A1"): 100, ("S0", "A2"): 100, ("S0", "A3"): 40,
                         ("S1", "B1"): 100, ("S1", "B2"): 100, ("S1", "B3"): 30})
    split = make_splits(recs, {"A3", "B3"}, per_class_line_cap=100, seed=3)
    codex_of = {r.line_id: r.codex for r in recs}
    scribe_of = {r.line_id: r.scribe for r in recs}
    for scribe in ("S0", "S1"):
        counts = [sum(scribe_of[l] == scribe for l in split.partition(p)) for p in ("train", "validation", "test_A")]
        assert counts == [60, 20, 20]
        chosen = [l for p in ("train", "validation", "test_A") for l in split.partition(p) if scribe_of[l] == scribe]
        per_codex = Counter(codex_of[l] for l in chosen)
        assert max(per_codex.values()) - min(per_codex.values()) <= 1
    assert len(split.test_B) == 70 and {codex_of[l] for l in split.test_B} == {"A3", "B3"}
    assert split.separate_codices == ["A3", "B3"] and "A3" not in split.training_codices
    again = make_splits(recs, {"A3", "B3"}, per_class_line_cap=100, seed=3)
    assert again.to_json() == split.to_json()


def test_split_needs_separate_codex():
    recs = fake_records({("S0", "A1"): 10, ("S0", "A2"): 10, ("S1", "B1"): 10, ("S1", "B2"): 10})
    with pytest.raises(SplitError, match="S1"):
        make_splits(recs, {"A2"})


def test_split_caps_and_uneven_codices():
    recs = fake_records({("S0", "A1"): 5, ("S0", "A2"): 50, ("S0", "A3"): 50, ("S0", "A4"): 20})
    split = make_splits(recs, {"A4"}, per_class_line_cap=41, test_b_cap=7, seed=0)
    chosen = split.train + split.validation + split.test_A
    per_codex = Counter(l.split("-")[0] for l in chosen)
    assert per_codex == {"A1": 5, "A2": 18, "A3": 18}
    assert len(split.test_B) == 7


def test_split_json_roundtrip(tmp_path):
    recs = fake_records({("S0", "A1"): 10, ("S0", "A2"): 10})
    split = make_splits(recs, {"A2"}, seed=1)
    split.save(tmp_path / "s.json")
    assert SplitManifest.load(tmp_path / "s.json") == split


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_split_discipline(seed):
    rng = np.random.default_rng(seed)
    spec = {}
    for c in range(int(rng.integers(2, 5))):
        for j in range(int(rng.integers(2, 5))):
            spec[(f"S{c}", f"C{c}_{j}")] = int(rng.integers(1, 60))
    recs = fake_records(spec)
    separate = choose_separate_codices(recs, seed)
    cap = int(rng.integers(5, 150))
    split = make_splits(recs, separate, cap, seed)
    codex_of = {r.line_id: r.codex for r in recs}
    scribe_of = {r.line_id: r.scribe for r in recs}
    all_ids = split.train + split.validation + split.test_A + split.test_B
    assert len(all_ids) == len(set(all_ids))
    assert all(codex_of[l] in separate for l in split.test_B)
    assert not any(codex_of[l] in separate for l in split.train + split.validation + split.test_A)
    for scribe in {r.scribe for r in recs}:
        n = [sum(scribe_of[l] == scribe for l in split.partition(p)) for p in ("train", "validation", "test_A")]
        total = sum(n)
        for got, ratio in zip(n, (0.6, 0.2, 0.2)):
            assert abs(got - ratio * total) <= 1


def test_synth_line_ink_separation():
    cfg = SynthConfig(seed=4)
    styles, alphabet = make_styles(7, 4), make_alphabet(4)
    for c, style in enumerate(styles):
        for codex in (f"X{c}a", f"X{c}b"):
            rgb, ink = render_line(style, codex_look(cfg, codex), alphabet, np.random.default_rng(c), 40, 300)
            gray = to_grayscale(rgb)
            assert ink.any() and (~ink).any()
            assert gray[ink].max() <= 135 and gray[~ink].min() > 135


def test_styles_are_distinct():
    styles = make_styles(7, 0)
    assert len(set(styles)) == 7


def test_generate_synthetic(tmp_path):
    cfg = SynthConfig(num_classes=3, codices_per_class=2, lines_per_codex=12, lines_per_page=5, seed=2)
    manifest = generate_synthetic(cfg, tmp_path / "a")
    recs = load_manifest(manifest)
    assert len(recs) == cfg.num_lines == 72
    assert recs[0].image_path.relative_to(tmp_path / "a").parts[:2] == (recs[0].codex, recs[0].page)
    # one scribe per codex; same codex shares the exact parchment tint
    assert len({(r.codex, r.scribe) for r in recs}) == 6
    look = codex_look(cfg, recs[0].codex)
    corners = {tuple(int(v) for v in read_image(r.image_path)[0, -1]) for r in recs if r.codex == recs[0].codex}
    assert all(max(abs(a - b) for a, b in zip(px, look.tint)) <= 20 for px in corners)
    again = generate_synthetic(cfg, tmp_path / "b")

    def digest(root):
        return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
                for p in sorted(root.rglob("*")) if p.is_file()}
    assert digest(tmp_path / "a") == digest(tmp_path / "b")


def test_synth_full_count():
    assert SynthConfig(num_classes=7, codices_per_class=3, lines_per_codex=60).num_lines == 1260


def test_synth_config_validation(tmp_path):
    with pytest.raises(ValueError):
        SynthConfig(codices_per_class=1)
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        generate_synthetic(SynthConfig(num_classes=2, codices_per_class=2, lines_per_codex=1), blocker / "out")


def test_tint_independent_of_class():
    cfg = SynthConfig(seed=9)
    other = SynthConfig(seed=9, styles=tuple(reversed(make_styles(7, 9))))
    assert codex_look(cfg, "C005") == codex_look(other, "C005")
