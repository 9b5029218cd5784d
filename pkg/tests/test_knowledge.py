"""Configuration recall: keying, persistence, and the soundness replay."""

import pytest

from cddsat.estimator import Status, Verdict, estimate
from cddsat.grid import Grid
from cddsat.knowledge import (
    CacheSoundnessError,
    KnowledgeStore,
    canonical_key,
    lookup,
)

GRID = Grid(cols=6, rows=8)


def _seeds(*pairs):
    return [Verdict.from_status(label, status) for label, status in pairs]


BASE = _seeds(("B2", Status.RED), ("D5", Status.GREEN), ("C3", Status.ORANGE))


def _profile(seeds):
    return estimate(seeds, GRID, phase=2, terminal=True)


# -- keys -----------------------------------------------------------------------

def test_key_ignores_seed_order_and_translation():
    shuffled = [BASE[2], BASE[0], BASE[1]]
    assert canonical_key("demo", BASE, 48) == canonical_key("demo", shuffled, 48)

    shifted = _seeds(("C4", Status.RED), ("E7", Status.GREEN), ("D5", Status.ORANGE))
    assert canonical_key("demo", BASE, 48) == canonical_key("demo", shifted, 48)


def test_key_distinguishes_rotations_statuses_and_scenarios():
    key = canonical_key("demo", BASE, 48)
    # 90-degree rotation: (dc, dr) -> (dr, -dc), re-anchored by the helper.
    rotated = _seeds(("B5", Status.RED), ("E3", Status.GREEN), ("C4", Status.ORANGE))
    assert canonical_key("demo", rotated, 48) != key

    recolored = _seeds(("B2", Status.ORANGE), ("D5", Status.GREEN), ("C3", Status.RED))
    assert canonical_key("demo", recolored, 48) != key
    assert canonical_key("other", BASE, 48) != key
    assert canonical_key("demo", BASE, 56) != key


def test_key_population_buckets():
    exact = canonical_key("demo", BASE, 48)
    assert exact.population_bucket == 48
    bucketed_a = canonical_key("demo", BASE, 48, bucket_width=10)
    bucketed_b = canonical_key("demo", BASE, 41, bucket_width=10)
    assert bucketed_a == bucketed_b
    assert canonical_key("demo", BASE, 50, bucket_width=10) != bucketed_a


def test_key_uses_last_verdict_per_label():
    revised = BASE + _seeds(("B2", Status.GREEN))
    direct = _seeds(("B2", Status.GREEN), ("D5", Status.GREEN), ("C3", Status.ORANGE))
    assert canonical_key("demo", revised, 48) == canonical_key("demo", direct, 48)
    with pytest.raises(ValueError):
        canonical_key("demo", [], 48)


def test_digest_is_stable_and_short():
    key = canonical_key("demo", BASE, 48)
    assert key.digest == canonical_key("demo", list(BASE), 48).digest
    assert len(key.digest) == 16
    int(key.digest, 16)  # hex


# -- store ----------------------------------------------------------------------

def test_store_round_trip_in_memory():
    store = KnowledgeStore()
    key = canonical_key("demo", BASE, GRID.population)
    assert store.lookup(key) is None
    profile = _profile(BASE)
    store.put(key, profile, BASE, GRID, metric="euclidean", step_fraction=1 / 3)
    assert len(store) == 1
    assert lookup(store, key) == profile
    assert store.hit_count(key) == 1
    store.lookup(key)
    assert store.hit_count(key) == 2
    with pytest.raises(ValueError):
        store.flush()  # no backing file


def test_store_survives_a_reload(tmp_path):
    path = tmp_path / "recall.tsv"
    store = KnowledgeStore(path)
    key = canonical_key("demo", BASE, GRID.population)
    profile = _profile(BASE)
    store.put(key, profile, BASE, GRID, metric="euclidean", step_fraction=1 / 3)
    store.flush()

    reloaded = KnowledgeStore(path, verify_hits=True)
    hit = reloaded.lookup(key)
    assert hit is not None
    assert hit.reds == profile.reds
    assert hit.oranges == profile.oranges
    assert hit.greens == profile.greens
    # Float probabilities survive the text round trip exactly, so the
    # verify-on-hit replay above compared them with ==.
    assert dict(hit.p_by_label) == dict(profile.p_by_label)


def test_verify_hits_detects_tampering(tmp_path):
    path = tmp_path / "recall.tsv"
    store = KnowledgeStore(path)
    key = canonical_key("demo", BASE, GRID.population)
    store.put(key, _profile(BASE), BASE, GRID, metric="euclidean", step_fraction=1 / 3)
    store.flush()

    text = path.read_text()
    # Rewrite the stored probability of the red seed B2 (0.75 on disk).
    broken = text.replace("B2:0.75", "B2:0.115")
    assert broken != text
    path.write_text(broken)

    trusting = KnowledgeStore(path)  # without verification the entry loads
    assert trusting.lookup(key) is not None

    checking = KnowledgeStore(path, verify_hits=True)
    with pytest.raises(CacheSoundnessError):
        checking.lookup(key)


def test_corrupt_file_is_rejected_at_load(tmp_path):
    path = tmp_path / "recall.tsv"
    store = KnowledgeStore(path)
    key = canonical_key("demo", BASE, GRID.population)
    store.put(key, _profile(BASE), BASE, GRID, metric="euclidean", step_fraction=1 / 3)
    store.flush()

    # Flip the digest column: the line no longer matches its own key.
    first = path.read_text()
    path.write_text("0" * 16 + first[16:])
    with pytest.raises(ValueError):
        KnowledgeStore(path)

    path.write_text("not a knowledge line\n")
    with pytest.raises(ValueError):
        KnowledgeStore(path)
