import numpy as np
import pytest

from rockmap import ArgumentError, BoltSpec, SceneSpec, SetSpec, generate_scene
from rockmap.synth import (
    LABEL_BOLT,
    LABEL_FACET,
    LABEL_FLOOR,
    LABEL_NOISE,
    MIN_BOLT_BASE_SEPARATION,
    load_labels,
    save_labels,
)


def small_spec(**kw):
    base = dict(
        width=4.0, height=3.0, length=4.0,
        sets=[SetSpec(68.0, 114.0, 2, 0.5)],
        bolts=[BoltSpec((1.0, 1.0, 2.5), (0, 0, 1), 0.1)],
        density=5000.0, noise_sigma=0.001, floor=True, walls=True, seed=3,
    )
    base.update(kw)
    return SceneSpec(**base)


class TestGeneration:
    def test_deterministic(self):
        a, ta = generate_scene(small_spec())
        b, tb = generate_scene(small_spec())
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(ta.kind, tb.kind)

    def test_seed_changes_scene(self):
        a, _ = generate_scene(small_spec())
        b, _ = generate_scene(small_spec(seed=4))
        assert not np.array_equal(a.points, b.points)

    def test_labels_exhaustive_and_consistent(self):
        cloud, truth = generate_scene(small_spec())
        assert truth.kind.shape[0] == len(cloud)
        assert set(np.unique(truth.kind)) <= {LABEL_FLOOR, LABEL_FACET, LABEL_BOLT, LABEL_NOISE}
        # facet points carry set and plane ids, others carry -1
        facet = truth.kind == LABEL_FACET
        assert (truth.set_id[facet] >= 0).all() and (truth.plane_id[facet] >= 0).all()
        assert (truth.set_id[~facet] == -1).all()
        bolt = truth.kind == LABEL_BOLT
        assert (truth.bolt_id[bolt] >= 0).all()
        assert (truth.bolt_id[~bolt] == -1).all()
        assert len(truth.plane_truth) == 2
        assert len(truth.bolt_truth) == 1

    def test_truth_geometry(self):
        cloud, truth = generate_scene(small_spec(noise_sigma=0.0))
        bolt = truth.bolt_truth[0]
        members = truth.bolt_members(0)
        pts = cloud.points[members]
        s = (pts - bolt["base"]) @ np.asarray(bolt["axis"])
        assert s.min() >= -1e-9
        assert s.max() <= bolt["length"] + 1e-9
        radial = pts - np.asarray(bolt["base"]) - s[:, None] * np.asarray(bolt["axis"])
        assert np.abs(np.linalg.norm(radial, axis=1) - bolt["radius"]).max() < 1e-9 + bolt["radius"]

    def test_bolt_conflict_rejected(self):
        too_close = [
            BoltSpec((1.0, 1.0, 2.5), (0, 0, 1), 0.1),
            BoltSpec((1.0, 1.0 + 0.5 * MIN_BOLT_BASE_SEPARATION, 2.5), (0, 0, 1), 0.1),
        ]
        with pytest.raises(ArgumentError):
            generate_scene(small_spec(bolts=too_close))

    def test_bolt_length_validated(self):
        with pytest.raises(ArgumentError):
            small_spec(bolts=[BoltSpec((1, 1, 2.5), (0, 0, 1), 1.5)])

    def test_empty_scene_rejected(self):
        with pytest.raises(ArgumentError):
            generate_scene(small_spec(sets=[], bolts=[], floor=False, walls=False))


class TestLabelSidecar:
    def test_round_trip(self, tmp_path):
        _, truth = generate_scene(small_spec())
        p = tmp_path / "labels.txt"
        save_labels(truth, p)
        back = load_labels(p)
        assert np.array_equal(back.kind, truth.kind)
        assert np.array_equal(back.set_id, truth.set_id)
        assert np.array_equal(back.plane_id, truth.plane_id)
        assert np.array_equal(back.bolt_id, truth.bolt_id)

    def test_bad_record(self, tmp_path):
        p = tmp_path / "labels.txt"
        p.write_text("0 floor 0 0\n")
        from rockmap import ParseError
        with pytest.raises(ParseError):
            load_labels(p)
