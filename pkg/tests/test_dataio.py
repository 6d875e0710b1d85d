import numpy as np
import pytest

from driveintent.dataio import (
    BRANCH_KINDS,
    Clip,
    ClipTooShortError,
    DatasetManifest,
    FoldPlan,
    HorizonSpec,
    ManifestRecord,
    StratificationError,
    compute_flow_standin,
    holdout_split,
    sample_frames,
    sample_indices,
    stratified_kfold,
    truncate_to_horizon,
)
from driveintent.labels import CLASS_ORDER, ManeuverLabel

from conftest import random_frames


def _manifest(n_per_class, n_classes=5):
    records = []
    i = 0
    for c in range(n_classes):
        for _ in range(n_per_class[c] if isinstance(n_per_class, list) else n_per_class):
            records.append(
                ManifestRecord(
                    clip_id=f"c{i:04d}",
                    label=CLASS_ORDER[c],
                    driver_id=f"d{i % 10:02d}",
                    branch_dirs={k: f"c{i:04d}/{k}" for k in BRANCH_KINDS},
                )
            )
            i += 1
    return DatasetManifest(records=records)


class TestSampleFrames:
    def test_identity_case(self):
        assert sample_indices(15, 15) == list(range(15))

    def test_uniform_150(self):
        # oracle: round-half-up of i*149/14 for i in 0..14, evaluated once
        # and frozen here
        expected = [0, 11, 21, 32, 43, 53, 64, 75, 85, 96, 106, 117, 128, 138, 149]
        assert sample_indices(150, 15) == expected

    def test_matches_oracle_for_many_lengths(self):
        from fractions import Fraction

        for L in range(15, 400, 7):
            oracle = [int(Fraction(i * (L - 1), 14) + Fraction(1, 2)) for i in range(15)]
            assert sample_indices(L, 15) == oracle

    def test_too_short(self):
        with pytest.raises(ClipTooShortError, match="clip too short"):
            sample_indices(14, 15)

    def test_monotone_with_endpoints(self, rng):
        for L in [15, 16, 23, 77, 300]:
            idx = sample_indices(L, 15)
            assert idx[0] == 0 and idx[-1] == L - 1
            assert all(a < b for a, b in zip(idx, idx[1:]))

    def test_sample_frames_preserves_order(self, rng):
        raw = random_frames(rng, n=40)
        out = sample_frames(raw, 15)
        assert out.shape[0] == 15
        assert np.array_equal(out[0], raw[0]) and np.array_equal(out[-1], raw[-1])


class TestHorizon:
    def test_observed_frames(self):
        assert [HorizonSpec(t).observed_frames for t in (0, -1, -2, -3, -4)] == [
            15, 12, 9, 6, 3,
        ]

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            HorizonSpec(1)

    def test_truncate_full_is_identity(self, rng):
        clip = Clip(
            id="x", label=ManeuverLabel.LEFT_TURN, driver_id="d0",
            branches={"inside_appearance": random_frames(rng)},
        )
        out = truncate_to_horizon(clip, HorizonSpec(0))
        assert np.array_equal(out.branches["inside_appearance"], clip.branches["inside_appearance"])
        assert out.label == clip.label and out.id == clip.id

    def test_truncate_keeps_prefix(self, rng):
        frames = random_frames(rng)
        clip = Clip(
            id="x", label=ManeuverLabel.GO_STRAIGHT, driver_id="d0",
            branches={"inside_appearance": frames},
        )
        out = truncate_to_horizon(clip, HorizonSpec(-4))
        assert out.branches["inside_appearance"].shape[0] == 3
        assert np.array_equal(out.branches["inside_appearance"], frames[:3])
        out2 = truncate_to_horizon(clip, HorizonSpec(-2))
        assert out2.branches["inside_appearance"].shape[0] == 9


class TestHoldout:
    def test_paper_sizes(self):
        manifest = _manifest(91)  # 455 clips
        train, test = holdout_split(manifest, 0.8, seed=1)
        assert len(train) == 364 and len(test) == 91

    def test_small_balanced(self):
        manifest = _manifest(2)
        train, test = holdout_split(manifest, 0.8, seed=1)
        assert len(train) == 8 and len(test) == 2
        for label, count in train.class_counts().items():
            assert count in (1, 2)

    def test_deterministic(self):
        manifest = _manifest(10)
        a = holdout_split(manifest, 0.7, seed=42)
        b = holdout_split(manifest, 0.7, seed=42)
        assert [r.clip_id for r in a[0].records] == [r.clip_id for r in b[0].records]
        c = holdout_split(manifest, 0.7, seed=43)
        assert {r.clip_id for r in a[0].records} != {r.clip_id for r in c[0].records}

    def test_stratified_within_one(self):
        manifest = _manifest([10, 13, 7, 9, 20])
        train, test = holdout_split(manifest, 0.75, seed=0)
        for label, total in manifest.class_counts().items():
            got = train.class_counts()[label]
            assert abs(got - 0.75 * total) <= 1

    def test_class_too_small(self):
        manifest = _manifest([1, 5, 5, 5, 5])
        with pytest.raises(StratificationError, match="class too small to stratify"):
            holdout_split(manifest, 0.8, seed=0)

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            holdout_split(_manifest(2), 1.0, seed=0)


class TestKFold:
    def test_paper_fold_sizes(self):
        plan = stratified_kfold(_manifest(91), 5, seed=0)
        assert plan.fold_sizes() == [91] * 5

    def test_two_per_class(self):
        plan = stratified_kfold(_manifest(2), 2, seed=0)
        manifest = _manifest(2)
        for fold in range(2):
            ids = plan.fold_ids(fold)
            labels = [r.label for r in manifest.records if r.clip_id in ids]
            assert sorted(l.value for l in labels) == sorted(l.value for l in CLASS_ORDER)

    def test_partition_property(self):
        manifest = _manifest([7, 8, 9, 10, 11])
        plan = stratified_kfold(manifest, 5, seed=9)
        all_ids = set()
        for fold in range(5):
            ids = plan.fold_ids(fold)
            assert not (all_ids & ids)
            all_ids |= ids
        assert all_ids == {r.clip_id for r in manifest.records}
        assert sum(plan.fold_sizes()) == len(manifest)

    def test_deterministic(self):
        manifest = _manifest(4)
        assert stratified_kfold(manifest, 4, seed=5).assignment == stratified_kfold(
            manifest, 4, seed=5
        ).assignment

    def test_insufficient(self):
        with pytest.raises(StratificationError, match="insufficient clips"):
            stratified_kfold(_manifest(2), 3, seed=0)


class TestFlowStandin:
    def test_static_clip_is_flat_zero(self):
        frames = np.full((4, 8, 8, 3), 77, dtype=np.uint8)
        flow = compute_flow_standin(frames)
        assert flow.shape == frames.shape
        assert flow.max() == 0

    def test_length_preserved(self, rng):
        frames = random_frames(rng, n=9)
        assert compute_flow_standin(frames).shape[0] == 9

    def test_first_frame_duplicates_second(self, rng):
        flow = compute_flow_standin(random_frames(rng, n=5))
        assert np.array_equal(flow[0], flow[1])

    def test_single_frame_error(self, rng):
        with pytest.raises(ValueError):
            compute_flow_standin(random_frames(rng, n=1))

    def test_moving_marker_has_more_red_energy(self):
        static = np.full((6, 16, 16, 3), 30, dtype=np.uint8)
        moving = static.copy()
        for t in range(6):
            moving[t, 7:9, 2 + 2 * t : 4 + 2 * t] = 220
        red_moving = compute_flow_standin(moving)[..., 0].mean()
        red_static = compute_flow_standin(static)[..., 0].mean()
        assert red_moving > red_static


class TestManifestIO:
    def test_roundtrip(self, tmp_path):
        manifest = _manifest(2)
        manifest.save(tmp_path / "manifest.csv")
        loaded = DatasetManifest.load(tmp_path / "manifest.csv")
        assert len(loaded) == len(manifest)
        assert loaded.records[0].branch_dirs == manifest.records[0].branch_dirs
        assert loaded.records[0].label == manifest.records[0].label

    def test_duplicate_ids_rejected(self):
        rec = ManifestRecord("a", ManeuverLabel.GO_STRAIGHT, "d0", {})
        with pytest.raises(ValueError, match="duplicate"):
            DatasetManifest(records=[rec, rec])
