import numpy as np
import pytest

from scanmask import (
    InvalidInputError,
    LineMask,
    OptimConfig,
    build_library,
    central_lines,
    load_library,
    lowfreq_feature,
    make_bundle,
    make_vdrs_mask,
    predict_mask,
    save_library,
)
from scanmask.core import adjoint, apply_mask


def library_of(n, width=32, nc=2, budget=8, lowfreq=4, seed0=300):
    fixed = frozenset(central_lines(width, lowfreq))
    cfg = OptimConfig(budget=budget, n_lowfreq=lowfreq)
    bundles = [make_bundle(seed0 + i, width, width, nc, 0.0) for i in range(n)]
    masks = [make_vdrs_mask(width, cfg, 2.0, seed0 + i) for i in range(n)]
    return bundles, build_library(list(zip(bundles, masks)), fixed)


class TestLowfreqFeature:
    def test_all_columns_full_support_recovers_gt(self):
        b = make_bundle(1, 32, 32, 4, 0.0)
        feat = lowfreq_feature(b.kspace, b.smaps, set(range(32)))
        np.testing.assert_allclose(feat, b.gt, atol=1e-10)

    def test_zero_kspace_zero_feature(self):
        b = make_bundle(1, 16, 16, 2, 0.0)
        feat = lowfreq_feature(np.zeros_like(b.kspace), b.smaps, {7, 8})
        assert np.abs(feat).max() == 0

    def test_composition_oracle(self):
        # two independent call paths: helper vs explicit mask-then-adjoint
        b = make_bundle(2, 32, 32, 2, 0.0)
        fixed = {14, 15, 16, 17}
        mask = LineMask(32, tuple(sorted(fixed)), frozenset(fixed), len(fixed))
        expected = adjoint(apply_mask(b.kspace, mask), b.smaps, LineMask.full(32))
        np.testing.assert_allclose(
            lowfreq_feature(b.kspace, b.smaps, fixed), expected, atol=1e-12
        )

    def test_empty_fixed_rejected(self):
        b = make_bundle(1, 16, 16, 2, 0.0)
        with pytest.raises(InvalidInputError):
            lowfreq_feature(b.kspace, b.smaps, set())


class TestBuildLibrary:
    def test_empty_train_rejected(self):
        with pytest.raises(InvalidInputError):
            build_library([], {1, 2})

    def test_single_entry(self):
        _, lib = library_of(1)
        assert len(lib.entries) == 1

    def test_inconsistent_fixed_block_rejected(self):
        b = make_bundle(0, 16, 16, 2, 0.0)
        mask = LineMask(16, (0, 1, 2, 3), frozenset(), 4)
        with pytest.raises(InvalidInputError):
            build_library([(b, mask)], {7, 8})

    def test_incomplete_mask_rejected(self):
        b = make_bundle(0, 16, 16, 2, 0.0)
        mask = LineMask(16, (7, 8), frozenset({7, 8}), 4)
        with pytest.raises(InvalidInputError):
            build_library([(b, mask)], {7, 8})

    def test_serialization_round_trip(self, tmp_path):
        _, lib = library_of(3)
        save_library(lib, tmp_path / "lib")
        loaded = load_library(tmp_path / "lib")
        assert loaded.width == lib.width and loaded.fixed == lib.fixed
        for a, b in zip(loaded.entries, lib.entries):
            assert a.scan_id == b.scan_id
            assert a.mask == b.mask
            # bit-exact at the stored 32-bit precision
            np.testing.assert_array_equal(a.feature, b.feature.astype(np.complex64))


class TestPredict:
    def test_training_scan_self_retrieval(self):
        bundles, lib = library_of(5)
        for i, b in enumerate(bundles):
            mask, neighbor, dist = predict_mask(b.kspace, b.smaps, lib)
            assert neighbor == lib.entries[i].scan_id
            assert dist == 0.0
            assert mask == lib.entries[i].mask

    def test_singleton_library(self):
        bundles, lib = library_of(1)
        other = make_bundle(999, 32, 32, 2, 0.0)
        mask, neighbor, dist = predict_mask(other.kspace, other.smaps, lib)
        assert neighbor == lib.entries[0].scan_id and dist > 0

    def test_brute_force_argmin_agreement(self):
        bundles, lib = library_of(10)
        test = make_bundle(777, 32, 32, 2, 0.0)
        mask, neighbor, dist = predict_mask(test.kspace, test.smaps, lib)
        feat = lowfreq_feature(test.kspace, test.smaps, lib.fixed)
        dists = [
            np.linalg.norm(feat - e.feature.astype(np.complex128)) for e in lib.entries
        ]
        idx = int(np.argmin(dists))
        assert neighbor == lib.entries[idx].scan_id
        assert dist == pytest.approx(dists[idx], rel=1e-12)

    def test_distance_properties(self):
        bundles, lib = library_of(4)
        f0 = lib.entries[0].feature
        f1 = lib.entries[1].feature
        assert np.linalg.norm(f0 - f1) == pytest.approx(np.linalg.norm(f1 - f0))
        assert np.linalg.norm(f0 - f0) == 0

    def test_permutation_invariance(self):
        bundles, lib = library_of(6)
        test = make_bundle(555, 32, 32, 2, 0.0)
        _, neighbor, dist = predict_mask(test.kspace, test.smaps, lib)
        from scanmask.nnpredict import MaskLibrary

        permuted = MaskLibrary(lib.width, lib.fixed, list(reversed(lib.entries)))
        _, neighbor_p, dist_p = predict_mask(test.kspace, test.smaps, permuted)
        assert neighbor_p == neighbor and dist_p == pytest.approx(dist, rel=1e-12)

    def test_empty_library_rejected(self):
        from scanmask.nnpredict import MaskLibrary

        b = make_bundle(0, 16, 16, 2, 0.0)
        with pytest.raises(InvalidInputError):
            predict_mask(b.kspace, b.smaps, MaskLibrary(16, frozenset({7, 8}), []))

    def test_predicted_mask_keeps_invariants(self):
        bundles, lib = library_of(5)
        test = make_bundle(321, 32, 32, 2, 0.0)
        mask, _, _ = predict_mask(test.kspace, test.smaps, lib)
        assert mask.complete
        assert lib.fixed <= set(mask.lines)
