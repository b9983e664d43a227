import json

import numpy as np
import pytest

from scanmask import (
    DataError,
    InvalidInputError,
    LineMask,
    gen_phantom,
    gen_smaps,
    load_bundle,
    load_corpus,
    make_bundle,
    nmse,
    save_bundle,
    simulate_kspace,
)
from scanmask.core import forward
from scanmask.phantom import coil_combine, generate_corpus


class TestPhantom:
    def test_deterministic(self):
        np.testing.assert_array_equal(gen_phantom(5, 32, 32), gen_phantom(5, 32, 32))

    def test_normalized_magnitude(self):
        x = gen_phantom(5, 32, 32)
        assert np.abs(x).max() == pytest.approx(1.0, abs=1e-12)

    def test_phase_bounded(self):
        x = gen_phantom(9, 32, 32)
        assert np.abs(np.angle(x[np.abs(x) > 0])).max() <= np.pi / 2 + 1e-12

    def test_distinct_seeds_distinct_anatomy(self):
        a, b = gen_phantom(1, 32, 32), gen_phantom(2, 32, 32)
        assert nmse(a, b) > 0.01

    def test_too_small_rejected(self):
        with pytest.raises(InvalidInputError):
            gen_phantom(0, 8, 8)


class TestSmaps:
    def test_single_coil_unit_magnitude(self):
        maps, support = gen_smaps(0, 1, 32, 32)
        assert np.allclose(np.abs(maps[0])[support], 1.0, atol=1e-6)

    def test_rss_normalized(self):
        maps, support = gen_smaps(3, 4, 32, 32)
        rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
        assert np.abs(rss[support] - 1.0).max() < 1e-6

    def test_spatial_smoothness(self):
        maps, _ = gen_smaps(3, 4, 64, 64)
        for c in range(4):
            gy, gx = np.gradient(maps[c].real), np.gradient(maps[c].imag)
            grad = np.sqrt(gy[0] ** 2 + gy[1] ** 2 + gx[0] ** 2 + gx[1] ** 2)
            assert grad.max() < 0.2

    def test_coil_count_validated(self):
        with pytest.raises(InvalidInputError):
            gen_smaps(0, 0, 16, 16)


class TestSimulateKspace:
    def test_noiseless_equals_forward(self):
        x = gen_phantom(1, 16, 16)
        maps, _ = gen_smaps(2, 3, 16, 16)
        np.testing.assert_array_equal(
            simulate_kspace(x, maps, 0.0, 99), forward(x, maps, LineMask.full(16))
        )

    def test_seeded_determinism(self):
        x = gen_phantom(1, 16, 16)
        maps, _ = gen_smaps(2, 3, 16, 16)
        np.testing.assert_array_equal(
            simulate_kspace(x, maps, 0.01, 7), simulate_kspace(x, maps, 0.01, 7)
        )

    def test_noise_energy_scaling(self):
        x = gen_phantom(1, 16, 16)
        maps, _ = gen_smaps(2, 3, 16, 16)
        sigma = 0.02
        clean = simulate_kspace(x, maps, 0.0, 0)
        energies = [
            np.sum(np.abs(simulate_kspace(x, maps, sigma, s) - clean) ** 2)
            for s in range(100)
        ]
        expected = 2 * sigma**2 * 3 * 16 * 16
        assert np.mean(energies) == pytest.approx(expected, rel=0.05)


class TestBundle:
    def test_gt_matches_phantom_when_noiseless(self):
        b = make_bundle(4, 32, 32, 4, 0.0)
        assert nmse(gen_phantom(4, 32, 32), b.gt) < 1e-12

    def test_gt_consistent_with_kspace(self):
        b = make_bundle(4, 32, 32, 4, 0.005)
        rebuilt = coil_combine(b.kspace, b.smaps)
        assert np.linalg.norm(rebuilt - b.gt) / np.linalg.norm(b.gt) < 1e-6

    def test_save_load_round_trip(self, tmp_path):
        b = make_bundle(8, 32, 32, 2, 0.01)
        save_bundle(b, tmp_path / "scan")
        loaded = load_bundle(tmp_path / "scan")
        assert loaded.scan_id == b.scan_id
        assert loaded.meta == b.meta
        # arrays equal at 32-bit stored precision
        np.testing.assert_array_equal(loaded.kspace, b.kspace.astype(np.complex64))
        np.testing.assert_array_equal(loaded.gt, b.gt.astype(np.complex64))
        # loaded bundle keeps the self-consistency invariant
        rebuilt = coil_combine(loaded.kspace, loaded.smaps)
        assert np.linalg.norm(rebuilt - loaded.gt) / np.linalg.norm(loaded.gt) < 1e-6

    def test_truncated_binary_rejected(self, tmp_path):
        b = make_bundle(8, 32, 32, 2, 0.0)
        save_bundle(b, tmp_path / "scan")
        ksp = tmp_path / "scan" / "kspace.bin"
        ksp.write_bytes(ksp.read_bytes()[:-16])
        with pytest.raises(DataError):
            load_bundle(tmp_path / "scan")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError):
            load_bundle(tmp_path / "nope")


class TestCorpus:
    def test_index_split(self, tmp_path):
        index = generate_corpus(tmp_path, 3, 2, 32, 32, 2, 0.0, seed=0)
        assert len(index["train"]) == 3 and len(index["test"]) == 2
        train, test = load_corpus(tmp_path)
        assert [b.scan_id for b in train] == index["train"]
        assert [b.scan_id for b in test] == index["test"]

    def test_deterministic_bytes(self, tmp_path):
        generate_corpus(tmp_path / "a", 2, 0, 32, 32, 2, 0.005, seed=5)
        generate_corpus(tmp_path / "b", 2, 0, 32, 32, 2, 0.005, seed=5)
        for sid in json.loads((tmp_path / "a" / "index.json").read_text())["train"]:
            for f in ["kspace.bin", "smaps.bin", "gt.bin"]:
                assert (tmp_path / "a" / sid / f).read_bytes() == (
                    tmp_path / "b" / sid / f
                ).read_bytes()
