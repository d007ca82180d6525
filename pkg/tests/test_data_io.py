"""Loader validation, window tiling and depth rules."""

import numpy as np
import pytest

from wavescreen import dataio
from wavescreen.dataio import DataError

from conftest import write_cohort_files


def _write(tmp_path, lines, name="geno.tsv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _pheno(tmp_path, values, name="pheno.tsv"):
    path = tmp_path / name
    np.savetxt(path, np.asarray(values, dtype=float))
    return str(path)


class TestLoadCohort:
    def test_roundtrip(self, tmp_path, small_cohort, small_phenotype):
        geno, pheno, cov = write_cohort_files(
            tmp_path, small_cohort, small_phenotype,
            covariates=np.ones((small_cohort.n, 1)) * np.arange(small_cohort.n)[:, None],
        )
        cohort = dataio.load_cohort(geno, pheno, cov)
        assert cohort.n == small_cohort.n
        block = cohort.blocks["1"]
        assert block.n_snps == small_cohort.n_snps
        np.testing.assert_array_equal(block.positions, small_cohort.positions)
        np.testing.assert_allclose(block.dosages, small_cohort.dosages, atol=1e-5)
        np.testing.assert_allclose(cohort.phenotype, small_phenotype, atol=1e-12)
        assert cohort.covariates.shape == (small_cohort.n, 1)

    def test_rows_are_sorted_by_position(self, tmp_path):
        geno = _write(tmp_path, [
            "chrom\tpos\tid\tiq\ts1\ts2",
            "1\t300\tc\t1.0\t0\t1",
            "1\t100\ta\t1.0\t1\t2",
            "1\t200\tb\t0.9\t2\t0",
        ])
        cohort = dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))
        block = cohort.blocks["1"]
        np.testing.assert_array_equal(block.positions, [100, 200, 300])
        assert block.snp_ids == ["a", "b", "c"]
        np.testing.assert_array_equal(block.dosages[:, 0], [1, 2, 0])

    def test_low_iq_snps_dropped(self, tmp_path):
        geno = _write(tmp_path, [
            "chrom\tpos\tid\tiq\ts1\ts2",
            "1\t100\ta\t1.0\t1\t2",
            "1\t200\tb\t0.5\t2\t0",
            "1\t300\tc\t0.7\t0\t1",
        ])
        cohort = dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))
        assert cohort.blocks["1"].snp_ids == ["a", "c"]

    def test_duplicate_position_rejected(self, tmp_path):
        geno = _write(tmp_path, [
            "1\t100\ta\t1.0\t1\t2",
            "1\t100\tb\t1.0\t2\t0",
        ])
        with pytest.raises(DataError, match="duplicate position"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))

    def test_dosage_out_of_range(self, tmp_path):
        geno = _write(tmp_path, ["1\t100\ta\t1.0\t1\t2.5"])
        with pytest.raises(DataError, match="outside"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))

    def test_iq_out_of_range(self, tmp_path):
        geno = _write(tmp_path, ["1\t100\ta\t1.5\t1\t2"])
        with pytest.raises(DataError, match="imputation quality"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))

    def test_ragged_dosages(self, tmp_path):
        geno = _write(tmp_path, [
            "1\t100\ta\t1.0\t1\t2",
            "1\t200\tb\t1.0\t2",
        ])
        with pytest.raises(DataError, match="dosages"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))

    def test_phenotype_length_mismatch(self, tmp_path):
        geno = _write(tmp_path, ["1\t100\ta\t1.0\t1\t2"])
        with pytest.raises(DataError, match="phenotype"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0, 2.0]))

    def test_constant_phenotype(self, tmp_path):
        geno = _write(tmp_path, ["1\t100\ta\t1.0\t1\t2"])
        with pytest.raises(DataError, match="zero variance"):
            dataio.load_cohort(geno, _pheno(tmp_path, [1.0, 1.0]))

    def test_covariate_row_mismatch(self, tmp_path):
        geno = _write(tmp_path, ["1\t100\ta\t1.0\t1\t2"])
        cov = _pheno(tmp_path, [1.0, 2.0, 3.0], name="cov.tsv")
        with pytest.raises(DataError, match="covariates"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]), cov)

    def test_empty_genotype_file(self, tmp_path):
        geno = _write(tmp_path, ["chrom\tpos\tid\tiq\ts1"])
        with pytest.raises(DataError, match="no SNP rows"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))

    def test_all_snps_filtered(self, tmp_path):
        geno = _write(tmp_path, ["1\t100\ta\t0.1\t1\t2"])
        with pytest.raises(DataError, match="imputation-quality filter"):
            dataio.load_cohort(geno, _pheno(tmp_path, [0.0, 1.0]))


class TestGridAndDepth:
    def test_grid_exponent(self):
        assert dataio.grid_exponent(1) == 0
        assert dataio.grid_exponent(2) == 1
        assert dataio.grid_exponent(3) == 2
        assert dataio.grid_exponent(1024) == 10
        assert dataio.grid_exponent(1025) == 11

    def test_window_depth_basic(self):
        # 640 SNPs at >= 10 per coefficient: 640/64 = 10 exactly -> depth 6
        assert dataio.window_depth(640, 10.0) == 6
        # slack keeps densities just under nominal: 620/64 = 9.69 >= 9.5
        assert dataio.window_depth(620, 10.0) == 6
        # but clearly too sparse drops a scale
        assert dataio.window_depth(600, 10.0) == 5

    def test_window_depth_capped_at_grid(self):
        # 8 SNPs at 1 per coefficient would give depth 3 = J; capped to J-1
        assert dataio.window_depth(8, 1.0) == 2

    def test_window_depth_too_few_snps(self):
        assert dataio.window_depth(5, 10.0) == -1


def _tiled_cohort(positions):
    from wavescreen.dataio import ChromosomeBlock, CohortData

    m = len(positions)
    block = ChromosomeBlock(
        chromosome="1",
        positions=np.asarray(positions, dtype=np.int64),
        snp_ids=[f"s{i}" for i in range(m)],
        imputation_quality=np.ones(m),
        dosages=np.tile(np.arange(3.0)[:, None], (m // 3 + 1, 4))[:m],
    )
    return CohortData(
        blocks={"1": block},
        phenotype=np.array([0.0, 1.0, 2.0, 3.0]),
        covariates=np.empty((4, 0)),
    )


class TestDefineWindows:
    def test_tiling_and_overlap(self):
        positions = np.arange(0, 100_000, 100)  # 1000 SNPs, dense
        cohort = _tiled_cohort(positions)
        wins = dataio.define_windows(
            cohort, window_bp=20_000, overlap_fraction=0.5,
            max_gap_bp=1_000, min_snps_per_coeff=10,
        )
        assert len(wins) >= 2
        starts = [w.start_bp for w in wins]
        assert starts == sorted(starts)
        assert all(s2 - s1 == 10_000 for s1, s2 in zip(starts, starts[1:]))
        for w in wins:
            assert w.end_bp - w.start_bp == 20_000
            assert w.n_snps == w.snp_end - w.snp_start

    def test_gap_excludes_window(self):
        positions = np.concatenate([
            np.arange(0, 10_000, 100),
            np.arange(50_000, 60_000, 100),
        ])
        cohort = _tiled_cohort(positions)
        wins = dataio.define_windows(
            cohort, window_bp=20_000, overlap_fraction=0.0,
            max_gap_bp=1_000, min_snps_per_coeff=5,
        )
        # every kept window must avoid the 40 kbp hole
        for w in wins:
            inside = positions[(positions >= w.start_bp) & (positions < w.end_bp)]
            assert np.diff(inside).max() <= 1_000

    def test_sparse_window_dropped(self):
        positions = np.arange(0, 100_000, 2_000)  # 50 SNPs over 100 kbp
        cohort = _tiled_cohort(positions)
        wins = dataio.define_windows(
            cohort, window_bp=20_000, overlap_fraction=0.0,
            max_gap_bp=10_000, min_snps_per_coeff=50,
        )
        assert wins == []

    def test_depth_cap(self):
        positions = np.arange(0, 100_000, 100)
        cohort = _tiled_cohort(positions)
        wins = dataio.define_windows(
            cohort, window_bp=50_000, overlap_fraction=0.0,
            max_gap_bp=1_000, min_snps_per_coeff=2, depth_cap=3,
        )
        assert wins and all(w.depth == 3 for w in wins)

    def test_invalid_arguments(self):
        cohort = _tiled_cohort(np.arange(0, 10_000, 100))
        with pytest.raises(ValueError):
            dataio.define_windows(cohort, window_bp=0)
        with pytest.raises(ValueError):
            dataio.define_windows(cohort, overlap_fraction=1.0)
        with pytest.raises(ValueError):
            dataio.define_windows(cohort, max_gap_bp=0)
        with pytest.raises(ValueError):
            dataio.define_windows(cohort, min_snps_per_coeff=0)
