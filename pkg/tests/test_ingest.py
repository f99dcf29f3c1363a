"""Panel loading, validation, scaling round trips, and PCA reduction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from arealbeta.errors import IngestError
from arealbeta.ingest import (
    ITALY_REGIONS,
    Panel,
    apply_scaling,
    fit_scaling,
    invert_scaling,
    load_panel,
    pca_reduce,
    reduce_covariate_block,
)

from conftest import make_panel


def write_panel_csv(path, rows, header="region,year,gender,rate,x1"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def full_rows(regions=("north", "south"), years=(2000, 2001), genders=("female", "male")):
    rows = []
    v = 0.2
    for r in regions:
        for y in years:
            for g in genders:
                rows.append(f"{r},{y},{g},{v},{1.0}")
                v += 0.05
    return rows


class TestLoadPanel:
    def test_loads_complete_panel(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", full_rows())
        panel = load_panel(path)
        assert panel.n_rows == 8
        assert panel.region_names == ("north", "south")
        assert panel.group_labels == ("female", "male")
        assert panel.covariate_names == ("x1",)

    def test_row_order_is_region_major(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", full_rows())
        panel = load_panel(path)
        assert panel.region_idx.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
        assert panel.time_idx.tolist() == [0, 0, 1, 1, 0, 0, 1, 1]
        assert panel.group_idx.tolist() == [0, 1, 0, 1, 0, 1, 0, 1]

    def test_shuffle_invariance(self, tmp_path):
        rows = full_rows()
        a = load_panel(write_panel_csv(tmp_path / "a.csv", rows))
        rng = np.random.default_rng(0)
        shuffled = [rows[i] for i in rng.permutation(len(rows))]
        b = load_panel(write_panel_csv(tmp_path / "b.csv", shuffled))
        np.testing.assert_array_equal(a.rate, b.rate)
        np.testing.assert_array_equal(a.X, b.X)
        assert a.region_names == b.region_names

    def test_boundary_rate_rejected(self, tmp_path):
        rows = full_rows()
        rows[0] = rows[0].replace("0.2,", "0.0,")
        path = write_panel_csv(tmp_path / "p.csv", rows)
        with pytest.raises(IngestError, match="rate not interior"):
            load_panel(path)

    def test_duplicate_cell_named(self, tmp_path):
        rows = full_rows() + ["north,2000,female,0.3,1.0"]
        path = write_panel_csv(tmp_path / "p.csv", rows)
        with pytest.raises(IngestError, match=r"duplicate cell.*north.*2000.*female"):
            load_panel(path)

    def test_missing_cell_named(self, tmp_path):
        rows = [r for r in full_rows() if not r.startswith("south,2001,male")]
        path = write_panel_csv(tmp_path / "p.csv", rows)
        with pytest.raises(IngestError, match=r"missing panel cell \(south, 2001, male\)"):
            load_panel(path)

    def test_unknown_region_rejected(self, tmp_path):
        path = write_panel_csv(tmp_path / "p.csv", full_rows())
        with pytest.raises(IngestError, match="unknown region"):
            load_panel(path, region_names=("north", "west"))

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("region,year,rate\nnorth,2000,0.5\n")
        with pytest.raises(IngestError, match="missing required column"):
            load_panel(path)

    def test_non_numeric_rate_rejected(self, tmp_path):
        rows = full_rows()
        rows[3] = rows[3].replace("0.3", "oops")
        path = write_panel_csv(tmp_path / "p.csv", rows)
        with pytest.raises(IngestError, match="does not parse"):
            load_panel(path)

    def test_italy_dimension_bookkeeping(self):
        # 20 regions x 13 years x 2 genders
        assert len(ITALY_REGIONS) * 13 * 2 == 520


class TestScaling:
    def test_standardize_symmetric_column(self):
        panel = make_panel(R=3, T=1, G=1, p=1)
        panel = panel.with_covariates(np.array([[1.0], [2.0], [3.0]]), ("x1",))
        recipe = fit_scaling(panel)
        scaled = apply_scaling(panel, recipe)
        np.testing.assert_allclose(scaled.X[:, 0], [-1.0, 0.0, 1.0])

    def test_minmax_endpoints(self):
        panel = make_panel(R=3, T=1, G=1, p=1)
        panel = panel.with_covariates(np.array([[0.0], [5.0], [10.0]]), ("x1",))
        recipe = fit_scaling(panel, policy={"x1": "minmax"})
        scaled = apply_scaling(panel, recipe)
        np.testing.assert_allclose(scaled.X[:, 0], [0.0, 0.5, 1.0])

    def test_constant_column_rejected(self):
        panel = make_panel(R=3, T=1, G=1, p=1)
        panel = panel.with_covariates(np.full((3, 1), 2.0), ("x1",))
        with pytest.raises(IngestError, match="zero spread"):
            fit_scaling(panel)

    def test_unknown_policy_name_rejected(self):
        panel = make_panel()
        with pytest.raises(IngestError, match="unknown covariates"):
            fit_scaling(panel, policy={"nope": "minmax"})

    @given(data=st.data())
    @settings(max_examples=30, deadline=None)
    def test_round_trip(self, data):
        X = data.draw(
            arrays(
                float,
                (8, 2),
                elements=st.floats(min_value=-100, max_value=100, allow_nan=False),
            )
        )
        # guarantee spread in both columns
        X[0] += 1.0
        X[1] -= 1.0
        panel = make_panel(R=2, T=2, G=2, p=2).with_covariates(X, ("x1", "x2"))
        recipe = fit_scaling(panel, policy={"x2": "minmax"})
        back = invert_scaling(apply_scaling(panel, recipe), recipe)
        np.testing.assert_allclose(back.X, X, rtol=1e-10, atol=1e-10)


class TestPca:
    def test_correlated_columns_give_rank_one(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=20)
        block = np.column_stack([a, 3.0 * a])
        reduction, _ = pca_reduce(block, force_count=1)
        assert reduction.explained_variance_ratio[0] == pytest.approx(1.0)

    def test_orthogonal_equal_variance_split(self):
        a = np.tile([1.0, 1.0, -1.0, -1.0], 10)
        b = np.tile([1.0, -1.0, 1.0, -1.0], 10)
        reduction, _ = pca_reduce(np.column_stack([a, b]), force_count=2)
        np.testing.assert_allclose(reduction.explained_variance_ratio, [0.5, 0.5], atol=1e-12)

    def test_threshold_selects_smallest_leading_set(self):
        rng = np.random.default_rng(1)
        block = rng.normal(size=(60, 4)) * np.array([10.0, 3.0, 1.0, 0.3])
        reduction, _ = pca_reduce(block, variance_threshold=0.9)
        cum = np.cumsum(reduction.explained_variance_ratio)
        m = reduction.n_retained
        assert cum[m - 1] > 0.9
        assert m == 1 or cum[m - 2] <= 0.9

    def test_loadings_orthonormal_and_ratios_sorted(self):
        rng = np.random.default_rng(2)
        block = rng.normal(size=(30, 5))
        reduction, _ = pca_reduce(block, force_count=5)
        np.testing.assert_allclose(
            reduction.loadings.T @ reduction.loadings, np.eye(5), atol=1e-8
        )
        ratios = reduction.explained_variance_ratio
        assert np.all(np.diff(ratios) <= 1e-12)
        assert ratios.sum() <= 1 + 1e-10

    def test_reconstruction_with_all_components(self):
        rng = np.random.default_rng(3)
        block = rng.normal(size=(25, 4))
        reduction, scores = pca_reduce(block, force_count=4)
        centered = block - block.mean(axis=0)
        np.testing.assert_allclose(scores @ reduction.loadings.T, centered, atol=1e-8)

    def test_sign_convention(self):
        rng = np.random.default_rng(4)
        block = rng.normal(size=(40, 3))
        reduction, _ = pca_reduce(block, force_count=3)
        for j in range(3):
            col = reduction.loadings[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_bad_threshold_rejected(self):
        with pytest.raises(IngestError, match="variance_threshold"):
            pca_reduce(np.zeros((10, 3)) + np.random.default_rng(0).normal(size=(10, 3)), 1.5)


class TestReduceBlock:
    def test_block_replaced_by_scores(self):
        panel = make_panel(R=4, T=3, G=2, p=5, seed=9)
        reduced, reduction = reduce_covariate_block(
            panel, ("x2", "x4"), force_count=1, score_prefix="pc"
        )
        assert reduced.covariate_names == ("x1", "x3", "x5", "pc1")
        assert reduction.n_retained == 1
        # scores re-standardized onto the common scale
        assert reduced.X[:, -1].mean() == pytest.approx(0.0, abs=1e-12)
        assert reduced.X[:, -1].std(ddof=1) == pytest.approx(1.0)

    def test_unknown_block_name_rejected(self):
        panel = make_panel(p=2)
        with pytest.raises(IngestError, match="not in the panel"):
            reduce_covariate_block(panel, ("x9",))
