"""Panel container, CSV ingestion/emission, portfolio weight files."""

import numpy as np
import pytest

from eigengarch import (
    ReturnPanel,
    ValidationError,
    bundled_weights_path,
    load_returns_csv,
    load_weights_csv,
    portfolio_returns,
    write_panel_csv,
)
from eigengarch.panel import align_weights


class TestReturnPanel:
    def test_basic_construction(self):
        panel = ReturnPanel(np.ones((3, 2)), ["A", "B"])
        assert panel.T == 3 and panel.p == 2

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            ReturnPanel(np.ones((3, 2)), ["A", "A"])

    def test_non_finite_named(self):
        X = np.ones((4, 2))
        X[1, 0] = np.nan
        with pytest.raises(ValidationError, match="'AAA'"):
            ReturnPanel(X, ["AAA", "BBB"])

    def test_demeaned(self):
        rng = np.random.default_rng(1)
        panel = ReturnPanel(rng.standard_normal((50, 3)) + 5.0, ["a", "b", "c"])
        out = panel.demeaned()
        np.testing.assert_allclose(out.values.mean(axis=0), 0.0, atol=1e-12)


class TestLoadReturnsCsv:
    def test_well_formed(self, tmp_path):
        f = tmp_path / "r.csv"
        f.write_text("AAA,BBB\n0.01,0.02\n-0.01,0.00\n0.02,-0.03\n")
        panel = load_returns_csv(f)
        assert panel.values.shape == (3, 2)
        assert panel.labels == ("AAA", "BBB")
        assert panel.timestamps is None

    def test_date_column_detected(self, tmp_path):
        f = tmp_path / "r.csv"
        f.write_text("date,AAA\n2020-01-01,0.01\n2020-01-02,-0.02\n")
        panel = load_returns_csv(f)
        assert panel.values.shape == (2, 1)
        assert panel.timestamps == ("2020-01-01", "2020-01-02")

    def test_na_cell_named(self, tmp_path):
        f = tmp_path / "r.csv"
        f.write_text("AAPL,MSFT\n0.01,0.02\n0.00,0.01\nNA,0.03\n")
        with pytest.raises(ValidationError, match=r"row 2.*'AAPL'"):
            load_returns_csv(f)

    def test_ragged_row(self, tmp_path):
        f = tmp_path / "r.csv"
        f.write_text("A,B\n0.1,0.2\n0.3\n")
        with pytest.raises(ValidationError, match="ragged"):
            load_returns_csv(f)

    def test_duplicate_header(self, tmp_path):
        f = tmp_path / "r.csv"
        f.write_text("A,A\n0.1,0.2\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_returns_csv(f)

    def test_empty_file(self, tmp_path):
        f = tmp_path / "r.csv"
        f.write_text("")
        with pytest.raises(ValidationError, match="empty"):
            load_returns_csv(f)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="cannot read"):
            load_returns_csv(tmp_path / "nope.csv")

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(17)
        panel = ReturnPanel(rng.standard_normal((40, 3)) * 0.01,
                            ["X1", "X2", "X3"],
                            tuple(f"2021-01-{d + 1:02d}" for d in range(40)))
        f = tmp_path / "w.csv"
        write_panel_csv(panel, f)
        back = load_returns_csv(f)
        # repr round-trip is exact for doubles
        assert np.array_equal(back.values, panel.values)
        assert back.labels == panel.labels
        assert back.timestamps == panel.timestamps


class TestWeights:
    def test_bundled_fixture(self):
        named = load_weights_csv(bundled_weights_path())
        assert [n for n, _ in named] == ["P1", "P2", "P3", "P4", "P5"]
        for name, wmap in named:
            assert len(wmap) == 25
        p1 = named[0][1]
        assert all(v == pytest.approx(0.040) for v in p1.values())
        # P3 is geared: the weights deliberately do not sum to one
        p3 = dict(named)["P3"]
        assert sum(p3.values()) == pytest.approx(1.5, abs=0.02)

    def test_single_asset_passthrough(self, tmp_path):
        f = tmp_path / "w.csv"
        f.write_text("ticker,PF\nZZZ,1.0\n")
        named = load_weights_csv(f)
        panel = ReturnPanel(np.linspace(0, 1, 6)[:, None], ["ZZZ"])
        returns = portfolio_returns(panel, named[0][1])
        np.testing.assert_allclose(returns, panel.values[:, 0])

    def test_alignment_by_label(self, tmp_path):
        rng = np.random.default_rng(23)
        X = rng.standard_normal((30, 3))
        panel = ReturnPanel(X, ["A", "B", "C"])
        f1 = tmp_path / "w1.csv"
        f1.write_text("ticker,PF\nA,0.5\nB,0.3\nC,0.2\n")
        f2 = tmp_path / "w2.csv"
        f2.write_text("ticker,PF\nC,0.2\nA,0.5\nB,0.3\n")
        r1 = portfolio_returns(panel, load_weights_csv(f1)[0][1])
        r2 = portfolio_returns(panel, load_weights_csv(f2)[0][1])
        np.testing.assert_array_equal(r1, r2)

    def test_missing_asset_rejected(self):
        with pytest.raises(ValidationError, match="missing"):
            align_weights({"A": 0.5}, ["A", "B"])

    def test_non_numeric_weight(self, tmp_path):
        f = tmp_path / "w.csv"
        f.write_text("ticker,PF\nA,x\n")
        with pytest.raises(ValidationError, match="non-numeric"):
            load_weights_csv(f)
