import csv
import io
import json
from datetime import date

import numpy as np
import pytest

from bsac.data import (
    CATEGORICAL,
    NUMERIC,
    LC_SOURCE_COLUMNS,
    Dataset,
    PreprocessParams,
    Schema,
    apply_preprocess,
    clean_lending_club,
    drop_high_missing,
    fit_preprocess,
    load_csv,
    load_lending_club_csv,
    load_prepared,
    load_taiwan_csv,
    months_between,
    parse_emp_length,
    prepare_lending_club,
    prepare_taiwan,
    write_prepared,
)

from conftest import write_taiwan_like


def write(path, text):
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_smoke(self, tmp_path):
        t = load_csv(write(tmp_path / "a.csv", "x,y\n1,2.5\n3,4\n"))
        assert t.n_rows == 2 and t["x"].kind == NUMERIC
        assert t["y"].values.tolist() == [2.5, 4.0]

    def test_empty_cell_is_missing(self, tmp_path):
        t = load_csv(write(tmp_path / "a.csv", "x,c\n1,a\n,\n"))
        assert t["x"].missing().tolist() == [False, True]
        assert t["c"].missing().tolist() == [False, True]
        assert t["c"].kind == CATEGORICAL

    def test_ragged_row_names_line(self, tmp_path):
        with pytest.raises(ValueError, match="line 3"):
            load_csv(write(tmp_path / "a.csv", "x,y\n1,2\n3\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "absent.csv")

    def test_duplicate_header(self, tmp_path):
        with pytest.raises(ValueError):
            load_csv(write(tmp_path / "a.csv", "x,x\n1,2\n"))


class TestDropHighMissing:
    def table(self, tmp_path, missing):
        rows = "\n".join(("" if i < missing else str(i)) + ",1" for i in range(10))
        return load_csv(write(tmp_path / "a.csv", "a,b\n" + rows + "\n"))

    def test_sixty_percent_dropped(self, tmp_path):
        t, dropped = drop_high_missing(self.table(tmp_path, 6), 0.5)
        assert dropped == ["a"] and t.names == ["b"]

    def test_exactly_half_kept(self, tmp_path):
        t, dropped = drop_high_missing(self.table(tmp_path, 5), 0.5)
        assert dropped == [] and t.names == ["a", "b"]

    def test_complete_table_unchanged(self, tmp_path):
        t0 = self.table(tmp_path, 0)
        t, dropped = drop_high_missing(t0)
        assert dropped == [] and t.names == t0.names


class TestPreprocess:
    def fit_table(self, tmp_path):
        t = load_csv(write(tmp_path / "a.csv", "num,flat,cat,target\n1,5,a,0\n3,5,b,1\n2,5,a,0\n"))
        return t, Schema(["num", "flat"], {"cat": None}, "target")

    def test_range_and_degenerate_column(self, tmp_path):
        t, schema = self.fit_table(tmp_path)
        d = apply_preprocess(t, fit_preprocess(t, schema))
        assert d.feature_names == ["num", "flat", "cat_a", "cat_b"]
        assert d.features[:, 0].tolist() == [0.0, 1.0, 0.5]
        assert not d.features[:, 1].any()
        assert d.features.min() >= 0 and d.features.max() <= 1

    def test_unseen_category_zero_block(self, tmp_path):
        t, schema = self.fit_table(tmp_path)
        params = fit_preprocess(t, schema)
        new = load_csv(write(tmp_path / "b.csv", "num,flat,cat\n2,5,zzz\n"))
        d = apply_preprocess(new, params)
        assert d.features[0, 2:].tolist() == [0.0, 0.0]
        assert d.labels is None

    def test_params_roundtrip(self, tmp_path):
        t, schema = self.fit_table(tmp_path)
        params = fit_preprocess(t, schema)
        again = PreprocessParams.from_dict(json.loads(json.dumps(params.to_dict())))
        a, b = apply_preprocess(t, params), apply_preprocess(t, again)
        assert np.array_equal(a.features, b.features)


class TestTaiwan:
    def test_width_and_rows(self, tmp_path):
        d = prepare_taiwan(load_taiwan_csv(write_taiwan_like(tmp_path / "t.csv", 100)))
        assert d.features.shape == (100, 32)
        assert set(np.unique(d.labels)) <= {0.0, 1.0}

    def test_width_independent_of_rows(self, tmp_path):
        d = prepare_taiwan(load_taiwan_csv(write_taiwan_like(tmp_path / "t.csv", 12, code_row=False)))
        assert d.n_features == 32


LC_HEADER = ["id"] + LC_SOURCE_COLUMNS + ["revol_bal"]


def lc_row(**over):
    base = dict(loan_amnt="10000", term=" 36 months", int_rate="10.5%", installment="320.1", grade="B",
                sub_grade="B2", emp_length="10+ years", home_ownership="RENT", annual_inc="55000",
                verification_status="Verified", issue_d="Jan-2015", loan_status="Fully Paid",
                purpose="credit_card", dti="12.3", delinq_2yrs="0", earliest_cr_line="Jan-2000",
                fico_range_low="700", fico_range_high="710", inq_last_6mths="1", open_acc="7", pub_rec="0",
                revol_bal="5000", revol_util="40.1%", total_acc="20", initial_list_status="w", mort_acc="1",
                pub_rec_bankruptcies="0", acc_now_delinq="0", chargeoff_within_12_mths="0",
                delinq_amnt="0", tax_liens="0", id="1")
    base.update(over)
    return base


def write_lc(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LC_HEADER, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    return path


class TestLendingClub:
    def test_engineered_columns(self, tmp_path):
        path = write_lc(tmp_path / "lc.csv", [lc_row(), lc_row(loan_status="Charged Off", fico_range_low="650",
                                                             fico_range_high="654")])
        table, _ = clean_lending_club(load_lending_club_csv(path))
        assert table["average_fico"].values.tolist() == [705.0, 652.0]
        assert table["credit_history"].values.tolist() == [180.0, 180.0]
        assert table["loan_status"].values.tolist() == [0.0, 1.0]

    def test_filters(self, tmp_path):
        rows = [lc_row(), lc_row(loan_status="Charged Off"), lc_row(term=" 60 months"),
                lc_row(issue_d="Mar-2016"), lc_row(loan_status="Current"), lc_row(issue_d="Feb-2016")]
        d = prepare_lending_club(load_lending_club_csv(write_lc(tmp_path / "lc.csv", rows)))
        assert len(d) == 3

    def test_month_arithmetic(self):
        assert months_between(date(2000, 1, 1), date(2015, 1, 1)) == 180

    @pytest.mark.parametrize("text, years", [("< 1 year", 0.0), ("10+ years", 10.0), ("3 years", 3.0),
                                             ("n/a", None)])
    def test_emp_length(self, text, years):
        assert parse_emp_length(text) == years


class TestPrepared:
    def test_roundtrip_exact(self, tmp_path):
        gen = np.random.default_rng(0)
        d = Dataset(gen.random((20, 3)), gen.integers(0, 2, 20).astype(float), ["a", "b", "c"])
        write_prepared(d, tmp_path / "p.csv")
        back = load_prepared(tmp_path / "p.csv")
        assert np.array_equal(back.features, d.features) and np.array_equal(back.labels, d.labels)

    def test_stream_output(self):
        buf = io.StringIO()
        write_prepared(Dataset(np.zeros((1, 1)), np.ones(1), ["a"]), buf)
        assert buf.getvalue().splitlines()[0] == "a,label"
