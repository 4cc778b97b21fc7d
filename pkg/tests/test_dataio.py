import datetime
import json
import logging

import numpy as np
import pytest

from bbtcycle import dataio
from bbtcycle.dataio import (
    BadMensesFlagError,
    NonConsecutiveDatesError,
    ParseError,
    load_subject,
    write_subject,
)
from bbtcycle.model import CycleDataset
from bbtcycle.simulate import simulate


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


class TestLoadSubject:
    def test_basic_load_with_missing_bbt(self, tmp_path):
        f = tmp_path / "s.csv"
        write_lines(
            f,
            [
                "date,bbt,menses",
                "2024-01-01,36.52,1",
                "2024-01-02,,0",
                "2024-01-03,36.71,0",
            ],
        )
        ds = load_subject(f)
        assert ds.n_days == 3
        assert np.isnan(ds.bbt[1])
        assert ds.bbt[0] == 36.52
        assert list(ds.menses) == [True, False, False]
        assert ds.start_date == datetime.date(2024, 1, 1)

    def test_date_gap_reported_with_line(self, tmp_path):
        f = tmp_path / "s.csv"
        write_lines(
            f,
            ["date,bbt,menses", "2024-01-01,36.5,1", "2024-01-03,36.6,0"],
        )
        with pytest.raises(NonConsecutiveDatesError) as exc:
            load_subject(f)
        assert exc.value.line == 3

    def test_bad_menses_flag(self, tmp_path):
        f = tmp_path / "s.csv"
        write_lines(f, ["date,bbt,menses", "2024-01-01,36.5,2"])
        with pytest.raises(BadMensesFlagError) as exc:
            load_subject(f)
        assert exc.value.line == 2

    def test_bad_temperature(self, tmp_path):
        f = tmp_path / "s.csv"
        write_lines(f, ["date,bbt,menses", "2024-01-01,warm,0"])
        with pytest.raises(ParseError) as exc:
            load_subject(f)
        assert exc.value.line == 2

    def test_bad_header(self, tmp_path):
        f = tmp_path / "s.csv"
        write_lines(f, ["day,temp,flag", "2024-01-01,36.5,0"])
        with pytest.raises(ParseError) as exc:
            load_subject(f)
        assert exc.value.line == 1

    def test_empty_file(self, tmp_path):
        f = tmp_path / "s.csv"
        f.write_text("")
        with pytest.raises(ParseError):
            load_subject(f)

    def test_out_of_window_becomes_missing_with_warning(self, tmp_path, caplog):
        f = tmp_path / "s.csv"
        write_lines(
            f,
            ["date,bbt,menses", "2024-01-01,33.0,1", "2024-01-02,36.6,0"],
        )
        with caplog.at_level(logging.WARNING):
            ds = load_subject(f)
        assert np.isnan(ds.bbt[0])
        assert ds.n_days == 2
        assert "outside" in caplog.text

    def test_roundtrip_exact(self, tmp_path, subject2):
        sim = simulate(
            subject2, 400, missing_rate=0.07, seed=5, start_date=datetime.date(2020, 3, 1)
        )
        f = tmp_path / "round.csv"
        write_subject(sim.dataset, f)
        back = load_subject(f)
        assert np.array_equal(back.bbt, sim.dataset.bbt, equal_nan=True)
        assert np.array_equal(back.menses, sim.dataset.menses)
        assert back.start_date == sim.dataset.start_date


class TestReports:
    def test_params_roundtrip(self, subject2):
        d = dataio.params_to_dict(subject2)
        back = dataio.params_from_dict(d)
        assert back == subject2

    def test_params_from_dict_validates(self):
        with pytest.raises(ValueError):
            dataio.params_from_dict({"alpha": 1.0})

    def test_forecast_csv_and_summary(self, tmp_path):
        from bbtcycle.forecast import OnsetForecast

        fc = OnsetForecast(probs=np.array([0.2, 0.5, 0.3]), k_star=2, mass_captured=1.0)
        out = tmp_path / "fc.csv"
        dataio.write_forecast_csv(fc, datetime.date(2024, 5, 1), out)
        lines = out.read_text().splitlines()
        assert lines[0] == "k,calendar_date,probability"
        assert lines[1].startswith("1,2024-05-02,")
        summary = dataio.forecast_summary_dict(fc, datetime.date(2024, 5, 1))
        assert summary == {"k_star": 2, "date_star": "2024-05-03", "mass_captured": 1.0}

    def test_marginals_csv(self, tmp_path):
        out = tmp_path / "m.csv"
        dataio.write_marginals_csv(np.array([[1.0, 1.0], [0.5, 1.5]]), np.array([0.0, 0.5]), out)
        lines = out.read_text().splitlines()
        assert lines[0] == "t,omega,density"
        assert len(lines) == 5
        assert lines[1].startswith("1,0.0000000000,")
