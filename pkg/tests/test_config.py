import pytest

from pmcv.config import (
    CHECKS,
    DEFAULT_TOLERANCES,
    ConfigError,
    load_config,
    parse_checks,
    parse_config,
    parse_grid,
)


class TestGrid:
    def test_forms(self):
        assert parse_grid("32x32") == (32, 32)
        assert parse_grid("4X5x6") == (4, 5, 6)
        assert parse_grid([8, 9]) == (8, 9)

    @pytest.mark.parametrize("bad", ["2x32", "axb", 32, [1.5, "q"]])
    def test_errors(self, bad):
        with pytest.raises(ConfigError):
            parse_grid(bad)


class TestChecks:
    def test_dependency_order(self):
        assert parse_checks("classification,extrinsic") == ("extrinsic", "classification")
        assert parse_checks(list(reversed(CHECKS))) == tuple(CHECKS)

    @pytest.mark.parametrize("bad", ["", [], "simons,bogus"])
    def test_errors(self, bad):
        with pytest.raises(ConfigError):
            parse_checks(bad)


class TestParse:
    def test_catalog_defaults(self):
        cfg = parse_config({"source": {"catalog": "cyl:c=1:kappa=1"}})
        assert cfg.checks == tuple(CHECKS)
        assert cfg.fd_step == "auto" and cfg.seed == 0 and cfg.grid is None
        assert cfg.tol("simons") == DEFAULT_TOLERANCES["simons"]

    def test_dsl_path_relative_to_config(self, tmp_path):
        cfg = parse_config({"source": {"dsl": "a.dsl", "c": 2}, "params": {"k": 1}}, base_dir=tmp_path)
        assert cfg.dsl == str(tmp_path / "a.dsl")
        assert cfg.c == 2.0 and cfg.params == {"k": 1.0}

    def test_overrides(self):
        cfg = parse_config({"source": {"catalog": "slice:c=1"}, "tolerances": {"simons": 1e-3}})
        assert cfg.tol("simons") == 1e-3
        assert cfg.override(seed=5, grid=None).seed == 5
        assert cfg.override() is cfg
        with pytest.raises(ConfigError):
            cfg.override(params={"x": 1.0})

    def test_echo_is_plain(self):
        echo = parse_config({"source": {"catalog": "slice:c=1"}, "grid": "4x4"}).echo()
        assert echo["grid"] == [4, 4]
        assert echo["source"] == {"catalog": "slice:c=1"}
        assert set(echo["tolerances"]) == set(DEFAULT_TOLERANCES)

    @pytest.mark.parametrize(
        "data",
        [
            [],
            {},
            {"source": "cyl"},
            {"source": {"catalog": "x", "dsl": "y"}},
            {"source": {"dsl": "y"}},
            {"source": {"catalog": "x"}, "params": {"a": 1}},
            {"source": {"catalog": "x"}, "colour": "red"},
            {"source": {"catalog": "x", "path": "y"}},
            {"source": {"catalog": "x"}, "tolerances": {"nope": 1}},
            {"source": {"catalog": "x"}, "fd_step": -1},
            {"source": {"catalog": "x"}, "fd_step": "tiny"},
            {"source": {"catalog": "x"}, "seed": "abc"},
            {"source": {"catalog": "x"}, "identity_points": 0},
            {"source": {"catalog": "x"}, "selector": "N"},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            parse_config(data)


class TestLoad:
    def test_yaml(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("source:\n  catalog: cyl:c=1:kappa=1\ngrid: 8x8\nchecks: [pmc]\n", encoding="utf-8")
        cfg = load_config(p)
        assert cfg.grid == (8, 8) and cfg.checks == ("pmc",)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "none.yaml")

    def test_bad_yaml(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("source: [unclosed\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="YAML"):
            load_config(p)
