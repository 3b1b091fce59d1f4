"""End-to-end tests of the command line interface: subcommand behavior, exit
codes, report envelopes, and byte-level reproducibility of every artifact.
"""

import json
import os

import numpy as np
import pytest

from meshgauge import __version__
from meshgauge.algebra import LayerWeights, ReprType
from meshgauge.cli import main, parse_mesh_spec
from meshgauge.errors import UsageError
from meshgauge.geometry import atlas_from_json
from meshgauge.layers import (
    ConvLayer,
    FeatureField,
    field_from_json,
    field_to_csv,
    field_to_json,
    network_to_json,
    scalar_type,
)


def run(*argv):
    return main([str(a) for a in argv])


def identity_network_json():
    layer = ConvLayer(
        LayerWeights(ReprType([0]), ReprType([0]), np.array([1.0]), np.array([0.0]))
    )
    return network_to_json([layer])


@pytest.fixture()
def atlas_dir(tmp_path):
    out = tmp_path / "pre"
    assert run("precompute", "--mesh", "gen:icosahedron", "--out", out) == 0
    return out


class TestMeshSpecParsing:
    def test_generators(self):
        mesh, info = parse_mesh_spec("gen:icosahedron", seed=0)
        assert mesh.n_vertices == 12 and info["generator"] == "icosahedron"
        mesh, info = parse_mesh_spec("gen:grid:4x5:sigma=1.0", seed=0)
        assert mesh.n_vertices == 20 and info["sigma"] == 1.0
        mesh, info = parse_mesh_spec("gen:icosahedron:deform=0.05", seed=1)
        assert info["deform"] == 0.05

    def test_bad_specs(self):
        for spec in (
            "gen:moebius",
            "gen:grid:4",
            "gen:grid:axb",
            "gen:grid:4x4:wiggle=2",
            "gen:icosahedron:rows=3",
            "/nonexistent/mesh.obj",
        ):
            with pytest.raises(UsageError):
                parse_mesh_spec(spec, seed=0)


class TestKernelsCommand:
    def test_worked_example_line(self, capsys):
        assert run("kernels", "--type-in", "0,1,1", "--type-out", "1,3") == 0
        assert capsys.readouterr().out.strip() == "self=4 neigh=20 total=24"

    def test_scalar_line(self, capsys):
        assert run("kernels", "--type-in", "0", "--type-out", "0") == 0
        assert "self=1 neigh=1" in capsys.readouterr().out

    def test_negative_order_usage_error(self, capsys):
        assert run("kernels", "--type-in", "0,-1", "--type-out", "0") == 2

    def test_dump_structure(self, tmp_path, capsys):
        out = tmp_path / "k"
        assert run(
            "kernels", "--type-in", "0,1", "--type-out", "1",
            "--out", out, "--n-samples", 8,
        ) == 0
        doc = json.loads((out / "kernels.json").read_text())
        assert doc["tool_version"] == __version__
        assert doc["counts"] == {"self": 2, "neigh": 6, "total": 8}
        assert len(doc["theta_grid"]) == 8
        assert set(doc["neigh_bases"]) == {"0,1", "1,1"}
        # each sampled element of the (0,1) family is a 2x1 matrix
        first = doc["neigh_bases"]["0,1"][0][0]
        assert np.asarray(first).shape == (2, 1)


class TestPrecomputeCommand:
    def test_icosahedron_atlas(self, atlas_dir):
        atlas = atlas_from_json((atlas_dir / "atlas.json").read_text())
        assert atlas.n_vertices == 12
        assert all(len(atlas.neighbors(p)) == 5 for p in range(12))
        doc = json.loads((atlas_dir / "validation.json").read_text())
        assert doc["validation"]["is_manifold"] is True
        assert doc["validation"]["defects"] == []
        assert doc["seed"] == 0 and "config_hash" in doc

    def test_byte_identical_repeat(self, tmp_path):
        for name in ("a", "b"):
            assert run("precompute", "--mesh", "gen:grid:4x4:sigma=1.5",
                       "--out", tmp_path / name) == 0
        assert (tmp_path / "a/atlas.json").read_bytes() == (tmp_path / "b/atlas.json").read_bytes()
        assert (
            tmp_path / "a/validation.json").read_bytes() == (tmp_path / "b/validation.json"
        ).read_bytes()

    def test_invalid_mesh_exit_one_with_listing(self, tmp_path, capsys):
        obj = tmp_path / "bad.obj"
        obj.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 3\n")
        assert run("precompute", "--mesh", obj, "--out", tmp_path / "o") == 1
        err = capsys.readouterr().err
        assert "defect" in err
        assert (tmp_path / "o/validation.json").exists()


class TestForwardCommand:
    def test_identity_network(self, atlas_dir, tmp_path):
        atlas = atlas_from_json((atlas_dir / "atlas.json").read_text())
        net = tmp_path / "net.json"
        net.write_text(identity_network_json())
        field = FeatureField(
            scalar_type(1), np.arange(12.0).reshape(-1, 1), atlas.atlas_id
        )
        inp = tmp_path / "input.json"
        inp.write_text(field_to_json(field))
        out = tmp_path / "fwd"
        assert run("forward", "--atlas", atlas_dir / "atlas.json", "--net", net,
                   "--input", inp, "--out", out) == 0
        result = field_from_json((out / "output_field.json").read_text())
        assert np.array_equal(result.values, field.values)
        doc = json.loads((out / "forward.json").read_text())
        assert len(doc["layer_checksums"]) == 1
        assert doc["output_type"] == [0]

    def test_csv_input(self, atlas_dir, tmp_path):
        atlas = atlas_from_json((atlas_dir / "atlas.json").read_text())
        net = tmp_path / "net.json"
        net.write_text(identity_network_json())
        field = FeatureField(
            scalar_type(1), np.linspace(-1, 1, 12).reshape(-1, 1), atlas.atlas_id
        )
        inp = tmp_path / "input.csv"
        inp.write_text(field_to_csv(field))
        out = tmp_path / "fwd"
        assert run("forward", "--atlas", atlas_dir / "atlas.json", "--net", net,
                   "--input", inp, "--out", out) == 0
        result = field_from_json((out / "output_field.json").read_text())
        assert np.array_equal(result.values, field.values)

    def test_missing_atlas_names_path(self, tmp_path, capsys):
        net = tmp_path / "net.json"
        net.write_text(identity_network_json())
        inp = tmp_path / "in.json"
        inp.write_text("{}")
        missing = tmp_path / "nowhere" / "atlas.json"
        assert run("forward", "--atlas", missing, "--net", net,
                   "--input", inp, "--out", tmp_path / "o") == 2
        assert str(missing) in capsys.readouterr().err

    def test_type_mismatch_names_layer(self, atlas_dir, tmp_path, capsys):
        atlas = atlas_from_json((atlas_dir / "atlas.json").read_text())
        net = tmp_path / "net.json"
        net.write_text(identity_network_json())
        field = FeatureField(
            scalar_type(2), np.zeros((12, 2)), atlas.atlas_id
        )
        inp = tmp_path / "input.json"
        inp.write_text(field_to_json(field))
        assert run("forward", "--atlas", atlas_dir / "atlas.json", "--net", net,
                   "--input", inp, "--out", tmp_path / "o") == 2
        assert "layer 0" in capsys.readouterr().err


class TestAuditCommand:
    def _gauge(self, out, *extra):
        return run(
            "audit", "--audit", "gauge", "--mesh", "gen:icosahedron",
            "--n-models", 2, "--n-samples", 3, "--out", out, *extra,
        )

    def test_gauge_passes_and_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "g"
        assert self._gauge(out) == 0
        assert "PASS audit=gauge" in capsys.readouterr().out
        doc = json.loads((out / "audit_gauge.json").read_text())
        assert doc["passed"] is True
        assert doc["metric"] < 1e-9
        assert doc["tolerances"]["audit_gauge_ratio"] == 1e-9
        assert doc["tool_version"] == __version__
        csv_lines = (out / "audit_gauge.csv").read_text().splitlines()
        assert csv_lines[0] == "gauge_index,max_abs_deviation"
        assert len(csv_lines) == 4
        assert (out / "audit_gauge.png").stat().st_size > 1000

    def test_byte_identical_across_runs_and_threads(self, tmp_path):
        outs = [tmp_path / n for n in ("r1", "r2", "r4")]
        assert self._gauge(outs[0]) == 0
        assert self._gauge(outs[1]) == 0
        assert self._gauge(outs[2], "--threads", 4) == 0
        for name in ("audit_gauge.json", "audit_gauge.csv", "audit_gauge.png"):
            ref = (outs[0] / name).read_bytes()
            assert (outs[1] / name).read_bytes() == ref
            assert (outs[2] / name).read_bytes() == ref

    def test_ambient_passes(self, tmp_path):
        out = tmp_path / "a"
        assert run(
            "audit", "--audit", "ambient", "--n-models", 1, "--n-samples", 3,
            "--out", out,
        ) == 0
        doc = json.loads((out / "audit_ambient.json").read_text())
        assert doc["metric"] < 1e-9

    def test_isometry_passes_on_icosahedron(self, tmp_path):
        out = tmp_path / "i"
        assert run(
            "audit", "--audit", "isometry", "--n-models", 1, "--out", out,
        ) == 0
        doc = json.loads((out / "audit_isometry.json").read_text())
        assert doc["report"]["n_isometries"] == 60
        assert doc["report"]["max_theta_residual"] < 1e-9

    def test_isometry_fails_on_deformed(self, tmp_path, capsys):
        out = tmp_path / "d"
        assert run(
            "audit", "--audit", "isometry", "--mesh", "gen:icosahedron:deform=0.08",
            "--n-models", 1, "--out", out,
        ) == 1
        assert "FAIL" in capsys.readouterr().out
        doc = json.loads((out / "audit_isometry.json").read_text())
        assert doc["metric"] > 1e-3

    def test_tolerance_override_flips_outcome(self, tmp_path):
        out = tmp_path / "t"
        assert run(
            "audit", "--audit", "isometry", "--mesh", "gen:icosahedron:deform=0.08",
            "--n-models", 1, "--out", out,
            "--tolerance", "audit_isometry_ratio=1.0",
        ) == 0
        doc = json.loads((out / "audit_isometry.json").read_text())
        assert doc["tolerances"]["audit_isometry_ratio"] == 1.0

    def test_unknown_tolerance_rejected(self, tmp_path):
        assert self._gauge(tmp_path / "x", "--tolerance", "bogus=1") == 2

    def test_isometry_on_grid_degenerate(self, tmp_path):
        assert run(
            "audit", "--audit", "isometry", "--mesh", "gen:grid:4x4",
            "--n-models", 1, "--out", tmp_path / "g",
        ) == 3

    def test_nonlinearity_rows_within_bound(self, tmp_path):
        out = tmp_path / "n"
        assert run(
            "audit", "--audit", "nonlinearity", "--n-samples", "5,10",
            "--n-trials", 40, "--out", out,
        ) == 0
        lines = (out / "audit_nonlinearity.csv").read_text().splitlines()
        assert lines[0].startswith("n_samples,median_measured,median_bound")
        rows = [line.split(",") for line in lines[1:]]
        assert [r[0] for r in rows] == ["5", "10"]
        for r in rows:
            assert float(r[1]) <= float(r[2])  # median measured <= median bound
            assert float(r[3]) <= 1.0  # worst trial within bound
            assert r[4] == "0"  # zero violations
        doc = json.loads((out / "audit_nonlinearity.json").read_text())
        assert "loglog_slope" in doc["report"]["scaling"]


class TestEnvelope:
    def test_config_hash_stable_and_out_independent(self, tmp_path):
        a, b = tmp_path / "ha", tmp_path / "hb"
        for out in (a, b):
            assert run(
                "audit", "--audit", "gauge", "--n-models", 1, "--n-samples", 2,
                "--out", out,
            ) == 0
        da = json.loads((a / "audit_gauge.json").read_text())
        db = json.loads((b / "audit_gauge.json").read_text())
        assert da["config_hash"] == db["config_hash"]
        assert da == db
