"""Command line interface: reproducible precompute, kernel dumps, forward
passes, and symmetry audits.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numeric
degeneracy. Reports embed the tool version, the seed, and a hash of the
determinism-relevant configuration; output bytes are identical across repeated
runs and across --threads values.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .algebra import ReprType, basis_neigh, basis_self, param_count
from .audit import (
    ambient_invariance_audit,
    enumerate_icosahedron_isometries,
    gauge_equivariance_audit,
    isometry_equivariance_audit,
    isometry_law_residuals,
    network_model,
    nonlinearity_bound_audit,
    nonlinearity_scaling_audit,
    standard_network_factory,
)
from .constants import default_tolerances
from .errors import DegenerateGeometryError, UsageError, ValidationFailure
from .figures import render_audit_figure
from .geometry import atlas_from_json, atlas_to_json, build_atlas
from .layers import (
    ConvLayer,
    field_from_csv,
    field_from_json,
    field_to_csv,
    field_to_json,
    network_from_json,
    scalar_type,
    sequential,
)
from .mesh import Mesh, deform_radial, grid_mesh, icosahedron, read_obj, validate


# ---------------------------------------------------------------------------
# config plumbing


def parse_type(text: str) -> ReprType:
    cleaned = text.strip().strip("[]")
    if not cleaned:
        raise UsageError(f"empty type specification {text!r}")
    try:
        return ReprType([int(tok) for tok in cleaned.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse type {text!r}; expected e.g. '0,1,1'") from None


def parse_mesh_spec(spec: str, seed: int) -> tuple[Mesh, dict]:
    """A mesh source: an OBJ path, or gen:icosahedron[:deform=S], or
    gen:grid:RxC[:sigma=S].
    """
    info: dict = {"source": spec}
    if not spec.startswith("gen:"):
        if not os.path.exists(spec):
            raise UsageError(f"mesh file not found: {spec}")
        info["generator"] = "obj"
        return read_obj(spec), info

    parts = spec.split(":")
    kind = parts[1] if len(parts) > 1 else ""
    opts = {}
    positional = []
    for tok in parts[2:]:
        if "=" in tok:
            key, _, val = tok.partition("=")
            opts[key] = val
        else:
            positional.append(tok)

    def _float(key):
        try:
            return float(opts[key])
        except ValueError:
            raise UsageError(f"bad numeric value for {key!r} in {spec!r}") from None

    if kind == "icosahedron":
        if positional or set(opts) - {"deform"}:
            raise UsageError(f"unsupported options in {spec!r}")
        mesh = icosahedron()
        info["generator"] = "icosahedron"
        info["deform"] = None
        if "deform" in opts:
            std = _float("deform")
            mesh = deform_radial(mesh, std, seed=seed)
            info["deform"] = std
        return mesh, info
    if kind == "grid":
        if len(positional) != 1 or set(opts) - {"sigma"}:
            raise UsageError(f"grid spec must look like gen:grid:RxC[:sigma=S], got {spec!r}")
        dims = positional[0].lower().split("x")
        if len(dims) != 2:
            raise UsageError(f"grid size must look like RxC, got {positional[0]!r}")
        try:
            rows, cols = int(dims[0]), int(dims[1])
        except ValueError:
            raise UsageError(f"grid size must be integers, got {positional[0]!r}") from None
        sigma = _float("sigma") if "sigma" in opts else None
        info["generator"] = "grid"
        info["rows"], info["cols"], info["sigma"] = rows, cols, sigma
        return grid_mesh(rows, cols, smoothing_sigma=sigma, seed=seed), info
    raise UsageError(f"unknown mesh generator {kind!r} in {spec!r}")


def _config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def _envelope(command: str, config: dict, tolerances: dict | None = None) -> dict:
    doc = {
        "format": "meshgauge-report/1",
        "tool_version": __version__,
        "command": command,
        "seed": config.get("seed"),
        "config": config,
        "config_hash": _config_hash(config),
    }
    if tolerances is not None:
        doc["tolerances"] = tolerances
    return doc


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _read_text(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"{what} file not found: {path}")
    with open(path) as fh:
        return fh.read()


def _effective_tolerances(overrides: list[str]) -> dict:
    table = default_tolerances()
    for item in overrides or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"tolerance override must look like NAME=VALUE, got {item!r}")
        if name not in table:
            raise UsageError(
                f"unknown tolerance {name!r}; known: {', '.join(sorted(table))}"
            )
        try:
            table[name] = float(value)
        except ValueError:
            raise UsageError(f"bad tolerance value in {item!r}") from None
    return table


# ---------------------------------------------------------------------------
# subcommands


def run_precompute(args) -> int:
    mesh, info = parse_mesh_spec(args.mesh, args.seed)
    os.makedirs(args.out, exist_ok=True)
    report = validate(mesh)
    config = {
        "command": "precompute",
        "mesh": info,
        "seed": args.seed,
        "reference_policy": args.reference_policy,
    }
    doc = _envelope("precompute", config)
    doc["validation"] = {
        "is_manifold": report.is_manifold,
        "boundary_vertex_count": report.boundary_vertex_count,
        "defects": [list(d) if isinstance(d, tuple) else d for d in report.defects],
        "n_vertices": mesh.n_vertices,
        "n_faces": mesh.n_faces,
        "mesh_hash": mesh.content_hash(),
    }
    _write_json(os.path.join(args.out, "validation.json"), doc)
    if report.defects:
        raise ValidationFailure(
            f"mesh has {len(report.defects)} defect(s): {report.defect_summary()}",
            defects=report.defects,
        )
    atlas = build_atlas(mesh, reference_policy=args.reference_policy, policy_seed=args.seed)
    _write_text(os.path.join(args.out, "atlas.json"), atlas_to_json(atlas))
    print(
        f"wrote atlas for {mesh.n_vertices} vertices "
        f"({report.boundary_vertex_count} on the boundary) to {args.out}/atlas.json"
    )
    return 0


def run_kernels(args) -> int:
    t_in = parse_type(args.type_in)
    t_out = parse_type(args.type_out)
    n_self, n_neigh = param_count(t_in, t_out)
    line = f"self={n_self} neigh={n_neigh} total={n_self + n_neigh}"
    print(line)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        thetas = np.linspace(0.0, 2.0 * np.pi, args.n_samples, endpoint=False)
        pairs = sorted({(n, m) for n in t_in for m in t_out})
        neigh_tables = {}
        self_tables = {}
        for n, m in pairs:
            key = f"{n},{m}"
            neigh_tables[key] = [
                [kernel(t).tolist() for t in thetas] for kernel in basis_neigh(n, m)
            ]
            self_tables[key] = [mat.tolist() for mat in basis_self(n, m)]
        config = {
            "command": "kernels",
            "type_in": t_in.to_list(),
            "type_out": t_out.to_list(),
            "n_samples": args.n_samples,
            "seed": args.seed,
        }
        doc = _envelope("kernels", config)
        doc["counts"] = {"self": n_self, "neigh": n_neigh, "total": n_self + n_neigh}
        doc["theta_grid"] = thetas.tolist()
        doc["neigh_bases"] = neigh_tables
        doc["self_bases"] = self_tables
        _write_json(os.path.join(args.out, "kernels.json"), doc)
    return 0


def run_forward(args) -> int:
    atlas = atlas_from_json(_read_text(args.atlas, "atlas"))
    layers = network_from_json(_read_text(args.net, "network"))
    raw = _read_text(args.input, "input field")
    field = field_from_csv(raw) if args.input.endswith(".csv") else field_from_json(raw)
    result = sequential(layers, atlas, field)
    os.makedirs(args.out, exist_ok=True)
    _write_text(os.path.join(args.out, "output_field.json"), field_to_json(result.field))
    _write_text(os.path.join(args.out, "output_field.csv"), field_to_csv(result.field))
    config = {
        "command": "forward",
        "atlas_id": atlas.atlas_id,
        "input_checksum": field.checksum(),
        "n_layers": len(layers),
        "seed": args.seed,
    }
    doc = _envelope("forward", config)
    doc["layer_checksums"] = list(result.layer_checksums)
    doc["output_type"] = result.field.rep_type.to_list()
    doc["output_checksum"] = result.field.checksum()
    _write_json(os.path.join(args.out, "forward.json"), doc)
    print(
        f"forward pass through {len(layers)} layer(s): "
        f"{field.n_vertices}x{result.field.values.shape[1]} output values "
        f"written to {args.out}/output_field.json"
    )
    return 0


def _parse_sample_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None
    if not values:
        raise UsageError("empty sample-count list")
    return values


def _model_setup(args):
    """Returns (factory, type_in, description) for the audited model family."""
    if args.net:
        layers = network_from_json(_read_text(args.net, "network"))
        if not layers or not isinstance(layers[0], ConvLayer):
            raise UsageError("audited networks must start with a conv layer")
        return (
            lambda seed: network_model(layers),
            layers[0].weights.type_in,
            {"network": args.net},
        )
    factory = standard_network_factory(
        band_limit=args.band_limit,
        multiplicity=args.multiplicity,
        nonlin_samples=args.nonlin_samples,
        pointwise=args.pointwise,
    )
    return (
        factory,
        scalar_type(1),
        {
            "network": "standard",
            "band_limit": args.band_limit,
            "multiplicity": args.multiplicity,
            "nonlin_samples": args.nonlin_samples,
            "pointwise": args.pointwise,
        },
    )


def run_audit(args) -> int:
    kind = args.audit
    tolerances = _effective_tolerances(args.tolerance)
    os.makedirs(args.out, exist_ok=True)

    config = {
        "command": "audit",
        "audit": kind,
        "mesh": args.mesh,
        "seed": args.seed,
        "n_models": args.n_models,
        "n_samples": args.n_samples,
        "n_trials": args.n_trials,
    }

    if kind == "nonlinearity":
        payload, curve, metric, tol_name = _audit_nonlinearity(args, config)
    else:
        mesh, info = parse_mesh_spec(args.mesh, args.seed)
        factory, type_in, net_info = _model_setup(args)
        config["mesh"] = info
        config["model"] = net_info
        if kind == "gauge":
            n_gauges = int(args.n_samples) if args.n_samples else 16
            payload = gauge_equivariance_audit(
                mesh, factory, type_in,
                n_models=args.n_models, n_gauges=n_gauges,
                seed=args.seed, n_threads=args.threads,
            )
            curve = _csv(
                ["gauge_index", "max_abs_deviation"],
                list(enumerate(payload["per_gauge_max_deviation"])),
            )
            metric, tol_name = payload["ratio"], "audit_gauge_ratio"
        elif kind == "ambient":
            n_transforms = int(args.n_samples) if args.n_samples else 300
            payload = ambient_invariance_audit(
                mesh, factory, type_in.dim,
                n_models=args.n_models, n_transforms=n_transforms,
                seed=args.seed, n_threads=args.threads,
            )
            curve = _csv(
                ["transform_index", "max_abs_deviation"],
                list(enumerate(payload["per_transform_max_deviation"])),
            )
            metric, tol_name = payload["ratio"], "audit_ambient_ratio"
        elif kind == "isometry":
            if info.get("generator") == "icosahedron":
                isometries = enumerate_icosahedron_isometries(icosahedron())
            else:
                isometries = enumerate_icosahedron_isometries(mesh)
            model = factory(args.seed)
            payload = isometry_equivariance_audit(
                mesh, model, type_in,
                n_fields=args.n_models, seed=args.seed,
                isometries=isometries, n_threads=args.threads,
            )
            atlas = build_atlas(mesh)
            residuals = [isometry_law_residuals(atlas, s) for s in isometries]
            payload["max_theta_residual"] = max(r["theta_residual"] for r in residuals)
            payload["max_transport_residual"] = max(
                r["transport_residual"] for r in residuals
            )
            curve = _csv(
                ["isometry_index", "ratio"],
                list(enumerate(payload["per_isometry_ratio"])),
            )
            metric, tol_name = payload["ratio"], "audit_isometry_ratio"
        else:
            raise UsageError(
                f"unknown audit kind {kind!r}; choose gauge, ambient, isometry, "
                "or nonlinearity"
            )

    tolerance = tolerances[tol_name]
    passed = metric <= tolerance
    doc = _envelope("audit", config, tolerances=tolerances)
    doc["report"] = payload
    doc["metric"] = metric
    doc["tolerance_name"] = tol_name
    doc["tolerance"] = tolerance
    doc["passed"] = bool(passed)

    base = os.path.join(args.out, f"audit_{kind}")
    _write_json(base + ".json", doc)
    _write_text(base + ".csv", curve)
    render_audit_figure(payload, tolerance, base + ".png")

    status = "PASS" if passed else "FAIL"
    print(f"{status} audit={kind} metric={metric!r} tolerance={tolerance!r}")
    return 0 if passed else 1


def _audit_nonlinearity(args, config):
    counts = _parse_sample_list(args.n_samples or "5,10,20,40,80")
    per_n = [
        nonlinearity_bound_audit(
            band_limit=args.band_limit,
            n_samples=n,
            pointwise=args.pointwise,
            n_trials=args.n_trials,
            seed=args.seed,
            n_threads=args.threads,
        )
        for n in counts
    ]
    scaling = nonlinearity_scaling_audit(
        band_limit=args.band_limit,
        sample_counts=counts,
        pointwise=args.pointwise,
        n_trials=args.n_trials,
        seed=args.seed,
        n_threads=args.threads,
    )
    payload = {
        "audit": "nonlinearity",
        "band_limit": args.band_limit,
        "pointwise": args.pointwise,
        "n_trials": args.n_trials,
        "seed": args.seed,
        "per_n": per_n,
        "scaling": scaling,
    }
    config["model"] = {
        "band_limit": args.band_limit,
        "pointwise": args.pointwise,
    }
    rows = [
        (
            row["n_samples"],
            row["median_measured"],
            row["median_bound"],
            row["max_measured_over_bound"],
            row["n_violations"],
        )
        for row in per_n
    ]
    curve = _csv(
        ["n_samples", "median_measured", "median_bound", "max_measured_over_bound", "n_violations"],
        rows,
    )
    metric = max(row["max_measured_over_bound"] for row in per_n)
    return payload, curve, metric, "audit_nonlinearity_ratio"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(
            ",".join(
                repr(float(x)) if isinstance(x, float) else str(x) for x in row
            )
            + "\n"
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshgauge",
        description=(
            "Gauge-equivariant mesh convolution toolkit: precompute tangent-frame "
            "atlases, dump constrained kernel bases, run forward passes, and audit "
            "symmetry claims."
        ),
    )
    parser.add_argument("--version", action="version", version=f"meshgauge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
        p.add_argument(
            "--threads", type=int, default=1,
            help="worker threads; outputs are identical for any value",
        )

    p = sub.add_parser("precompute", help="validate a mesh and write its gauge atlas")
    add_common(p)
    p.add_argument("--mesh", required=True, help="OBJ path or gen:... spec")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--reference-policy", choices=["smallest", "random"], default="smallest",
        help="which neighbor anchors each tangent frame",
    )

    p = sub.add_parser("kernels", help="dump constrained kernel bases and parameter counts")
    add_common(p)
    p.add_argument("--type-in", required=True, help="input type, e.g. '0,1,1'")
    p.add_argument("--type-out", required=True, help="output type, e.g. '1,3'")
    p.add_argument("--out", help="optional output directory for the JSON dump")
    p.add_argument(
        "--n-samples", type=int, default=16, help="angle samples in the dumped tables"
    )

    p = sub.add_parser("forward", help="run a network forward pass over a saved atlas")
    add_common(p)
    p.add_argument("--atlas", required=True, help="atlas JSON from precompute")
    p.add_argument("--net", required=True, help="network JSON")
    p.add_argument("--input", required=True, help="input field (.json or .csv)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("audit", help="measure a symmetry claim and compare to tolerance")
    add_common(p)
    p.add_argument(
        "--audit", required=True,
        choices=["gauge", "ambient", "isometry", "nonlinearity"],
        help="which symmetry to audit",
    )
    p.add_argument("--mesh", default="gen:icosahedron", help="OBJ path or gen:... spec")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--net", help="audit this network JSON instead of sampled standard nets")
    p.add_argument(
        "--n-models", type=int, default=10,
        help="model draws (gauge/ambient) or input fields (isometry)",
    )
    p.add_argument(
        "--n-samples",
        help=(
            "gauge: gauge draws (default 16); ambient: rigid motions (default 300); "
            "nonlinearity: comma list of sample counts (default 5,10,20,40,80)"
        ),
    )
    p.add_argument(
        "--n-trials", type=int, default=200,
        help="random trials per sample count (nonlinearity audit)",
    )
    p.add_argument("--band-limit", type=int, default=2, help="band limit for standard nets")
    p.add_argument(
        "--multiplicity", type=int, default=2,
        help="copies of the band structure in standard nets' hidden type",
    )
    p.add_argument(
        "--nonlin-samples", type=int, default=None,
        help="insert a sampled nonlinearity with this N into standard nets",
    )
    p.add_argument(
        "--pointwise", default="relu", choices=["relu", "tanh", "identity"],
        help="pointwise function for nonlinearities",
    )
    p.add_argument(
        "--tolerance", action="append", default=[], metavar="NAME=VALUE",
        help="override a named tolerance (repeatable); echoed into the report",
    )
    return parser


_HANDLERS = {
    "precompute": run_precompute,
    "kernels": run_kernels,
    "forward": run_forward,
    "audit": run_audit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        for defect in exc.defects:
            print(f"  defect: {defect}", file=sys.stderr)
        return 1
    except DegenerateGeometryError as exc:
        print(f"degenerate geometry: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
