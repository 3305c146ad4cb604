"""Command-line driver: reproducible experiments from JSON config files.

Subcommands: forward, kernel-verify, invert-shape, svd-analyze,
probe-kernel-discrete.  Exit codes: 0 success, 1 input/parse error,
2 precondition violation, 3 verification failure, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import discrete, forward, inversion, kernels
from .chi import ChiSpec
from .density import model_from_json_dict, profile_from_json
from .forward import DomainError
from .harmonics import CoefficientVector, degrees_and_orders, make_ball_quadrature

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PRECONDITION = 2
EXIT_VERIFY_FAIL = 3
EXIT_NO_CONVERGENCE = 4


class ConfigError(Exception):
    pass


KNOWN_TOP_KEYS = {
    "schema_version",
    "gravity_constant",
    "seed",
    "quadrature",
    "forward",
    "kernel_verify",
    "invert_shape",
    "svd_analyze",
    "probe_kernel_discrete",
}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - KNOWN_TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"config schema_version must be {SCHEMA_VERSION}, "
            f"got {cfg.get('schema_version')!r}"
        )
    return cfg


def _section(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise ConfigError(f"config is missing the '{name}' section")
    sec = cfg[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' section must be a JSON object")
    return sec


def _gravity(cfg: dict) -> float:
    G = float(cfg.get("gravity_constant", 1.0))
    if G <= 0:
        raise ConfigError("gravity_constant must be positive")
    return G


def _quadrature(cfg: dict, support_radius: float):
    q = cfg.get("quadrature", {})
    degree = int(q.get("exactness_degree", 40))
    n_radial = q.get("n_radial")
    # point-mass-only models have zero extent and ignore the quadrature anyway
    radius = support_radius if support_radius > 0 else 1.0
    return make_ball_quadrature(
        degree, radius, None if n_radial is None else int(n_radial)
    )


def _load_receivers(spec) -> np.ndarray:
    if isinstance(spec, str):
        with open(spec, newline="") as fh:
            reader = csv.DictReader(fh)
            pts = [[float(r["x"]), float(r["y"]), float(r["z"])] for r in reader]
        return np.asarray(pts)
    return np.asarray(spec, dtype=float).reshape(-1, 3)


def _load_density(spec):
    if isinstance(spec, str):
        with open(spec) as fh:
            spec = json.load(fh)
    return model_from_json_dict(spec)


def _load_coefficients(spec) -> CoefficientVector:
    if isinstance(spec, str):
        if spec.endswith(".csv"):
            return CoefficientVector.load_csv(spec)
        return CoefficientVector.load_json(spec)
    return CoefficientVector.from_json_dict(spec)


def _chi_from_config(doc: dict) -> ChiSpec:
    return ChiSpec(
        amplitude=float(doc["amplitude"]),
        support_radius=float(doc["support_radius"]),
        smoothness=int(doc["smoothness"]),
        l=int(doc["l"]),
        m=int(doc["m"]),
    )


def cmd_forward(cfg: dict) -> int:
    sec = _section(cfg, "forward")
    G = _gravity(cfg)
    model = _load_density(sec["density"])
    receivers = _load_receivers(sec["receivers"])
    quad = _quadrature(cfg, model.support_radius)
    observables = sec.get("observables", ["potential"])
    columns: dict[str, np.ndarray] = {}
    if "potential" in observables:
        columns["phi"] = forward.potential(model, receivers, quad, G)
    if "gradient" in observables:
        names = ["Txx", "Tyy", "Tzz", "Txy", "Txz", "Tyz", "Mplus", "Mcross", "V"]
        vals = {n: np.empty(len(receivers)) for n in names}
        for i, p in enumerate(receivers):
            T = forward.gradient_tensor(model, p, quad, G)
            obs = forward.inline_crossline(T)
            for n, v in zip(
                names,
                [T.xx, T.yy, T.zz, T.xy, T.xz, T.yz, obs.m_plus, obs.m_cross,
                 forward.observable_V(model, p, quad, G)],
            ):
                vals[n][i] = v
        columns.update(vals)
    forward.write_measurements_csv(sec["output"], receivers, columns)
    print(f"wrote {len(receivers)} measurements to {sec['output']}")
    return EXIT_OK


def cmd_kernel_verify(cfg: dict) -> int:
    sec = _section(cfg, "kernel_verify")
    G = _gravity(cfg)
    if "density" in sec:
        model = _load_density(sec["density"])
    else:
        chi = _chi_from_config(sec["chi"])
        if "profile" in sec:
            model = kernels.make_gradient_kernel_density(
                profile_from_json(sec["profile"]), chi
            )
        else:
            model = kernels.make_potential_kernel_density(chi)
    report = kernels.verify_kernel(
        model,
        sec.get("kind", "potential"),
        float(sec["surface_radius"]),
        tol=float(sec.get("tolerance", 1e-8)),
        G=G,
    )
    if "output" in sec:
        report.save_json(sec["output"])
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_VERIFY_FAIL


def cmd_invert_shape(cfg: dict) -> int:
    sec = _section(cfg, "invert_shape")
    G = _gravity(cfg)
    data = _load_coefficients(sec["data"])
    profile = profile_from_json(sec["profile"])
    newton = sec.get("newton", {})
    opts = inversion.NewtonOptions(
        band_limit=int(newton.get("band_limit", 8)),
        max_iterations=int(newton.get("max_iterations", 50)),
        residual_tolerance=float(newton.get("residual_tolerance", 1e-10)),
        damping=float(newton.get("damping", 1.0)),
    )
    try:
        result = inversion.invert_shape(data, profile, opts, G)
    except DomainError as exc:
        if "center-of-mass" in str(exc):
            print(
                f"error: {exc} (hint: run recentering, e.g. zero the dipole "
                "via gravikern.inversion.recenter_data)",
                file=sys.stderr,
            )
            return EXIT_PRECONDITION
        raise
    result.save_json(sec["output"])
    if "shape_csv" in sec:
        result.shape.coefficients.save_csv(sec["shape_csv"])
    if "psi_grid" in sec:
        inversion.write_psi_grid(result.shape, sec["psi_grid"])
    print(
        f"{'converged' if result.converged else 'did not converge'} in "
        f"{result.iterations} iterations, residual {result.final_residual:.3e}"
    )
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def cmd_svd_analyze(cfg: dict) -> int:
    sec = _section(cfg, "svd_analyze")
    G = _gravity(cfg)
    seed = int(cfg.get("seed", 0))
    if "slab_n" in sec:
        lattice, _ = discrete.slab_lattice(int(sec["slab_n"]))
    elif "random" in sec:
        r = sec["random"]
        lattice = discrete.random_lattice(
            int(r["n_sources"]), int(r["n_receivers"]),
            float(r.get("radius", 1.0)), seed=int(r.get("seed", seed)),
        )
    else:
        lattice = discrete.PointLattice(
            np.asarray(sec["sources"], dtype=float),
            np.asarray(sec["receivers"], dtype=float),
        )
    matrix = discrete.build_forward_matrix(lattice, G)
    if sec.get("duplicate_first_receiver"):
        # deliberate rank-deficiency injection for diagnostics
        M = np.vstack([matrix.matrix, matrix.matrix[0]])
        matrix = discrete.ForwardMatrix(M, lattice, G)
    report = discrete.svd_conditioning(matrix, float(sec.get("tau", 1e-12)))
    sigma = float(sec.get("sigma", 0.0))
    null_basis = discrete.approximate_null_space(
        matrix, discrete.NoiseModel(sigma=sigma, seed=seed)
    )
    doc = report.to_json_dict()
    doc["noise_sigma"] = sigma
    doc["approximate_null_dimension_at_sigma"] = int(null_basis.shape[1])
    with open(sec["output"], "w") as fh:
        json.dump(doc, fh, indent=2)
    if "singular_values_csv" in sec:
        with open(sec["singular_values_csv"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "sigma"])
            for i, s in enumerate(report.singular_values):
                writer.writerow([i, repr(float(s))])
    if "null_basis_csv" in sec and null_basis.shape[1] > 0:
        np.savetxt(sec["null_basis_csv"], null_basis, delimiter=",")
    print(
        f"condition number {report.condition_number:.6e}, rank {report.numerical_rank}, "
        f"null dimension at sigma={sigma:g}: {null_basis.shape[1]}"
    )
    return EXIT_OK


def cmd_probe_kernel_discrete(cfg: dict) -> int:
    sec = _section(cfg, "probe_kernel_discrete")
    G = _gravity(cfg)
    chi = _chi_from_config(sec["chi"])
    lattice, cell_volume = discrete.chi_sample_lattice(chi, int(sec.get("n", 6)))
    report = discrete.kernel_discretization_probe(
        chi, lattice, G, cell_volume=cell_volume,
        sigma=float(sec["sigma"]) if "sigma" in sec else None,
    )
    if "output" in sec:
        report.save_json(sec["output"])
    print(
        f"max exterior potential {report.max_exterior_potential:.6e} "
        f"(scale {report.potential_scale:.6e}); null-basis energy fraction "
        f"{report.null_energy_fraction:.4f} at sigma={report.sigma:.6e}"
    )
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "kernel-verify": cmd_kernel_verify,
    "invert-shape": cmd_invert_shape,
    "svd-analyze": cmd_svd_analyze,
    "probe-kernel-discrete": cmd_probe_kernel_discrete,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gravikern",
        description="Gravity forward maps, null-space verification, shape "
        "inversion, and discrete conditioning analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_lines = {
        "forward": "evaluate potential/gradient observables at receiver points",
        "kernel-verify": "verify a null-space density's exterior observable vanishes",
        "invert-shape": "recover a body shape from multipole data by Newton iteration",
        "svd-analyze": "SVD conditioning and approximate null space of a point lattice",
        "probe-kernel-discrete": "project a continuum kernel density onto lattice masses",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=help_lines[name])
        p.add_argument("config", help="path to the JSON experiment config")
        p.add_argument(
            "--threads",
            type=int,
            default=int(os.environ.get("GRAVIKERN_THREADS", "1")),
            help="worker threads (1 guarantees bitwise determinism; "
            "mirrors GRAVIKERN_THREADS)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, TypeError) as exc:
        print(f"error: malformed config: {exc!r}", file=sys.stderr)
        return EXIT_INPUT
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
