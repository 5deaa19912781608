"""Command-line front end producing reproducible artifact directories.

Every subcommand follows the same shape: merge an optional JSON config file
with explicit flags (flags win, unknown keys are rejected), echo the
resolved configuration next to the artifacts, run the wrapped pipeline, and
serialize results canonically (sorted keys, 17 significant digits) so that
identical invocations produce byte-identical files.  Error classes map to
fixed exit codes:

    0  success
    1  --check invariant violation
    2  validation failure (bad flags, malformed config or input files)
    3  budget exceeded
    4  incomplete spectrum
    5  spectral-gap estimation failure
    6  unstable fit / refused moment

HYPDET_BUDGET_MB caps the enumeration memory budget (see spectrum module).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__
from .errors import (
    BudgetExceeded,
    DomainError,
    FitUnstable,
    GapTooLargeToResolve,
    HypdetError,
    IncompleteSpectrum,
    MomentDivergesByTheorem,
    NoSpectralGapEstimate,
)
from .fuchsian import build_surface_group, fn_from_json, generators_from_json
from .report import CheckResult, canonical_json, format_float, write_text_atomic
from .sampler import SamplerConfig, histogram_csv, mc_experiment, records_csv
from .selberg import QuadratureParams, constant_E, log_det, lower_bound_check, z0_product
from .spectrum import counting_check, enumerate_geodesics, write_spectrum
from .wpvol import (
    DEFAULT_BUDGET,
    divergence_probe,
    mirzakhani_volume,
    ratio_table,
    sinh_bound_check,
    systole_moment,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_INCOMPLETE = 4
EXIT_NO_GAP = 5
EXIT_FIT = 6

# most specific first; DomainError last so its subclasses never shadow it
_EXIT_TABLE = (
    (BudgetExceeded, EXIT_BUDGET),
    (IncompleteSpectrum, EXIT_INCOMPLETE),
    ((GapTooLargeToResolve, NoSpectralGapEstimate), EXIT_NO_GAP),
    ((FitUnstable, MomentDivergesByTheorem), EXIT_FIT),
    (DomainError, EXIT_VALIDATION),
)


class ConfigError(ValueError):
    """Malformed or contradictory run configuration."""


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty list value")
    return tuple(float(p) for p in parts)


def _bool(value):
    if isinstance(value, bool):
        return value
    raise ConfigError("expected a JSON boolean, got %r" % (value,))


# schema: key -> (caster, default); None default means optional/absent
_GLOBAL_SCHEMA = {
    "out": (str, "."),
    "seed": (int, None),
    "threads": (int, 1),
    "check": (_bool, False),
}

_SCHEMAS = {
    "spectrum": {
        "fn": (str, None),
        "generators": (str, None),
        "genus": (int, None),
        "cutoff": (float, 8.0),
    },
    "det": {
        "fn": (str, None),
        "generators": (str, None),
        "genus": (int, None),
        "cutoff": (float, 12.0),
        "R": (float, 40.0),
        "eta_override": (float, None),
    },
    "zeta": {
        "fn": (str, None),
        "generators": (str, None),
        "genus": (int, None),
        "cutoff": (float, 8.0),
        "s": (float, 1.5),
        "k_max": (int, 60),
    },
    "volumes": {
        "gmax": (int, 6),
        "g": (int, None),
        "n": (int, None),
        "budget": (int, DEFAULT_BUDGET),
        "t_grid": (_float_list, (0.5, 1.0, 2.0, 4.0)),
    },
    "sysmoment": {
        "g": (int, 2),
        "beta": (float, 1.0),
        "c_gamma": (float, 1.0),
        "budget": (int, DEFAULT_BUDGET),
    },
    "mc": {
        "genus": (int, 2),
        "n_samples": (int, 8),
        "l_min": (float, 0.5),
        "l_max": (float, 6.0),
        "cutoff": (float, 8.0),
        "eta": (float, 0.02),
        "alpha": (float, 0.5),
        "c_short": (float, 4.0),
        "beta_list": (_float_list, (0.5, 1.0, 1.5)),
    },
}


def _resolve_config(command, file_path, flag_values):
    """Merge defaults <- config file <- flags under the command's schema."""
    schema = dict(_SCHEMAS[command])
    schema.update(_GLOBAL_SCHEMA)
    resolved = {k: default for k, (_, default) in schema.items()}
    if file_path is not None:
        try:
            with open(file_path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError("cannot read config %s: %s" % (file_path, exc))
        except json.JSONDecodeError as exc:
            raise ConfigError("config %s is not valid JSON: %s" % (file_path, exc))
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        for key, value in doc.items():
            if key not in schema:
                raise ConfigError("unknown config key %r for %s" % (key, command))
            caster = schema[key][0]
            try:
                resolved[key] = value if value is None else caster(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError("config key %r: %s" % (key, exc))
    for key, value in flag_values.items():
        if key not in schema:
            raise ConfigError("unknown option %r for %s" % (key, command))
        if value is not None:
            caster = schema[key][0]
            resolved[key] = caster(value)
    return resolved


def _echo_config(command, resolved):
    payload = {"command": command, "version": __version__}
    payload.update(resolved)
    path = os.path.join(resolved["out"], command + "_config.json")
    write_text_atomic(path, canonical_json(payload) + "\n")
    return path


def _load_group(resolved):
    """Surface group (or raw generator list) from the fn/generators input."""
    fn_path, gen_path = resolved.get("fn"), resolved.get("generators")
    if (fn_path is None) == (gen_path is None):
        raise ConfigError("exactly one of --fn and --generators is required")
    if fn_path is not None:
        try:
            with open(fn_path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("cannot read %s: %s" % (fn_path, exc))
        return build_surface_group(fn_from_json(text))
    try:
        with open(gen_path) as fh:
            text = fh.read()
        obj = json.loads(text)
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (gen_path, exc))
    except json.JSONDecodeError as exc:
        raise ConfigError("%s is not valid JSON: %s" % (gen_path, exc))
    gens = generators_from_json(text)
    genus = resolved.get("genus")
    if genus is None and isinstance(obj, dict) and "genus" in obj:
        genus = int(obj["genus"])
    if genus is None:
        raise ConfigError("generator input needs --genus (not recorded in the file)")
    return gens, int(genus)


def _enumerate(resolved):
    loaded = _load_group(resolved)
    if isinstance(loaded, tuple):
        gens, genus = loaded
        spec = enumerate_geodesics(gens, resolved["cutoff"])
        # a bare generator list carries no genus; patch the caller's claim in
        spec = type(spec)(
            cutoff=spec.cutoff, genus=genus, entries=spec.entries,
            complete=spec.complete, n_searched=spec.n_searched,
            prune_radius=spec.prune_radius,
            relator_residual=spec.relator_residual, meta=spec.meta,
        )
        return spec
    return enumerate_geodesics(loaded, resolved["cutoff"])


def _check_outcome(results):
    """Print each check line; exit code 1 when any failed."""
    ok = True
    for res in results:
        print(str(res))
        ok = ok and bool(res.passed)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_spectrum(resolved):
    spec = _enumerate(resolved)
    paths = write_spectrum(spec, resolved["out"])
    _echo_config("spectrum", resolved)
    print(
        "spectrum: %d classes (%d oriented) up to cutoff %s -> %s"
        % (len(spec.entries), spec.oriented_count(), format_float(spec.cutoff), paths["csv"])
    )
    if resolved["check"]:
        return _check_outcome([counting_check(spec)])
    return EXIT_OK


def cmd_det(resolved):
    spec = _enumerate(resolved)
    params = QuadratureParams(R=resolved["R"], eta_override=resolved["eta_override"])
    det = log_det(spec, spec.genus, params)
    gap = abs(det.log_z0_prime_heat - det.log_z0_prime_product)
    payload = {
        "log_det": det.log_det,
        "log_z0_prime_heat": det.log_z0_prime_heat,
        "log_z0_prime_product": det.log_z0_prime_product,
        "route_gap": gap,
        "quadrature_error": det.quadrature_error,
        "truncation_error": det.truncation_error,
        "product_error": det.product_error,
        "combined_error": det.combined_error(),
        "lambda1_est": det.lambda1_est,
        "genus": det.genus,
        "constant_E": constant_E(),
        "components": det.components,
        "spectrum": {"cutoff": spec.cutoff, "classes": len(spec.entries)},
    }
    write_text_atomic(
        os.path.join(resolved["out"], "det.json"), canonical_json(payload) + "\n"
    )
    _echo_config("det", resolved)
    print(
        "det: log_det %s, route gap %s vs combined error %s"
        % (format_float(det.log_det), format_float(gap), format_float(det.combined_error()))
    )
    if resolved["check"]:
        route = CheckResult(
            name="route-agreement",
            passed=bool(gap <= det.combined_error()),
            value=gap,
            lower=0.0,
            upper=det.combined_error(),
            details={},
        )
        return _check_outcome([counting_check(spec), route, lower_bound_check(spec, det.genus, det)])
    return EXIT_OK


def cmd_zeta(resolved):
    spec = _enumerate(resolved)
    val = z0_product(spec, resolved["s"], resolved["k_max"])
    payload = {
        "log_z0": val.log_value,
        "s": val.s,
        "k_max": val.k_max,
        "k_tail": val.k_tail,
        "cutoff_tail": val.cutoff_tail,
        "spectrum": {"cutoff": spec.cutoff, "classes": len(spec.entries)},
    }
    write_text_atomic(
        os.path.join(resolved["out"], "zeta.json"), canonical_json(payload) + "\n"
    )
    _echo_config("zeta", resolved)
    print(
        "zeta: log Z0(%s) = %s (k tail %s, cutoff tail %s)"
        % tuple(format_float(x) for x in (val.s, val.log_value, val.k_tail, val.cutoff_tail))
    )
    if resolved["check"]:
        half = z0_product(spec, resolved["s"], max(resolved["k_max"] // 2, 1))
        drift = abs(half.log_value - val.log_value)
        res = CheckResult(
            name="k-truncation-consistency",
            passed=bool(drift <= half.k_tail + 1e-15),
            value=drift,
            lower=0.0,
            upper=half.k_tail,
            details={"k_half": half.k_max},
        )
        return _check_outcome([counting_check(spec), res])
    return EXIT_OK


def _rational_str(q):
    return "%d/%d" % (q.numerator, q.denominator)


def cmd_volumes(resolved):
    out = resolved["out"]
    artifacts = {}
    if (resolved["g"] is None) != (resolved["n"] is None):
        raise ConfigError("--g and --n must be given together")
    if resolved["g"] is not None:
        poly = mirzakhani_volume(resolved["g"], resolved["n"], budget=resolved["budget"])
        artifacts["polynomial"] = {
            "g": poly.g,
            "n": poly.n,
            "dim": 3 * poly.g - 3 + poly.n,
            "coefficients": poly.jsonable(),
        }
    rows = ratio_table(resolved["gmax"], budget=resolved["budget"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["g", "pair_ratio", "split_ratio", "combined",
         "pair_ratio_rational", "split_ratio_rational"]
    )
    for row in rows:
        writer.writerow(
            [
                row["g"],
                format_float(row["pair_ratio"]),
                format_float(row["split_ratio"]),
                format_float(row["combined"]),
                _rational_str(row["pair_ratio_rational"]),
                _rational_str(row["split_ratio_rational"]),
            ]
        )
    write_text_atomic(os.path.join(out, "volumes.csv"), buf.getvalue())
    artifacts["ratio_table"] = [
        {
            "g": row["g"],
            "pair_ratio": row["pair_ratio"],
            "split_ratio": row["split_ratio"],
            "combined": row["combined"],
            "pair_ratio_rational": _rational_str(row["pair_ratio_rational"]),
            "split_ratio_rational": _rational_str(row["split_ratio_rational"]),
        }
        for row in rows
    ]
    write_text_atomic(os.path.join(out, "volumes.json"), canonical_json(artifacts) + "\n")
    _echo_config("volumes", resolved)
    print("volumes: ratio table for genus 2..%d -> %s" % (resolved["gmax"], os.path.join(out, "volumes.csv")))
    if resolved["check"]:
        checks = []
        for g in range(2, resolved["gmax"] + 1):
            checks.append(sinh_bound_check(g - 1, 2, resolved["t_grid"], budget=resolved["budget"]))
        for i in range(1, resolved["gmax"] // 2 + 1):
            checks.append(sinh_bound_check(i, 1, resolved["t_grid"], budget=resolved["budget"]))
        return _check_outcome(checks)
    return EXIT_OK


def cmd_sysmoment(resolved):
    res = systole_moment(
        resolved["g"], resolved["beta"], c_gamma=resolved["c_gamma"], budget=resolved["budget"]
    )
    payload = {
        "g": res.g,
        "beta": res.beta,
        "value": res.value,
        "divergent": not math.isfinite(res.value),
        "quadrature_error": res.quadrature_error,
        "c_gamma": res.c_gamma,
        "probe": res.probe,
    }
    write_text_atomic(
        os.path.join(resolved["out"], "sysmoment.json"), canonical_json(payload) + "\n"
    )
    _echo_config("sysmoment", resolved)
    if math.isfinite(res.value):
        print("sysmoment: E[sys^%s] <= %s at genus %d" % (format_float(res.beta), format_float(res.value), res.g))
    else:
        print(
            "sysmoment: divergent at beta = %s (probe fit attached)" % format_float(res.beta)
        )
    if resolved["check"]:
        finite = math.isfinite(res.value)
        checks = [
            CheckResult(
                name="moment-dichotomy",
                passed=bool(finite == (resolved["beta"] < 2.0)),
                value=res.value,
                lower=0.0,
                upper=math.inf,
                details={"beta": resolved["beta"]},
            )
        ]
        if finite:
            # boundary behavior: the beta = 2 probe must diverge cleanly
            probe = divergence_probe(resolved["g"], 2.0, (1e-2, 1e-3, 1e-4, 1e-5), budget=resolved["budget"])
            checks.append(
                CheckResult(
                    name="beta-2-divergence",
                    passed=bool(probe.get("slope", 0.0) > 0.0),
                    value=probe.get("slope", 0.0),
                    lower=0.0,
                    upper=math.inf,
                    details={"log_slopes": probe.get("log_slopes", [])},
                )
            )
        return _check_outcome(checks)
    return EXIT_OK


def cmd_mc(resolved):
    if resolved["seed"] is None:
        raise ConfigError("mc needs --seed (reproducibility is part of the contract)")
    cfg = SamplerConfig(
        genus=resolved["genus"],
        n_samples=resolved["n_samples"],
        seed=resolved["seed"],
        l_min=resolved["l_min"],
        l_max=resolved["l_max"],
        spectrum_cutoff=resolved["cutoff"],
        eta=resolved["eta"],
        alpha=resolved["alpha"],
        c_short=resolved["c_short"],
        beta_list=resolved["beta_list"],
    )
    report = mc_experiment(cfg, threads=resolved["threads"])
    out = resolved["out"]
    write_text_atomic(os.path.join(out, "mc.json"), canonical_json(report) + "\n")
    write_text_atomic(os.path.join(out, "mc_records.csv"), records_csv(report))
    write_text_atomic(os.path.join(out, "mc_hist.csv"), histogram_csv(report))
    _echo_config("mc", resolved)
    print(
        "mc: %d samples (%d excluded), mean log_det_norm %s -> %s"
        % (
            report["n_success"],
            report["n_excluded"],
            format_float(report["mean_log_det_norm"]) if report["mean_log_det_norm"] is not None else "n/a",
            os.path.join(out, "mc.json"),
        )
    )
    if resolved["check"]:
        e0 = constant_E()
        worst = 0.0
        consistent = True
        for rec in report["records"]:
            worst = max(worst, abs(rec["log_det_norm"] - rec["log_z0_norm"] - e0))
            member = (
                rec["lambda1_est"] >= cfg.eta
                and rec["short_pairs"] <= cfg.c_short * cfg.genus ** cfg.alpha
            )
            consistent = consistent and (member == rec["in_ag"])
        checks = [
            CheckResult(
                name="per-sample-identity",
                passed=bool(worst <= 1e-12),
                value=worst,
                lower=0.0,
                upper=1e-12,
                details={"n": len(report["records"])},
            ),
            CheckResult(
                name="ag-membership-consistency",
                passed=bool(consistent),
                value=float(consistent),
                lower=1.0,
                upper=1.0,
                details={},
            ),
        ]
        return _check_outcome(checks)
    return EXIT_OK


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "det": cmd_det,
    "zeta": cmd_zeta,
    "volumes": cmd_volumes,
    "sysmoment": cmd_sysmoment,
    "mc": cmd_mc,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hypdet",
        description="Length spectra, heat-trace determinants, and Weil-Petersson volume bounds.",
    )
    parser.add_argument("--version", action="version", version="hypdet " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--seed", type=int, help="random seed (mc)")
        p.add_argument("--threads", type=int, help="worker threads (mc)")
        p.add_argument(
            "--check", action="store_const", const=True, default=None,
            help="also run the invariant suite; nonzero exit on violation",
        )

    def add_surface(p):
        p.add_argument("--fn", help="Fenchel-Nielsen JSON file")
        p.add_argument("--generators", help="generator-matrix JSON file")
        p.add_argument("--genus", type=int, help="genus for generator input")
        p.add_argument("--cutoff", type=float, help="length cutoff")

    p = sub.add_parser("spectrum", help="enumerate the length spectrum")
    add_surface(p)
    add_common(p)

    p = sub.add_parser("det", help="determinant of the Laplacian, both routes")
    add_surface(p)
    p.add_argument("--R", type=float, help="long-time horizon of the heat route")
    p.add_argument("--eta-override", dest="eta_override", type=float,
                   help="externally asserted spectral gap")
    add_common(p)

    p = sub.add_parser("zeta", help="truncated log Z0(s) for s > 1")
    add_surface(p)
    p.add_argument("--s", type=float, help="evaluation point, s > 1")
    p.add_argument("--k-max", dest="k_max", type=int, help="product depth")
    add_common(p)

    p = sub.add_parser("volumes", help="volume polynomials and ratio table")
    p.add_argument("--gmax", type=int, help="ratio table up to this genus")
    p.add_argument("--g", type=int, help="single polynomial: genus")
    p.add_argument("--n", type=int, help="single polynomial: boundary count")
    p.add_argument("--budget", type=int, help="dimension budget 3g-3+n")
    p.add_argument("--t-grid", dest="t_grid", help="comma-separated boundary lengths for --check")
    add_common(p)

    p = sub.add_parser("sysmoment", help="systole moment upper bound")
    p.add_argument("--g", type=int, help="genus")
    p.add_argument("--beta", type=float, help="moment exponent")
    p.add_argument("--c-gamma", dest="c_gamma", type=float, help="collar constant in (0,1]")
    p.add_argument("--budget", type=int, help="dimension budget 3g-3+n")
    add_common(p)

    p = sub.add_parser("mc", help="Monte Carlo over random surfaces")
    p.add_argument("--genus", type=int, help="genus")
    p.add_argument("--n-samples", dest="n_samples", type=int, help="number of samples")
    p.add_argument("--l-min", dest="l_min", type=float, help="FN length floor (>= 0.05)")
    p.add_argument("--l-max", dest="l_max", type=float, help="FN length cap")
    p.add_argument("--cutoff", type=float, help="spectrum cutoff per sample")
    p.add_argument("--eta", type=float, help="gap threshold of the A(g) event")
    p.add_argument("--alpha", type=float, help="exponent of the short-pair cap")
    p.add_argument("--c-short", dest="c_short", type=float, help="constant of the short-pair cap")
    p.add_argument("--beta-list", dest="beta_list", help="comma-separated moment exponents in (0,2)")
    add_common(p)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = args.command
    flag_values = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config") and v is not None
    }
    try:
        resolved = _resolve_config(command, args.config, flag_values)
        os.makedirs(resolved["out"], exist_ok=True)
        return _COMMANDS[command](resolved)
    except ConfigError as exc:
        print("hypdet %s: %s" % (command, exc), file=sys.stderr)
        return EXIT_VALIDATION
    except HypdetError as exc:
        code = EXIT_VALIDATION
        for klass, exit_code in _EXIT_TABLE:
            if isinstance(exc, klass):
                code = exit_code
                break
        print("hypdet %s: %s: %s" % (command, type(exc).__name__, exc), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
