"""Run-configuration files.

Format: flat typed ``key = value`` lines grouped under ``[section]``
headers, ``#`` comments.  Values are integers, reals (``inf`` allowed
where documented), comma-separated real lists, or bare strings.  The
parser validates everything it can and reports *all* problems with line
numbers, not just the first.

The full key table with defaults lives in :data:`SCHEMA`; resolved
defaults are always recorded in the run manifest, which is itself a valid
configuration file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigurationError

SAMPLERS = (
    "rejection", "rejection_auto_h", "importance", "importance_rejection",
    "rejection_control", "knn", "mcmc", "mcmc_method2", "mcmc_method3",
    "augmented_mcmc", "sis_rc", "adaptive_smc",
)

KERNEL_FAMILIES = ("uniform", "gaussian", "epanechnikov", "triangular")
METRIC_KINDS = ("euclidean", "weighted_euclidean", "mahalanobis")
PROPOSAL_KINDS = ("prior", "normal", "defensive")

_REQUIRED = object()


@dataclass(frozen=True)
class Key:
    """One schema entry: value type, default (or required), constraint."""

    type: str                      # int | float | float_list | str
    default: object = _REQUIRED
    choices: tuple = None
    check: object = None           # callable(value) -> error message or None
    help: str = ""

    @property
    def required(self):
        return self.default is _REQUIRED


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonnegative(v):
    return None if v >= 0 else "must be nonnegative"


def _at_least_1(v):
    return None if v >= 1 else "must be at least 1"


def _open_unit(v):
    return None if 0 < v < 1 else "must lie in (0,1)"


def _finite_positive(v):
    return None if (v > 0 and math.isfinite(v)) else "must be positive and finite"


SCHEMA = {
    "run": {
        "sampler": Key("str", choices=SAMPLERS, help="which sampler to run"),
        "seed": Key("int", default=0, help="64-bit master seed"),
        "output_dir": Key("str", default="abcmc-out", help="artifact directory"),
    },
    "model": {
        "name": Key("str", choices=("normal_mean", "normal_mean_sd")),
        "n_obs": Key("int", default=10, check=_nonnegative),
        "data_sd": Key("float", default=1.0, check=_finite_positive),
        "prior_mean": Key("float_list", default=[0.0]),
        "prior_sd": Key("float_list", default=[10.0]),
        "observed_summary": Key("float_list", default=[1.0]),
    },
    "kernel": {
        "family": Key("str", default="uniform", choices=KERNEL_FAMILIES),
        "h": Key("float", default=None, check=_finite_positive,
                 help="kernel scale for fixed-tolerance samplers"),
        "schedule": Key("float_list", default=None,
                        help="tolerance ladder for sis_rc; first entry may be inf"),
    },
    "metric": {
        "kind": Key("str", default="euclidean", choices=METRIC_KINDS),
        "weights": Key("float_list", default=None,
                       help="positive weights (weighted_euclidean)"),
        "matrix": Key("float_list", default=None,
                      help="row-major SPD matrix entries (mahalanobis)"),
    },
    "proposal": {
        "kind": Key("str", default="prior", choices=PROPOSAL_KINDS),
        "mean": Key("float_list", default=None),
        "sd": Key("float_list", default=None),
        "prior_weight": Key("float", default=0.5, check=_open_unit,
                            help="prior mixture mass for the defensive kind"),
    },
    "sampler": {
        "n": Key("int", default=None, check=_at_least_1,
                 help="output sample / particle count"),
        "n_total": Key("int", default=None, check=_at_least_1,
                       help="total simulation budget (rejection_auto_h, knn)"),
        "n_replicates": Key("int", default=1, check=_at_least_1),
        "m_bound": Key("float", default=None, check=_positive),
        "max_attempts": Key("int", default=10_000_000, check=_at_least_1),
        "max_attempts_per_particle": Key("int", default=1_000_000,
                                         check=_at_least_1),
        "threshold_c": Key("float", default=None, check=_positive),
        "quantile": Key("float", default=None, check=_open_unit),
        "iterations": Key("int", default=None, check=_at_least_1),
        "burn_in": Key("int", default=0, check=_nonnegative),
        "move_scale": Key("float", default=1.0, check=_finite_positive),
        "init_max_tries": Key("int", default=10_000, check=_at_least_1),
        "init_theta": Key("float_list", default=None),
        "per_iter_sim_cap": Key("int", default=1_000_000, check=_at_least_1),
        "h_init": Key("float", default=None, check=_finite_positive),
        "h_max": Key("float", default=100.0, check=_finite_positive),
        "h_prior_rate": Key("float", default=1.0, check=_finite_positive),
        "h_move_scale": Key("float", default=0.3, check=_finite_positive),
        "c_values": Key("float_list", default=None),
        "c_quantile": Key("float", default=None, check=_open_unit),
        "proposal_strategy": Key("str", default="kde",
                                 choices=("kde", "parametric")),
        "alpha": Key("float", default=None,
                     check=lambda v: None if 0 < v < 1
                     else "alpha must lie in (0,1)"),
        "resample_threshold": Key("float", default=None, check=_positive),
        "resampling_scheme": Key("str", default="systematic",
                                 choices=("multinomial", "systematic")),
        "min_move_rate": Key("float", default=0.015, check=_nonnegative),
        "min_h": Key("float", default=0.0, check=_nonnegative),
        "max_stages": Key("int", default=200, check=_at_least_1),
        "moves_per_stage": Key("int", default=1, check=_at_least_1),
        "update": Key("str", default="joint",
                      choices=("joint", "componentwise")),
    },
}

# keys every sampler must have resolved (beyond universal ones)
_REQUIRES = {
    "rejection": [("sampler", "n"), ("kernel", "h")],
    "rejection_auto_h": [("sampler", "n"), ("sampler", "n_total")],
    "importance": [("sampler", "n"), ("kernel", "h")],
    "importance_rejection": [("sampler", "n"), ("kernel", "h")],
    "rejection_control": [("sampler", "n"), ("kernel", "h")],
    "knn": [("sampler", "n"), ("sampler", "n_total")],
    "mcmc": [("sampler", "iterations"), ("kernel", "h")],
    "mcmc_method2": [("sampler", "iterations"), ("kernel", "h")],
    "mcmc_method3": [("sampler", "iterations"), ("kernel", "h")],
    "augmented_mcmc": [("sampler", "iterations"), ("sampler", "h_init")],
    "sis_rc": [("sampler", "n"), ("kernel", "schedule")],
    "adaptive_smc": [("sampler", "n"), ("sampler", "alpha")],
}

_SECTION_ORDER = ("run", "model", "kernel", "metric", "proposal", "sampler")


@dataclass
class RunConfiguration:
    """Fully resolved and validated configuration.

    ``sections`` maps section name to {key: typed value}; every key of the
    schema is present after resolution (defaults filled in).
    """

    sections: dict
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def get(self, section, key):
        return self.sections[section][key]

    @property
    def sampler(self):
        return self.get("run", "sampler")

    @property
    def seed(self):
        return self.get("run", "seed")


def _convert(raw, key: Key):
    """Typed conversion; returns (value, error message or None)."""
    raw = raw.strip()
    if key.type == "int":
        try:
            return int(raw), None
        except ValueError:
            return None, f"expected an integer, got {raw!r}"
    if key.type == "float":
        try:
            return float(raw), None
        except ValueError:
            return None, f"expected a real number, got {raw!r}"
    if key.type == "float_list":
        try:
            return [float(p) for p in raw.split(",") if p.strip() != ""], None
        except ValueError:
            return None, f"expected comma-separated real numbers, got {raw!r}"
    return raw, None


def _render_value(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def render_config(cfg: RunConfiguration) -> str:
    """Canonical text form; ``parse_config(render_config(cfg)) == cfg``.

    Unset optional keys are omitted, so the output stays minimal while
    resolving identically.
    """
    out = []
    for section in _SECTION_ORDER:
        body = []
        for key_name, key in SCHEMA[section].items():
            value = cfg.sections[section][key_name]
            if value is None:
                continue
            if not key.required and value == key.default:
                continue
            body.append(f"{key_name} = {_render_value(value)}")
        if body:
            out.append(f"[{section}]")
            out.extend(body)
            out.append("")
    return "\n".join(out)


def _cross_checks(sections, lines, errors):
    """Sampler-specific constraints, checked before any simulation."""

    def line_of(section, key):
        return lines.get((section, key))

    def err(section, key, message):
        errors.append((line_of(section, key), f"[{section}] {key}: {message}"))

    sampler = sections["run"].get("sampler")
    if sampler is None:
        return
    for section, key in _REQUIRES.get(sampler, []):
        if sections[section].get(key) is None:
            errors.append((None, f"[{section}] {key}: required by sampler "
                           f"{sampler!r} but not set"))

    kernel_family = sections["kernel"]["family"]
    compact = kernel_family != "gaussian"
    if sampler in ("rejection_auto_h", "knn") and not compact:
        err("kernel", "family",
            "automatic tolerance selection needs a compact-support family")
    if sampler in ("mcmc_method2", "mcmc_method3") and kernel_family != "uniform":
        err("kernel", "family", f"{sampler} requires the uniform kernel")

    n = sections["sampler"].get("n")
    n_total = sections["sampler"].get("n_total")
    if sampler == "knn" and None not in (n, n_total) and n_total < n:
        err("sampler", "n_total", "must be at least n")
    if sampler == "rejection_auto_h" and None not in (n, n_total) and n_total < n:
        err("sampler", "n_total", "must be at least n")

    if sampler == "rejection_control":
        c = sections["sampler"].get("threshold_c")
        q = sections["sampler"].get("quantile")
        if c is not None and q is not None:
            err("sampler", "threshold_c",
                "set at most one of threshold_c / quantile")
        if c is None and q is None:
            sections["sampler"]["quantile"] = 0.5  # documented default

    if sampler == "sis_rc":
        schedule = sections["kernel"].get("schedule")
        if schedule is not None:
            if any(h <= 0 for h in schedule):
                err("kernel", "schedule", "tolerances must be positive")
            if any(b > a for a, b in zip(schedule, schedule[1:])):
                err("kernel", "schedule",
                    "tolerance schedule must be non-increasing")
            if any(math.isinf(h) for h in schedule[1:]):
                err("kernel", "schedule", "only the first entry may be inf")
            cv = sections["sampler"].get("c_values")
            if cv is not None and len(cv) != len(schedule) - 1:
                err("sampler", "c_values",
                    "need one threshold per stage after the first")
        cv = sections["sampler"].get("c_values")
        cq = sections["sampler"].get("c_quantile")
        if cv is not None and cq is not None:
            err("sampler", "c_values", "set at most one of c_values / c_quantile")
        if cv is None and cq is None:
            sections["sampler"]["c_quantile"] = 0.5  # documented default

    if sampler == "adaptive_smc":
        e = sections["sampler"].get("resample_threshold")
        if e is not None and n is not None and not 1 <= e <= n:
            err("sampler", "resample_threshold", "must lie in [1, n]")

    if sampler == "augmented_mcmc":
        h_init = sections["sampler"].get("h_init")
        h_max = sections["sampler"].get("h_max")
        if h_init is not None and h_max is not None and h_init > h_max:
            err("sampler", "h_init", "must not exceed h_max")

    metric_kind = sections["metric"]["kind"]
    if metric_kind == "weighted_euclidean" and sections["metric"]["weights"] is None:
        err("metric", "kind", "weighted_euclidean requires metric weights")
    if metric_kind == "mahalanobis" and sections["metric"]["matrix"] is None:
        err("metric", "kind", "mahalanobis requires a metric matrix")

    proposal_kind = sections["proposal"]["kind"]
    if proposal_kind in ("normal", "defensive"):
        if sections["proposal"]["mean"] is None or sections["proposal"]["sd"] is None:
            err("proposal", "kind", f"{proposal_kind} proposal requires mean and sd")


def parse_config(text: str) -> RunConfiguration:
    """Parse and fully validate a configuration document.

    Raises :class:`ConfigurationError` carrying the complete list of
    ``(line, message)`` problems when anything is wrong.
    """
    sections = {name: {} for name in SCHEMA}
    lines = {}
    errors = []
    current = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in SCHEMA:
                errors.append((lineno, f"unknown section [{name}]"))
                current = None
            else:
                current = name
            continue
        if "=" not in line:
            errors.append((lineno, f"expected 'key = value', got {raw_line.strip()!r}"))
            continue
        if current is None:
            errors.append((lineno, "key outside any recognised section"))
            continue
        key_name, raw_value = (p.strip() for p in line.split("=", 1))
        schema = SCHEMA[current]
        if key_name not in schema:
            errors.append((lineno, f"unknown key {key_name!r} in [{current}]"))
            continue
        if key_name in sections[current]:
            errors.append((lineno, f"duplicate key {key_name!r} in [{current}]"))
            continue
        key = schema[key_name]
        value, problem = _convert(raw_value, key)
        if problem:
            errors.append((lineno, f"[{current}] {key_name}: {problem}"))
            continue
        if key.choices and value not in key.choices:
            errors.append((lineno, f"[{current}] {key_name}: {value!r} not one "
                           f"of {key.choices}"))
            continue
        if key.check is not None and value is not None:
            if key.type == "float_list":
                problem = None
            else:
                problem = key.check(value)
            if problem:
                errors.append((lineno, f"[{current}] {key_name}: {problem}"))
                continue
        sections[current][key_name] = value
        lines[(current, key_name)] = lineno

    # fill defaults, report missing required keys
    for section, schema in SCHEMA.items():
        for key_name, key in schema.items():
            if key_name in sections[section]:
                continue
            if key.required:
                errors.append((None, f"[{section}] {key_name}: required key missing"))
                sections[section][key_name] = None
            else:
                sections[section][key_name] = key.default

    _cross_checks(sections, lines, errors)
    if errors:
        listing = "; ".join(
            f"line {ln}: {msg}" if ln else msg for ln, msg in errors
        )
        raise ConfigurationError(f"invalid configuration: {listing}", errors=errors)
    return RunConfiguration(sections=sections, lines=lines)
