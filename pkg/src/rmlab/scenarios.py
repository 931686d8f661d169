"""Scenario configuration: TOML schema, validation, builtin scenarios.

A scenario bundles everything one experiment needs: the interface problem
(chi, a_bar, f on a domain), the network shape, the training
hyper-parameters, optional multi-phase plans, and output settings.  Configs
are plain key/value tables serialized as TOML; parsing and emission
round-trip bit-for-bit, and the SHA-256 of the canonical serialization
stamps every output file so results stay traceable to their configuration.
"""

import hashlib
import json
from dataclasses import dataclass, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .exact import BVPProblem
from .network import ARCHITECTURES, init_xavier
from .piecewise import CoefficientDecomposition, PiecewiseFunction1D
from .training import RISK_KINDS, TrainConfig

__all__ = [
    "ScenarioConfig",
    "NetworkSpec",
    "OutputSpec",
    "PhaseSpec",
    "builtin_scenario",
    "BUILTIN_SCENARIOS",
    "config_sha256",
]


@dataclass(frozen=True)
class NetworkSpec:
    widths: tuple = (1, 64, 64, 64, 1)
    architecture: str = "plain"
    seed: int = 0


@dataclass(frozen=True)
class OutputSpec:
    directory: str = ""
    grid_points: int = 10001


@dataclass(frozen=True)
class PhaseSpec:
    kind: str
    steps: int
    seed: int | None = None


def _err(path, message):
    return ValueError(f"{path}: {message}")


def _get(table, key, path, kind, default=_err):
    if key not in table:
        if default is not _err:
            return default
        raise _err(path, f"missing required key {key!r}")
    value = table[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _err(f"{path}.{key}", f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _err(f"{path}.{key}", f"expected an integer, got {value!r}")
        return int(value)
    if kind is str:
        if not isinstance(value, str):
            raise _err(f"{path}.{key}", f"expected a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise _err(f"{path}.{key}", f"expected an array, got {value!r}")
        return value
    raise AssertionError(kind)


def _float_list(values, path):
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise _err(f"{path}[{i}]", f"expected a number, got {v!r}")
        out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment: problem data + network + training + outputs."""

    name: str
    domain: tuple = (-1.0, 1.0)
    chi_breakpoints: tuple = ()
    chi_values: tuple = (1.0,)
    a_bar: tuple = (1.0,)
    f_breakpoints: tuple = ()
    f_pieces: tuple = ((0.0,),)
    network: NetworkSpec = NetworkSpec()
    training: TrainConfig = TrainConfig()
    outputs: OutputSpec = OutputSpec()
    phases: tuple | None = None

    # -- construction of the runtime objects ------------------------------

    def build_problem(self):
        try:
            chi = PiecewiseFunction1D(
                self.domain, self.chi_breakpoints, [[v] for v in self.chi_values]
            )
            decomp = CoefficientDecomposition(chi, list(self.a_bar))
            f = PiecewiseFunction1D(self.domain, self.f_breakpoints, self.f_pieces)
            return BVPProblem(decomp, f)
        except ValueError as exc:
            raise ValueError(f"problem: {exc}") from exc

    def build_network(self):
        try:
            return init_xavier(
                self.network.widths, self.network.seed, self.network.architecture
            )
        except ValueError as exc:
            raise ValueError(f"network: {exc}") from exc

    def phase_plan(self):
        """Training configs for each phase; defaults to one phase.

        An explicit phase list overrides the single-phase (risk_kind, steps)
        of [training]; phases without their own seed get training.seed + k
        so later phases never replay the first phase's sample stream.
        """
        if not self.phases:
            return [self.training]
        plan = []
        for k, ph in enumerate(self.phases):
            seed = ph.seed if ph.seed is not None else self.training.seed + k
            plan.append(
                replace(self.training, risk_kind=ph.kind, steps=ph.steps, seed=seed)
            )
        return plan

    def validate(self):
        """Full validation; raises ValueError naming the offending field."""
        if not self.name or not isinstance(self.name, str):
            raise _err("name", "must be a nonempty string")
        if len(self.domain) != 2 or not self.domain[0] < self.domain[1]:
            raise _err("problem.domain", f"must be [lo, hi] with lo < hi, got {list(self.domain)}")
        if len(self.chi_values) != len(self.chi_breakpoints) + 1:
            raise _err(
                "problem.chi.values",
                f"need {len(self.chi_breakpoints) + 1} values for "
                f"{len(self.chi_breakpoints)} breakpoints, got {len(self.chi_values)}",
            )
        if any(v <= 0 for v in self.chi_values):
            raise _err("problem.chi.values", "all values must be > 0")
        if len(self.f_pieces) != len(self.f_breakpoints) + 1:
            raise _err(
                "problem.f.pieces",
                f"need {len(self.f_breakpoints) + 1} pieces for "
                f"{len(self.f_breakpoints)} breakpoints, got {len(self.f_pieces)}",
            )
        if self.network.architecture not in ARCHITECTURES:
            raise _err(
                "network.architecture",
                f"must be one of {list(ARCHITECTURES)}, got {self.network.architecture!r}",
            )
        if self.outputs.grid_points < 2:
            raise _err("outputs.grid_points", "must be >= 2")
        if self.phases is not None:
            for k, ph in enumerate(self.phases):
                if ph.kind not in RISK_KINDS:
                    raise _err(
                        f"phases[{k}].kind",
                        f"must be one of {list(RISK_KINDS)}, got {ph.kind!r}",
                    )
                if ph.steps < 0:
                    raise _err(f"phases[{k}].steps", "must be >= 0")
        self.build_problem()  # domain/breakpoint/ellipticity checks
        self.build_network()
        return self

    # -- dict / TOML round trip -------------------------------------------

    def to_dict(self):
        d = {
            "name": self.name,
            "problem": {
                "domain": list(self.domain),
                "chi": {
                    "breakpoints": list(self.chi_breakpoints),
                    "values": list(self.chi_values),
                },
                "a_bar": {"coeffs": list(self.a_bar)},
                "f": {
                    "breakpoints": list(self.f_breakpoints),
                    "pieces": [list(p) for p in self.f_pieces],
                },
            },
            "network": {
                "widths": list(self.network.widths),
                "architecture": self.network.architecture,
                "seed": self.network.seed,
            },
            "training": {
                "risk_kind": self.training.risk_kind,
                "steps": self.training.steps,
                "optimizer": self.training.optimizer,
                "lr": self.training.lr,
                **(
                    {"lr_final": self.training.lr_final}
                    if self.training.lr_final is not None
                    else {}
                ),
                "beta1": self.training.beta1,
                "beta2": self.training.beta2,
                "eps": self.training.eps,
                "gamma": self.training.gamma,
                "n_int": self.training.n_int,
                "sample_mode": self.training.sample_mode,
                "seed": self.training.seed,
                "resample_every": self.training.resample_every,
            },
            "outputs": {
                "directory": self.outputs.directory,
                "grid_points": self.outputs.grid_points,
            },
        }
        if self.phases is not None:
            d["phases"] = [
                {"kind": ph.kind, "steps": ph.steps}
                | ({"seed": ph.seed} if ph.seed is not None else {})
                for ph in self.phases
            ]
        return d

    @classmethod
    def from_dict(cls, d):
        name = _get(d, "name", "", str)
        prob = d.get("problem")
        if not isinstance(prob, dict):
            raise _err("problem", "missing or not a table")
        domain = _float_list(_get(prob, "domain", "problem", list), "problem.domain")
        chi = prob.get("chi")
        if not isinstance(chi, dict):
            raise _err("problem.chi", "missing or not a table")
        chi_bp = _float_list(
            _get(chi, "breakpoints", "problem.chi", list), "problem.chi.breakpoints"
        )
        chi_vals = _float_list(
            _get(chi, "values", "problem.chi", list), "problem.chi.values"
        )
        abar_tab = prob.get("a_bar")
        if not isinstance(abar_tab, dict):
            raise _err("problem.a_bar", "missing or not a table")
        a_bar = _float_list(
            _get(abar_tab, "coeffs", "problem.a_bar", list), "problem.a_bar.coeffs"
        )
        ftab = prob.get("f")
        if not isinstance(ftab, dict):
            raise _err("problem.f", "missing or not a table")
        f_bp = _float_list(
            _get(ftab, "breakpoints", "problem.f", list), "problem.f.breakpoints"
        )
        f_pieces_raw = _get(ftab, "pieces", "problem.f", list)
        f_pieces = []
        for i, piece in enumerate(f_pieces_raw):
            if not isinstance(piece, list):
                raise _err(f"problem.f.pieces[{i}]", "expected an array of coefficients")
            f_pieces.append(_float_list(piece, f"problem.f.pieces[{i}]"))

        net_tab = d.get("network", {})
        if not isinstance(net_tab, dict):
            raise _err("network", "not a table")
        widths = tuple(
            int(w) for w in _get(net_tab, "widths", "network", list, [1, 64, 64, 64, 1])
        )
        network = NetworkSpec(
            widths=widths,
            architecture=_get(net_tab, "architecture", "network", str, "plain"),
            seed=_get(net_tab, "seed", "network", int, 0),
        )

        tr = d.get("training", {})
        if not isinstance(tr, dict):
            raise _err("training", "not a table")
        try:
            training = TrainConfig(
                risk_kind=_get(tr, "risk_kind", "training", str, "rm"),
                steps=_get(tr, "steps", "training", int, 1000),
                optimizer=_get(tr, "optimizer", "training", str, "adam"),
                lr=_get(tr, "lr", "training", float, 1e-3),
                lr_final=(
                    _get(tr, "lr_final", "training", float)
                    if "lr_final" in tr
                    else None
                ),
                beta1=_get(tr, "beta1", "training", float, 0.9),
                beta2=_get(tr, "beta2", "training", float, 0.999),
                eps=_get(tr, "eps", "training", float, 1e-8),
                gamma=_get(tr, "gamma", "training", float, 1.0),
                n_int=_get(tr, "n_int", "training", int, 1000),
                sample_mode=_get(tr, "sample_mode", "training", str, "iid_uniform"),
                seed=_get(tr, "seed", "training", int, 0),
                resample_every=_get(tr, "resample_every", "training", int, 0),
            )
        except ValueError as exc:
            raise _err("training", str(exc)) from exc

        out_tab = d.get("outputs", {})
        if not isinstance(out_tab, dict):
            raise _err("outputs", "not a table")
        outputs = OutputSpec(
            directory=_get(out_tab, "directory", "outputs", str, name),
            grid_points=_get(out_tab, "grid_points", "outputs", int, 10001),
        )

        phases = None
        if "phases" in d:
            if not isinstance(d["phases"], list):
                raise _err("phases", "expected an array of tables")
            phases = []
            for k, ph in enumerate(d["phases"]):
                if not isinstance(ph, dict):
                    raise _err(f"phases[{k}]", "expected a table")
                phases.append(
                    PhaseSpec(
                        kind=_get(ph, "kind", f"phases[{k}]", str),
                        steps=_get(ph, "steps", f"phases[{k}]", int),
                        seed=(
                            _get(ph, "seed", f"phases[{k}]", int)
                            if "seed" in ph
                            else None
                        ),
                    )
                )
            phases = tuple(phases)

        cfg = cls(
            name=name,
            domain=tuple(domain),
            chi_breakpoints=chi_bp,
            chi_values=chi_vals,
            a_bar=a_bar,
            f_breakpoints=f_bp,
            f_pieces=tuple(f_pieces),
            network=network,
            training=training,
            outputs=outputs,
            phases=phases,
        )
        return cfg.validate()

    def to_toml(self):
        return _toml_dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text):
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ValueError(f"config is not valid TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_toml_file(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        return cls.from_toml(raw.decode("utf-8"))

    def to_toml_file(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_toml())


# -- minimal TOML emission for the restricted schema ------------------------


def _toml_scalar(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("non-finite floats are not allowed in configs")
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ValueError(f"cannot serialize {value!r} to TOML")


def _toml_table(table, prefix, lines):
    scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
    subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
    if prefix:
        lines.append(f"[{prefix}]")
    for k, v in scalars.items():
        lines.append(f"{k} = {_toml_scalar(v)}")
    if scalars or prefix:
        lines.append("")
    for k, v in subtables.items():
        _toml_table(v, f"{prefix}.{k}" if prefix else k, lines)


def _toml_dumps(data):
    lines = []
    top_scalars = {
        k: v for k, v in data.items() if not isinstance(v, (dict, list)) or k == "name"
    }
    for k, v in top_scalars.items():
        lines.append(f"{k} = {_toml_scalar(v)}")
    lines.append("")
    for k, v in data.items():
        if k in top_scalars:
            continue
        if isinstance(v, dict):
            _toml_table(v, k, lines)
        elif isinstance(v, list) and all(isinstance(e, dict) for e in v):
            for entry in v:
                lines.append(f"[[{k}]]")
                for kk, vv in entry.items():
                    lines.append(f"{kk} = {_toml_scalar(vv)}")
                lines.append("")
        else:
            lines.append(f"{k} = {_toml_scalar(v)}")
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + "\n"


def config_sha256(config):
    """SHA-256 of the canonical TOML serialization."""
    return hashlib.sha256(config.to_toml().encode("utf-8")).hexdigest()


# -- builtin scenarios -------------------------------------------------------

# The two reference scenarios share A: chi = 1/2 left of 0, 1 right of it,
# a_bar = 1.  They differ in f: (0, -2) makes the two solutions split
# (the modified solution's slope at the interface is -1/2), while (-1, -2)
# tunes f so both solutions coincide at x^2 - 1 with zero interface slope.
_BUILTINS = {
    "failure-1d": {
        "f_pieces": ((0.0,), (-2.0,)),
    },
    "invariant-1d": {
        "f_pieces": ((-1.0,), (-2.0,)),
    },
}

BUILTIN_SCENARIOS = tuple(sorted(_BUILTINS))


def builtin_scenario(name):
    """One of the named builtin scenarios, fully configured."""
    if name not in _BUILTINS:
        raise ValueError(
            f"unknown scenario {name!r}; builtins: {', '.join(BUILTIN_SCENARIOS)}"
        )
    spec = _BUILTINS[name]
    return ScenarioConfig(
        name=name,
        domain=(-1.0, 1.0),
        chi_breakpoints=(0.0,),
        chi_values=(0.5, 1.0),
        a_bar=(1.0,),
        f_breakpoints=(0.0,),
        f_pieces=spec["f_pieces"],
        network=NetworkSpec(widths=(1, 64, 64, 64, 1), architecture="plain", seed=0),
        training=TrainConfig(
            risk_kind="rm",
            steps=20000,
            optimizer="adam",
            lr=3e-3,
            # cosine-anneal the step size: constant-lr Adam keeps bouncing at
            # a risk floor ~2e-3 on these problems without ever settling
            lr_final=1e-5,
            gamma=1.0,
            n_int=1000,
            sample_mode="iid_uniform",
            # seed 7 leaves a ~5e-3 sample-free margin around the interface;
            # seed 0 drops a sample within 5e-5 of it, which pins the
            # empirical interior risk far above the population value
            seed=7,
            resample_every=0,
        ),
        outputs=OutputSpec(directory=name, grid_points=10001),
    ).validate()
