"""Run configuration and the JSON file formats used by the command line.

Config layout (all loss values in dB, intensities as mean photon numbers)::

    {
      "protocol": {"n_rounds": 1e10, "p_x": 0.7, "alpha2": 0.02, "s_cut": 4,
                   "intensities": {"mu": [0.5, 0.1, 1e-4],
                                   "p": [0.3333, 0.3333, 0.3334]}},
      "channel":  {"loss_db": 50, "p_d": 1e-8, "delta_ph": 0.091,
                   "delta_pol": 0.0, "f": 1.16},
      "security": {"eps_cor": 1e-10, "eps_s": 1e-10},
      "modes":    {"eps_budget": "strict", "intensity_convention": "intensity"},
      "optimizer": {"budget": 500, "seed": 0, "mu2": 1e-4},
      "sweep":    {"from_db": 30, "to_db": 80, "step_db": 5, "optimize": true}
    }

``protocol.alpha`` (amplitude) may be given instead of ``alpha2``.
``security`` may instead list ``eps_cor``, ``eps_pa``, ``eps_chernoff`` and
``eps_kato`` explicitly.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from . import __version__
from .channel import CONVENTIONS, ChannelParams
from .errors import ConfigError
from .keylength import default_security
from .protocol import Intensities, Issue, ObservedCounts, ProtocolParams, SecurityParams, validate

__all__ = [
    "RunConfig",
    "load_config",
    "config_sha256",
    "canonical_json",
    "write_atomic",
    "counts_to_dict",
    "counts_from_dict",
    "load_counts",
]

COUNTS_FORMAT = "tfkeyforge-counts"
EPS_BUDGETS = ("compat", "strict")


def _fail(code: str, msg: str):
    raise ConfigError.single(code, msg)


def _num(d: Dict[str, Any], key: str, where: str, default=None) -> float:
    if key not in d:
        if default is not None:
            return default
        _fail("schema", f"missing {where}.{key}")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail("schema", f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _int(d: Dict[str, Any], key: str, where: str, default: int) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            return int(v)
        _fail("schema", f"{where}.{key} must be an integer, got {v!r}")
    return v


def _section(d: Dict[str, Any], key: str, required: bool = True) -> Dict[str, Any]:
    if key not in d:
        if required:
            _fail("schema", f"missing section {key!r}")
        return {}
    v = d[key]
    if not isinstance(v, dict):
        _fail("schema", f"section {key!r} must be an object")
    return v


@dataclass(frozen=True)
class RunConfig:
    protocol: ProtocolParams
    channel: ChannelParams
    security: SecurityParams
    eps_budget: str = "strict"
    intensity_convention: str = "intensity"
    budget: int = 500
    seed: int = 0
    mu2: float = 1e-4
    sweep: Dict[str, Any] = field(default_factory=dict)
    security_input: Dict[str, float] = field(default_factory=dict)

    @property
    def compat(self) -> bool:
        return self.eps_budget == "compat"

    def to_dict(self) -> Dict[str, Any]:
        p = self.protocol
        it = p.intensities
        return {
            "protocol": {
                "n_rounds": p.n_rounds,
                "p_x": p.p_x,
                "alpha": p.alpha,
                "s_cut": p.s_cut,
                "intensities": {"mu": [it.mu0, it.mu1, it.mu2], "p": [it.p_mu0, it.p_mu1, it.p_mu2]},
            },
            "channel": {
                "loss_db": self.channel.loss_db,
                "p_d": self.channel.p_d,
                "delta_ph": self.channel.delta_ph,
                "delta_pol": self.channel.delta_pol,
                "f": self.channel.f,
            },
            "security": dict(self.security_input),
            "modes": {"eps_budget": self.eps_budget, "intensity_convention": self.intensity_convention},
            "optimizer": {"budget": self.budget, "seed": self.seed, "mu2": self.mu2},
            "sweep": dict(self.sweep),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RunConfig":
        if not isinstance(d, dict):
            _fail("schema", "config must be a JSON object")
        pr = _section(d, "protocol")
        ch = _section(d, "channel")
        se = _section(d, "security", required=False)
        modes = _section(d, "modes", required=False)
        opt = _section(d, "optimizer", required=False)
        sweep = _section(d, "sweep", required=False)

        its = _section(pr, "intensities")
        mu, pm = its.get("mu"), its.get("p")
        if not (isinstance(mu, list) and isinstance(pm, list) and len(mu) == 3 and len(pm) == 3):
            _fail("schema", "protocol.intensities needs 'mu' and 'p' lists of length 3")
        for v in mu + pm:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                _fail("schema", f"intensity values must be numbers, got {v!r}")
        if "alpha" in pr:
            alpha = _num(pr, "alpha", "protocol")
        else:
            alpha = math.sqrt(max(_num(pr, "alpha2", "protocol"), 0.0))
        protocol = ProtocolParams(
            n_rounds=_num(pr, "n_rounds", "protocol"),
            p_x=_num(pr, "p_x", "protocol"),
            alpha=alpha,
            intensities=Intensities(*(float(v) for v in mu), *(float(v) for v in pm)),
            s_cut=_int(pr, "s_cut", "protocol", 4),
        )
        issues = []
        channel = None
        try:
            channel = ChannelParams(
                loss_db=_num(ch, "loss_db", "channel", 0.0),
                p_d=_num(ch, "p_d", "channel", 1e-8),
                delta_ph=_num(ch, "delta_ph", "channel", 0.091),
                delta_pol=_num(ch, "delta_pol", "channel", 0.0),
                f=_num(ch, "f", "channel", 1.16),
            )
        except ConfigError as exc:
            issues.extend(exc.issues)
        except ValueError as exc:
            issues.append(Issue("channel", str(exc)))
        eps_budget = modes.get("eps_budget", "strict")
        if eps_budget not in EPS_BUDGETS:
            issues.append(Issue("schema", f"modes.eps_budget must be one of {EPS_BUDGETS}, got {eps_budget!r}"))
        convention = modes.get("intensity_convention", "intensity")
        if convention not in CONVENTIONS:
            issues.append(
                Issue("schema", f"modes.intensity_convention must be one of {CONVENTIONS}, got {convention!r}")
            )
        given = {k: _num(se, k, "security") for k in sorted(se)}
        security = _security_from_input(given, protocol.s_cut, eps_budget == "compat")
        issues.extend(validate(protocol, security))
        if issues:
            raise ConfigError(issues)
        return cls(
            protocol=protocol,
            channel=channel,
            security=security,
            eps_budget=eps_budget,
            intensity_convention=convention,
            budget=_int(opt, "budget", "optimizer", 500),
            seed=_int(opt, "seed", "optimizer", 0),
            mu2=_num(opt, "mu2", "optimizer", 1e-4),
            sweep=dict(sweep),
            security_input=given,
        )

    def with_modes(self, eps_budget: Optional[str] = None, convention: Optional[str] = None) -> "RunConfig":
        """Copy with command-line overrides applied (security split recomputed)."""
        d = self.to_dict()
        if eps_budget is not None:
            d["modes"]["eps_budget"] = eps_budget
        if convention is not None:
            d["modes"]["intensity_convention"] = convention
        return RunConfig.from_dict(d)


_EXPLICIT = ("eps_cor", "eps_pa", "eps_chernoff", "eps_kato")


def _security_from_input(given: Dict[str, float], s_cut: int, compat: bool) -> SecurityParams:
    if all(k in given for k in _EXPLICIT):
        return SecurityParams(*(given[k] for k in _EXPLICIT))
    unknown = set(given) - {"eps_cor", "eps_s"}
    if unknown:
        _fail("schema", f"security needs either eps_cor/eps_s or all of {_EXPLICIT}; got {sorted(given)}")
    return default_security(given.get("eps_cor", 1e-10), given.get("eps_s", 1e-10), s_cut, compat)


def _read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        _fail("io", f"file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail("schema", f"{path}: invalid JSON ({exc})")


def load_config(path: str) -> RunConfig:
    return RunConfig.from_dict(_read_json(path))


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, non-finite floats as null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_sha256(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` only once it is complete."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tfkeyforge-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def counts_to_dict(counts: ObservedCounts, metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {
        "format": COUNTS_FORMAT,
        "m_x": counts.m_x,
        "m_matrix": [list(r) for r in counts.m_matrix],
        "e_x_obs": counts.e_x_obs,
        "rounded": counts.rounded,
        "metadata": dict(metadata or {}),
        "tool_version": __version__,
    }


def counts_from_dict(d: Dict[str, Any]) -> ObservedCounts:
    if not isinstance(d, dict) or d.get("format") != COUNTS_FORMAT:
        _fail("schema", f"counts file must be an object with format {COUNTS_FORMAT!r}")
    mat = d.get("m_matrix")
    if not (isinstance(mat, list) and len(mat) == 3 and all(isinstance(r, list) and len(r) == 3 for r in mat)):
        _fail("schema", "m_matrix must be a 3x3 list")
    try:
        return ObservedCounts(
            _num(d, "m_x", "counts"),
            tuple(tuple(float(v) for v in r) for r in mat),
            _num(d, "e_x_obs", "counts"),
            rounded=bool(d.get("rounded", False)),
        )
    except (TypeError, ValueError) as exc:
        _fail("schema", f"invalid counts: {exc}")


def load_counts(path: str):
    d = _read_json(path)
    counts = counts_from_dict(d)
    return counts, dict(d.get("metadata") or {})
