"""JSON system-spec files.

A spec names either a catalog family with parameters::

    {"name": "fig1", "family": "example2", "params": {"a": 2, "beta": 0.3},
     "alpha": 0.5, "mu": 1}

or a full custom profile set (sigma, tau, rho and y as expression strings,
optionally rho_bar). An ``equivalent`` block {tilde_sigma, tilde_tau} feeds
the make-equivalent command.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from . import expr as ex
from .families import custom_system, descriptor, instantiate
from .scaling import SolvableSystem

CUSTOM_KEYS = ("sigma", "tau", "rho", "y")
OPTIONAL_CUSTOM_KEYS = ("rho_bar",)

_EXPR = {"type": "string", "minLength": 1}

SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "family": {"type": "string"},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "alpha": {"type": "number"},
        "mu": {"type": "number"},
        "domain": {"enum": ["real_line", "half_line"]},
        "reaction": {"enum": ["source", "state"]},
        "sigma": _EXPR, "tau": _EXPR, "rho": _EXPR, "rho_bar": _EXPR, "g": _EXPR, "y": _EXPR,
        "equivalent": {
            "type": "object",
            "properties": {"tilde_sigma": _EXPR, "tilde_tau": _EXPR},
            "required": ["tilde_sigma", "tilde_tau"],
            "additionalProperties": False,
        },
    },
    "required": ["alpha", "mu"],
    "additionalProperties": False,
}


class SpecError(ValueError):
    """Unreadable, malformed or inconsistent spec file."""


@dataclass
class SystemSpec:
    name: str
    alpha: float
    mu: float
    family: Optional[str] = None
    params: dict = field(default_factory=dict)
    domain: Optional[str] = None
    reaction: Optional[str] = None
    exprs: dict = field(default_factory=dict)
    g: Optional[str] = None
    equivalent: Optional[dict] = None

    @property
    def is_family(self) -> bool:
        return self.family is not None


def _validate(doc) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        msgs = []
        for err in errors:
            where = "/".join(str(p) for p in err.path) or "<root>"
            msgs.append(f"{where}: {err.message}")
        raise SpecError("invalid spec: " + "; ".join(msgs))


def parse_spec(doc) -> SystemSpec:
    """Validate a decoded JSON document and return a :class:`SystemSpec`."""
    _validate(doc)
    custom = [k for k in CUSTOM_KEYS + OPTIONAL_CUSTOM_KEYS if k in doc]
    family = doc.get("family")
    if family is not None:
        if custom:
            raise SpecError(f"spec mixes family {family!r} with custom profiles {custom}")
        desc = descriptor_or_error(family)
        if "g" in doc and family != "example3":
            raise SpecError("'g' is only accepted with family example3")
        if "domain" in doc and doc["domain"] != desc.domain.kind.value:
            raise SpecError(f"{family} lives on the {desc.domain.kind.value}, "
                            f"not {doc['domain']}")
        if "reaction" in doc:
            raise SpecError("'reaction' is fixed by the family")
    else:
        missing = [k for k in CUSTOM_KEYS if k not in doc]
        if missing:
            raise SpecError(f"custom spec needs {list(CUSTOM_KEYS)}; missing {missing}")
        if "g" in doc:
            raise SpecError("'g' is only accepted with family example3")
    return SystemSpec(
        name=doc.get("name", family or "custom"),
        alpha=float(doc["alpha"]), mu=float(doc["mu"]),
        family=family,
        params={k: float(v) for k, v in doc.get("params", {}).items()},
        domain=doc.get("domain"),
        reaction=doc.get("reaction"),
        exprs={k: doc[k] for k in custom},
        g=doc.get("g"),
        equivalent=doc.get("equivalent"))


def descriptor_or_error(family: str):
    try:
        return descriptor(family)
    except ValueError as err:
        raise SpecError(str(err)) from None


def load_spec(path) -> SystemSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise SpecError(f"cannot read {path}: {err.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(f"{path}: malformed JSON at line {err.lineno} column {err.colno}: "
                        f"{err.msg}") from None
    return parse_spec(doc)


def build_system(spec: SystemSpec, certify_now: bool = True) -> SolvableSystem:
    """Instantiate the system described by ``spec``.

    Family systems always certify on construction; custom systems do so
    only when ``certify_now`` is set. Expression errors surface as
    :class:`SpecError`.
    """
    try:
        if spec.is_family:
            return instantiate(spec.family, spec.params, spec.alpha, spec.mu,
                               g=spec.g, name=spec.name)
        e = spec.exprs
        return custom_system(
            e["sigma"], e["tau"], e["rho"], e["y"], spec.params, spec.alpha, spec.mu,
            spec.domain or "real_line", rho_bar=e.get("rho_bar"), name=spec.name,
            reaction=spec.reaction or "source", certify_now=certify_now)
    except ex.ExprError as err:
        raise SpecError(f"expression error: {err}") from None


def system_to_doc(sys: SolvableSystem, name: str) -> dict:
    """A custom spec document reproducing ``sys`` (closed-form y required)."""
    p = sys.profiles
    if sys.y_expr is None:
        raise SpecError("cannot serialise a system without a closed-form y")
    doc = {
        "name": name,
        "params": dict(sys.params),
        "alpha": sys.alpha,
        "mu": sys.mu,
        "domain": p.domain.kind.value,
        "reaction": sys.reaction,
        "sigma": ex.render(p.sigma),
        "tau": ex.render(p.tau),
        "rho": ex.render(p.rho),
        "y": ex.render(sys.y_expr),
    }
    if p.rho_bar is not None:
        doc["rho_bar"] = ex.render(p.rho_bar)
    return doc
