"""JSON readers and writers for profiles, distributions, mechanisms and samples.

Every reader raises :class:`DomainError` whose message starts with the path of
the offending field, e.g. ``atoms[2].prob: ...``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import DomainError
from .mechanisms import MechanismClass
from .valuations import CostFunction, DistributionSpec, Valuation, ValuationProfile


def _field(obj, key, path, default=...):
    if not isinstance(obj, dict):
        raise DomainError(f"{path}: expected an object")
    if key not in obj:
        if default is ...:
            raise DomainError(f"{path}.{key}: missing required field")
        return default
    return obj[key]


def _number(x, path) -> float:
    try:
        return float(str(x)) if isinstance(x, str) else float(x)
    except (TypeError, ValueError):
        raise DomainError(f"{path}: {x!r} is not a number") from None


def _wrap(path, fn, *args):
    try:
        return fn(*args)
    except DomainError as e:
        raise DomainError(f"{path}: {e}") from None


def _table(raw, path) -> dict:
    """``{"1,0": 5}`` or ``[[[1, 0], 5], ...]`` to ``{(1, 0): 5.0}``."""
    if isinstance(raw, dict):
        items = raw.items()
    elif isinstance(raw, list):
        items = [(tuple(k), v) for k, v in raw]
    else:
        raise DomainError(f"{path}: expected an object or a list of [bundle, value] pairs")
    out = {}
    for k, v in items:
        key = tuple(int(x) for x in k.split(",")) if isinstance(k, str) else tuple(int(x) for x in k)
        out[key] = _number(v, f"{path}[{k}]")
    return out


def _table_out(caps, values) -> dict:
    from .valuations import bundle_lattice

    return {",".join(map(str, q)): v for q, v in zip(bundle_lattice(caps), values)}


def valuation_from_json(raw, caps, path="buyer") -> Valuation:
    kind = _field(raw, "kind", path)
    if kind in ("additive", "unit_demand", "unit-demand"):
        vals = [_number(x, f"{path}.values[{i}]") for i, x in enumerate(_field(raw, "values", path))]
        maker = Valuation.additive if kind == "additive" else Valuation.unit_demand
        return _wrap(path, maker, vals, caps)
    if kind == "general":
        if "units" in raw:
            units = [_number(x, f"{path}.units[{i}]") for i, x in enumerate(raw["units"])]
            return _wrap(path, Valuation.from_units, units)
        if caps is None:
            raise DomainError(f"{path}: general valuations need caps")
        return _wrap(path, Valuation.general, _table(_field(raw, "table", path), f"{path}.table"), caps)
    raise DomainError(f"{path}.kind: unknown valuation kind {kind!r}")


def valuation_to_json(v: Valuation) -> dict:
    if v.kind == "general":
        return {"kind": "general", "table": _table_out(v.caps, v.table)}
    return {"kind": v.kind, "values": list(v.item_values)}


def profile_from_json(raw, path="profile", caps=None) -> ValuationProfile:
    caps = _field(raw, "caps", path, caps) if isinstance(raw, dict) else caps
    buyers = _field(raw, "buyers", path)
    if not isinstance(buyers, list) or not buyers:
        raise DomainError(f"{path}.buyers: expected a non-empty list")
    prof = _wrap(path, ValuationProfile,
                 tuple(valuation_from_json(b, caps, f"{path}.buyers[{j}]") for j, b in enumerate(buyers)))
    for key, actual in (("n", prof.n), ("m", prof.m)):
        if key in raw and int(raw[key]) != actual:
            raise DomainError(f"{path}.{key}: declared {raw[key]} but buyers give {actual}")
    return prof


def profile_to_json(p: ValuationProfile) -> dict:
    out = {"n": p.n, "m": p.m, "buyers": [valuation_to_json(b) for b in p.buyers]}
    caps = p.buyers[0].caps
    if caps is not None:
        out["caps"] = list(caps)
    return out


def distribution_from_json(raw, path="distribution") -> DistributionSpec:
    if "marginals" in raw and "atoms" not in raw:
        margs = []
        for i, mg in enumerate(raw["marginals"]):
            margs.append([([_number(x, f"{path}.marginals[{i}][{k}].values") for x in _field(a, "values", f"{path}.marginals[{i}][{k}]")],
                           _number(_field(a, "prob", f"{path}.marginals[{i}][{k}]"), f"{path}.marginals[{i}][{k}].prob"))
                          for k, a in enumerate(mg)])
        return _wrap(f"{path}.marginals", DistributionSpec.product, margs)
    caps = raw.get("caps")
    atoms = _field(raw, "atoms", path)
    if not isinstance(atoms, list) or not atoms:
        raise DomainError(f"{path}.atoms: distribution has empty support")
    parsed = []
    for k, a in enumerate(atoms):
        apath = f"{path}.atoms[{k}]"
        prob = _number(_field(a, "prob", apath), f"{apath}.prob")
        if prob < 0:
            raise DomainError(f"{apath}.prob: probability {prob} is negative")
        prof_raw = a.get("profile", a)
        parsed.append((profile_from_json(prof_raw, f"{apath}.profile", caps), prob))
    total = sum(p for _, p in parsed)
    if abs(total - 1.0) > 1e-12:
        raise DomainError(f"{path}.atoms: probabilities sum to {total!r}, not 1")
    return _wrap(path, DistributionSpec, tuple(parsed))


def distribution_to_json(d: DistributionSpec) -> dict:
    if d.item_independent:
        return {"marginals": [[{"values": list(v), "prob": repr(p)} for v, p in mg] for mg in d.marginals]}
    return {"atoms": [{"profile": profile_to_json(p), "prob": repr(w)} for p, w in d.atoms]}


def cost_from_json(raw, m, path="cost") -> CostFunction:
    if raw is None:
        return CostFunction.zero(m)
    kind = _field(raw, "kind", path)
    if kind == "zero":
        return CostFunction.zero(m)
    if kind == "additive":
        vals = [_number(x, f"{path}.item_costs[{i}]") for i, x in enumerate(_field(raw, "item_costs", path))]
        if len(vals) != m:
            raise DomainError(f"{path}.item_costs: expected {m} costs, got {len(vals)}")
        return _wrap(path, CostFunction.additive, vals)
    if kind == "general":
        caps = _field(raw, "caps", path)
        return _wrap(path, CostFunction.general, _table(_field(raw, "table", path), f"{path}.table"), caps)
    raise DomainError(f"{path}.kind: unknown cost kind {kind!r}")


def cost_to_json(c: CostFunction) -> dict:
    if c.kind == "zero":
        return {"kind": "zero"}
    if c.kind == "additive":
        return {"kind": "additive", "item_costs": list(c.item_costs)}
    return {"kind": "general", "caps": list(c.caps), "table": _table_out(c.caps, c.table)}


def mechanism_from_json(raw, path="mechanism"):
    """Returns ``(MechanismClass, params or None)``."""
    kind = _field(raw, "kind", path)
    st = raw.get("structure", {})
    m = int(st.get("m", 1))
    mc = _wrap(path, MechanismClass,
               kind,
               int(st.get("n", 1)),
               m,
               raw.get("anonymity", "anonymous"),
               st.get("groups"),
               int(st.get("ell", 1)),
               st.get("caps"),
               st.get("order"),
               tuple(tuple(q) for q in st.get("boosted", ())),
               cost_from_json(st.get("cost"), m, f"{path}.structure.cost"),
               int(st.get("enum_limit", 4096)))
    params = raw.get("params")
    if params is not None:
        params = [_number(x, f"{path}.params[{i}]") for i, x in enumerate(params)]
        _wrap(f"{path}.params", mc.with_params, params)
    return mc, params


def mechanism_to_json(mc: MechanismClass, params=None) -> dict:
    st = {"n": mc.n, "m": mc.m, "ell": mc.ell, "cost": cost_to_json(mc.cost), "enum_limit": mc.enum_limit}
    if mc.caps is not None:
        st["caps"] = list(mc.caps)
    if mc.order is not None:
        st["order"] = list(mc.order)
    if mc.groups is not None:
        st["groups"] = list(mc.groups)
    if mc.boosted:
        st["boosted"] = [list(q) for q in mc.boosted]
    out = {"kind": mc.kind, "anonymity": mc.anonymity, "structure": st}
    if params is not None:
        out["params"] = [float(x) for x in params]
    return out


def samples_from_json(raw, path="samples") -> list[ValuationProfile]:
    caps = raw.get("caps") if isinstance(raw, dict) else None
    items = _field(raw, "profiles", path) if isinstance(raw, dict) else raw
    return [profile_from_json(p, f"{path}.profiles[{k}]", caps) for k, p in enumerate(items)]


def samples_to_json(profiles, seed=None) -> dict:
    out = {"profiles": [profile_to_json(p) for p in profiles]}
    if seed is not None:
        out["seed"] = seed
    return out


def load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise DomainError(f"{path}: file not found")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DomainError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None


def hierarchy_from_json(raw, path="hierarchy", weights=None):
    """``{"kind": "group_pricing" | "menu_length" | "q_boosted", ...}``; ``weights`` overrides the file."""
    from .spm import Hierarchy

    kind = _field(raw, "kind", path)
    weights = weights if weights is not None else raw.get("weights", "geometric")
    m = int(raw.get("m", 1))
    cost = cost_from_json(raw.get("cost"), m, f"{path}.cost")
    if kind == "group_pricing":
        return _wrap(path, Hierarchy.group_pricing, _field(raw, "partitions", path), m, cost,
                     raw.get("order"), weights)
    if kind == "menu_length":
        return _wrap(path, Hierarchy.menu_length, int(_field(raw, "L", path)), int(_field(raw, "kappa", path)),
                     int(raw.get("n", 1)), cost, weights)
    if kind == "q_boosted":
        chain = [[tuple(q) for q in level] for level in _field(raw, "chain", path)]
        return _wrap(path, Hierarchy.q_boosted, chain, int(_field(raw, "n", path)), m, cost, weights)
    raise DomainError(f"{path}.kind: unknown hierarchy kind {kind!r}")
