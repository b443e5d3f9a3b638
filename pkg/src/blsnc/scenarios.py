"""Parameter sweeps over a network: one row per grid point and reported class."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import units
from .awc import AwcConfig, awc_max
from .config import _get, check_version, network_with, parse_network, resolve_network
from .errors import BlsncError, ConfigError
from .mux import partition

CSV_COLUMNS = ("scenario_param", "value", "class", "nc_delay_s", "awc_delay_s", "gap_pct", "schedulable")
PARAMS = ("utilization", "count", "bw", "l_m", "l_r", "l_r_frac")


@dataclass
class ScenarioSpec:
    """A base network, one swept parameter and what to report.

    ``node`` names the port whose single-hop class delay is reported; without it the
    row holds the largest end-to-end bound over the class's flows. ``awc_links`` is
    ``"per_flow"`` (one input link per flow) or a link count, and enables the
    achievable worst-case columns.
    """

    name: str
    network: dict
    param: str
    target: str
    grid: list
    classes: list
    node: str | None = None
    awc_links: object = None

    def __post_init__(self):
        if self.param not in PARAMS:
            raise ConfigError(f"sweep.param: expected one of {PARAMS}, got {self.param!r}")
        if not self.grid:
            raise ConfigError("sweep.grid: empty grid")
        diffs = [b - a for a, b in zip(self.grid, self.grid[1:])]
        if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ConfigError("sweep.grid: values must be strictly monotone")


@dataclass
class Row:
    scenario_param: str
    value: float
    cls: str
    nc_delay_s: float | None
    awc_delay_s: float | None
    gap_pct: float | None
    schedulable: bool
    branch: str | None = None
    error: str | None = None

    def csv_fields(self):
        def num(x):
            return "" if x is None else repr(float(x))

        return [self.scenario_param, repr(float(self.value)), self.cls, num(self.nc_delay_s),
                num(self.awc_delay_s), num(self.gap_pct), str(self.schedulable).lower()]

    def to_dict(self):
        d = asdict(self)
        d["class"] = d.pop("cls")
        return d


def parse_scenario(data, base_dir="."):
    check_version(data, "scenario")
    sweep = _get(data, "sweep", "scenario")
    grid = units.expand_range(_get(sweep, "grid", "scenario.sweep"), "scenario.sweep.grid")
    awc = _get(data, "awc", "scenario", None)
    return ScenarioSpec(
        name=str(_get(data, "name", "scenario", "scenario")),
        network=resolve_network(_get(data, "network", "scenario"), base_dir),
        param=str(_get(sweep, "param", "scenario.sweep")),
        target=str(_get(sweep, "target", "scenario.sweep")),
        grid=grid,
        classes=list(_get(data, "report", "scenario", {}).get("classes", [])),
        node=_get(data, "report", "scenario", {}).get("node"),
        awc_links=None if awc is None else _get(awc, "links", "scenario.awc", "per_flow"),
    )


def awc_config(model, node_id, links="per_flow"):
    """Achievable worst-case inputs for a three-class port with one shaper.

    Classes must be homogeneous (one frame size and period each).
    """
    table = model.class_table(node_id)
    shaped = [c for c in table if c.shaped]
    if len(shaped) != 1:
        raise ConfigError(f"awc: port {node_id} needs exactly one shaped class, found {len(shaped)}")
    k = shaped[0]
    part = partition(table, k.name)
    if len(part.mc) != 1 or part.hc:
        raise ConfigError(f"awc: port {node_id} must have one medium class and no higher class around {k.name}")
    (mc,) = part.mc
    here = [f for f in model.flows if node_id in model.hops(f)]

    def homogeneous(name):
        fs = [f for f in here if f.cls == name]
        if not fs:
            return 0, 1.0, 1.0
        sizes, bags = {f.mfs for f in fs}, {f.bag for f in fs}
        if len(sizes) > 1 or len(bags) > 1:
            raise ConfigError(f"awc: class {name} at {node_id} is not homogeneous")
        return sum(f.count for f in fs), sizes.pop(), bags.pop()

    n_k, mfs_k, bag_k = homogeneous(k.name)
    n_mc, mfs_mc, bag_mc = homogeneous(mc)
    lc = [f.mfs for f in here if f.cls not in (k.name, mc)]

    def n_links(n):
        return max(n, 1) if links == "per_flow" else int(links)

    return AwcConfig(
        link_rate=model.nodes[node_id].link_rate,
        bls=k.bls,
        mfs_shaped=mfs_k,
        mfs_mc=mfs_mc,
        mfs_lc=max(lc, default=0.0),
        n_shaped=n_k,
        n_mc=n_mc,
        bag_shaped=bag_k,
        bag_mc=bag_mc,
        links_shaped=n_links(n_k),
        links_mc=n_links(n_mc),
    ), k.name, mc


def _point(spec, value):
    from .netanalysis import analyze

    rows = []
    try:
        data = network_with(spec.network, spec.param, spec.target, value)
        model, options = parse_network(data)
        report = analyze(model, **options)
    except BlsncError as exc:
        err = f"{type(exc).__name__}: {exc}"
        return [Row(spec.param, value, c, None, None, None, False, error=err) for c in spec.classes]

    awc = {}
    if spec.awc_links is not None and spec.node is not None:
        try:
            cfg, shaped, mc = awc_config(model, spec.node, spec.awc_links)
            awc = {shaped: ("shaped", cfg), mc: ("unshaped", cfg)}
        except BlsncError as exc:
            awc = {"__error__": f"{type(exc).__name__}: {exc}"}

    for cls in spec.classes:
        flows = [f for f in report.flows.values() if f.cls == cls]
        errors = [f.error for f in flows if f.error]
        if errors:
            rows.append(Row(spec.param, value, cls, None, None, None, False, error=errors[0]))
            continue
        if spec.node is not None:
            key = (spec.node, cls)
            nc = report.class_delays.get(key) if options.get("within_class") == "fifo" else max(
                (f.hop(spec.node).delay for f in flows if f.hop(spec.node)), default=None)
            branch = report.ruling.get(key)
        else:
            nc = max((f.e2e for f in flows), default=None)
            branch = None
        awc_d = gap = None
        err = awc.get("__error__")
        if cls in awc:
            side, cfg = awc[cls]
            try:
                awc_d = awc_max(cfg, side)
                gap = (nc - awc_d) / awc_d * 100 if nc is not None and awc_d > 0 else None
            except BlsncError as exc:
                err = f"{type(exc).__name__}: {exc}"
        ok = bool(flows) and all(f.schedulable for f in flows)
        rows.append(Row(spec.param, value, cls, nc, awc_d, gap, ok, branch, err))
    return rows


def run_scenario(spec, workers=1):
    """Rows in grid order; a failing grid point yields rows carrying the error."""
    if workers > 1 and len(spec.grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_point, [spec] * len(spec.grid), spec.grid))
    else:
        chunks = [_point(spec, v) for v in spec.grid]
    return [row for chunk in chunks for row in chunk]


def load_scenario(path):
    from .config import load_json

    path = Path(path)
    return parse_scenario(load_json(path), path.parent)
