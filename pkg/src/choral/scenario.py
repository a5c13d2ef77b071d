"""Scenario files and the map/solution formats they reference.

A scenario is one JSON document holding everything an experiment needs: a map
reference (ASCII art with a legend sidecar, or a voxel stack), semantic class
declarations, clustering and solver settings, robot profiles, and depots.
Loading validates every invariant up front and reports failures with the file
and field that caused them; a loaded scenario dumps back to an identical
document.

ASCII maps use '#' for obstacles and '.' for free space; uppercase letters
mark task classes and lowercase letters environment classes, with the legend
JSON binding letters to class names and traversability flags. The first line
of the file is the row at y = 0. Voxel maps are a JSON header plus dense
row-major occupancy/vector payloads, collapsed to 2D on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .costmodel import RobotProfile
from .errors import ConfigurationError, OutOfBoundsError, ScenarioError
from .gridmap import (
    FREE_CODE,
    OBSTACLE_CODE,
    OBSTACLE_NAME,
    ClassConfig,
    EnvironmentClass,
    SemanticGrid,
    VoxelStack,
    collapse_voxels,
)
from .taskextract import ClusterParams

Point = tuple[float, float]

SCHEMA_VERSION = 1


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}: missing required field {key!r}")
    return doc[key]


def _check_version(doc: dict, where: str) -> None:
    v = _require(doc, "schema_version", where)
    if v != SCHEMA_VERSION:
        raise ScenarioError(f"{where}: schema_version {v!r} not supported (expected {SCHEMA_VERSION})")


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ScenarioError(f"{where}: unknown field(s) {', '.join(map(repr, extra))}")


def _read_json(path: Path, what: str) -> dict:
    if not path.exists():
        raise ScenarioError(f"{what} not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: expected a JSON object at top level")
    return doc


# ---------------------------------------------------------------- ASCII maps

def load_ascii_map(
    map_path: str | Path, legend_path: str | Path, config: ClassConfig | None = None
) -> tuple[SemanticGrid, ClassConfig]:
    """Grid plus its class configuration from character art and a legend.

    Without an explicit ``config`` the classes are derived from the legend:
    uppercase letters become task classes and lowercase letters environment
    classes, each group ordered by letter. With one, the legend must agree
    with it (names, kinds, traversability flags)."""
    map_path = Path(map_path)
    legend_path = Path(legend_path)
    legend_doc = _read_json(legend_path, "map legend")
    where = str(legend_path)
    _check_version(legend_doc, where)
    _reject_unknown(legend_doc, {"schema_version", "resolution", "legend"}, where)
    resolution = _require(legend_doc, "resolution", where)
    if not isinstance(resolution, (int, float)) or resolution <= 0:
        raise ScenarioError(f"{where}: resolution must be a positive number")
    entries = _require(legend_doc, "legend", where)
    if not isinstance(entries, dict):
        raise ScenarioError(f"{where}: legend must map characters to class entries")

    by_char: dict[str, tuple[str, bool]] = {}
    for ch, entry in entries.items():
        if len(ch) != 1 or not ch.isalpha() or not ch.isascii():
            raise ScenarioError(f"{where}: legend key {ch!r} is not an ASCII letter")
        if not isinstance(entry, dict) or "class" not in entry:
            raise ScenarioError(f"{where}: legend[{ch!r}] needs a 'class' field")
        _reject_unknown(entry, {"class", "impedes_traversal"}, f"{where}: legend[{ch!r}]")
        name = entry["class"]
        impedes = bool(entry.get("impedes_traversal", False))
        if ch.isupper() and "impedes_traversal" in entry:
            raise ScenarioError(
                f"{where}: legend[{ch!r}]: task classes cannot impede traversal"
            )
        by_char[ch] = (name, impedes)

    names = [v[0] for v in by_char.values()]
    if len(set(names)) != len(names):
        raise ScenarioError(f"{where}: duplicate class names in legend")

    if config is None:
        tasks = tuple(by_char[c][0] for c in sorted(by_char) if c.isupper())
        envs = tuple(
            EnvironmentClass(by_char[c][0], impedes_traversal=by_char[c][1])
            for c in sorted(by_char)
            if c.islower()
        )
        try:
            config = ClassConfig(task_classes=tasks, environment_classes=envs)
        except ConfigurationError as e:
            raise ScenarioError(f"{where}: {e}") from None
    else:
        env_flags = {e.name: e.impedes_traversal for e in config.environment_classes}
        for ch, (name, impedes) in by_char.items():
            if ch.isupper():
                if name not in config.task_classes:
                    raise ScenarioError(
                        f"{where}: legend[{ch!r}] binds task class {name!r}, "
                        "which the scenario classes do not declare"
                    )
            else:
                if name not in env_flags:
                    raise ScenarioError(
                        f"{where}: legend[{ch!r}] binds environment class {name!r}, "
                        "which the scenario classes do not declare"
                    )
                if env_flags[name] != impedes:
                    raise ScenarioError(
                        f"{where}: legend[{ch!r}]: impedes_traversal disagrees "
                        f"with the scenario classes for {name!r}"
                    )

    if not map_path.exists():
        raise ScenarioError(f"map file not found: {map_path}")
    lines = map_path.read_text().splitlines()
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise ScenarioError(f"{map_path}: map body is empty")
    width = len(lines[0])
    label_names = config.label_names()
    code_of = {name: i for i, name in enumerate(label_names)}
    labels = np.zeros((len(lines), width), dtype=np.int16)
    for iy, line in enumerate(lines):
        if len(line) != width:
            raise ScenarioError(
                f"{map_path}:{iy + 1}: line is {len(line)} characters, expected {width}"
            )
        for ix, ch in enumerate(line):
            if ch == ".":
                labels[iy, ix] = FREE_CODE
            elif ch == "#":
                labels[iy, ix] = OBSTACLE_CODE
            elif ch in by_char:
                labels[iy, ix] = code_of[by_char[ch][0]]
            else:
                raise ScenarioError(
                    f"{map_path}:{iy + 1}:{ix + 1}: character {ch!r} is not in the legend"
                )
    grid = SemanticGrid(resolution=float(resolution), labels=labels, config=config)
    return grid, config


def dump_ascii_map(grid: SemanticGrid, map_path: str | Path, legend_path: str | Path) -> None:
    """Write a grid as character art plus its legend sidecar.

    Task classes are lettered A.. and environment classes a.. in declaration
    order, so a dump/load cycle reproduces the grid exactly."""
    config = grid.config
    if len(config.task_classes) > 26 or len(config.environment_classes) > 26:
        raise ScenarioError("ASCII maps support at most 26 classes per kind")
    chars: dict[int, str] = {FREE_CODE: ".", OBSTACLE_CODE: "#"}
    legend: dict[str, dict] = {}
    for i, name in enumerate(config.task_classes):
        ch = chr(ord("A") + i)
        chars[grid.code_of(name)] = ch
        legend[ch] = {"class": name}
    for i, env in enumerate(config.environment_classes):
        ch = chr(ord("a") + i)
        chars[grid.code_of(env.name)] = ch
        legend[ch] = {"class": env.name, "impedes_traversal": env.impedes_traversal}
    body = "\n".join(
        "".join(chars[int(code)] for code in row) for row in grid.labels
    )
    Path(map_path).write_text(body + "\n")
    Path(legend_path).write_text(
        json.dumps(
            {"schema_version": SCHEMA_VERSION, "resolution": grid.resolution, "legend": legend},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )


# ---------------------------------------------------------------- voxel maps

def load_voxel_stack(path: str | Path) -> tuple[VoxelStack, list[str], list | None]:
    """Voxel payload from disk: (stack, class name list, class embeddings)."""
    path = Path(path)
    doc = _read_json(path, "voxel map")
    where = str(path)
    _check_version(doc, where)
    _reject_unknown(
        doc,
        {"schema_version", "dimensions", "resolution", "classes", "mode",
         "occupancy", "vectors", "class_embeddings"},
        where,
    )
    dims = _require(doc, "dimensions", where)
    if (not isinstance(dims, list) or len(dims) != 3
            or any(not isinstance(v, int) or v < 1 for v in dims)):
        raise ScenarioError(f"{where}: dimensions must be three positive integers [nx, ny, nz]")
    nx, ny, nz = dims
    resolution = _require(doc, "resolution", where)
    classes = _require(doc, "classes", where)
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise ScenarioError(f"{where}: classes must be a list of names")
    mode = doc.get("mode", "categorical")
    occupancy = np.asarray(_require(doc, "occupancy", where))
    vectors = np.asarray(_require(doc, "vectors", where), dtype=float)
    if occupancy.size != nx * ny * nz:
        raise ScenarioError(
            f"{where}: occupancy holds {occupancy.size} values, expected {nx * ny * nz}"
        )
    width = len(classes) if mode == "categorical" else vectors.size // (nx * ny * nz or 1)
    if width < 1 or vectors.size != nx * ny * nz * width:
        raise ScenarioError(
            f"{where}: vectors hold {vectors.size} values, "
            f"expected {nx * ny * nz} x {width}"
        )
    try:
        stack = VoxelStack(
            resolution=float(resolution),
            occupancy=occupancy.reshape(nz, ny, nx).astype(bool),
            vectors=vectors.reshape(nz, ny, nx, width),
            mode=mode,
        )
    except ConfigurationError as e:
        raise ScenarioError(f"{where}: {e}") from None
    embeddings = doc.get("class_embeddings")
    if mode == "embedding" and embeddings is None:
        raise ScenarioError(f"{where}: embedding-mode voxels need class_embeddings")
    return stack, classes, embeddings


def load_voxel_map(path: str | Path, config: ClassConfig) -> SemanticGrid:
    """Collapse a voxel file onto a 2D grid under the given classes."""
    stack, classes, embeddings = load_voxel_stack(path)
    if tuple(classes) != config.semantic_classes:
        raise ScenarioError(
            f"{path}: voxel classes {classes} do not match the scenario classes "
            f"{list(config.semantic_classes)}"
        )
    try:
        return collapse_voxels(stack, config, class_embeddings=embeddings)
    except ConfigurationError as e:
        raise ScenarioError(f"{path}: {e}") from None


# ----------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class SolverSettings:
    """Experiment-level solver knobs; None leaves a profile's own value."""

    budget_s: float | None = None
    budget_iters: int | None = None
    seed: int = 0
    alpha: float | None = None
    weight_trav: float | None = None
    weight_coll: float | None = None
    allow_empty_routes: bool = True

    def __post_init__(self):
        if self.budget_s is not None and self.budget_s <= 0:
            raise ScenarioError("solver.budget_s must be > 0")
        if self.budget_iters is not None and self.budget_iters < 1:
            raise ScenarioError("solver.budget_iters must be >= 1")
        if self.alpha is not None and self.alpha < 0:
            raise ScenarioError("solver.alpha must be >= 0")
        for name in ("weight_trav", "weight_coll"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ScenarioError(f"solver.{name} must be >= 0")

    def to_dict(self) -> dict:
        return {
            "budget_s": self.budget_s,
            "budget_iters": self.budget_iters,
            "seed": self.seed,
            "alpha": self.alpha,
            "weight_trav": self.weight_trav,
            "weight_coll": self.weight_coll,
            "allow_empty_routes": self.allow_empty_routes,
        }


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fully loaded experiment description.

    ``grid`` holds labels only; clearance comes later in the pipeline.
    ``map_path``/``legend_path`` keep the references as written so the
    scenario can be dumped back unchanged."""

    name: str
    map_format: str
    map_path: str
    legend_path: str | None
    grid: SemanticGrid
    config: ClassConfig
    cluster_params: ClusterParams
    robots: tuple[RobotProfile, ...]
    depots: tuple[Point, ...]
    depot_of_robot: tuple[int, ...]
    solver: SolverSettings
    baseline: bool

    def effective_robots(self) -> tuple[RobotProfile, ...]:
        """Profiles with the solver-level overrides applied."""
        out = []
        for r in self.robots:
            kw = {}
            if self.solver.alpha is not None:
                kw["alpha"] = self.solver.alpha
            if self.solver.weight_trav is not None:
                kw["weight_trav"] = self.solver.weight_trav
            if self.solver.weight_coll is not None:
                kw["weight_coll"] = self.solver.weight_coll
            out.append(replace(r, **kw) if kw else r)
        return tuple(out)

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "map": {"format": self.map_format, "path": self.map_path},
            "classes": {
                "task_classes": list(self.config.task_classes),
                "environment_classes": [
                    {"name": e.name, "impedes_traversal": e.impedes_traversal}
                    for e in self.config.environment_classes
                ],
                "free_class": self.config.free_class,
                "obstacle_height_threshold": self.config.obstacle_height_threshold,
            },
            "clustering": {
                "epsilon": self.cluster_params.epsilon,
                "min_points": self.cluster_params.min_points,
                "min_cluster_size": self.cluster_params.min_cluster_size,
                "separation": self.cluster_params.separation,
            },
            "robots": [
                {**r.to_dict(), "depot": d}
                for r, d in zip(self.robots, self.depot_of_robot)
            ],
            "depots": [[x, y] for x, y in self.depots],
            "solver": self.solver.to_dict(),
            "baseline": self.baseline,
        }
        if self.legend_path is not None:
            doc["map"]["legend"] = self.legend_path
        return doc


def dump_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def _parse_classes(sec: dict, where: str) -> ClassConfig:
    _reject_unknown(
        sec,
        {"task_classes", "environment_classes", "free_class", "obstacle_height_threshold"},
        where,
    )
    tasks = sec.get("task_classes", [])
    envs = sec.get("environment_classes", [])
    if not isinstance(tasks, list) or not all(isinstance(t, str) for t in tasks):
        raise ScenarioError(f"{where}.task_classes must be a list of names")
    env_objs = []
    for i, e in enumerate(envs):
        if not isinstance(e, dict) or "name" not in e:
            raise ScenarioError(f"{where}.environment_classes[{i}] needs a 'name'")
        _reject_unknown(e, {"name", "impedes_traversal"}, f"{where}.environment_classes[{i}]")
        env_objs.append(
            EnvironmentClass(e["name"], impedes_traversal=bool(e.get("impedes_traversal", False)))
        )
    kw = {}
    if "free_class" in sec:
        kw["free_class"] = sec["free_class"]
    if "obstacle_height_threshold" in sec:
        kw["obstacle_height_threshold"] = sec["obstacle_height_threshold"]
    try:
        return ClassConfig(task_classes=tuple(tasks), environment_classes=tuple(env_objs), **kw)
    except ConfigurationError as e:
        raise ScenarioError(f"{where}: {e}") from None


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file; every invariant is checked here.

    Map and legend paths resolve relative to the scenario file's directory.
    """
    path = Path(path)
    doc = _read_json(path, "scenario file")
    where = str(path)
    _check_version(doc, where)
    _reject_unknown(
        doc,
        {"schema_version", "name", "map", "classes", "clustering", "robots",
         "depots", "solver", "baseline"},
        where,
    )

    map_sec = _require(doc, "map", where)
    if not isinstance(map_sec, dict):
        raise ScenarioError(f"{where}: map must be an object")
    _reject_unknown(map_sec, {"format", "path", "legend"}, f"{where}: map")
    fmt = _require(map_sec, "format", f"{where}: map")
    map_ref = _require(map_sec, "path", f"{where}: map")
    base = path.parent

    config = None
    if "classes" in doc:
        config = _parse_classes(doc["classes"], f"{where}: classes")

    if fmt == "ascii":
        legend_ref = _require(map_sec, "legend", f"{where}: map")
        grid, config = load_ascii_map(base / map_ref, base / legend_ref, config)
    elif fmt == "voxel":
        if "legend" in map_sec:
            raise ScenarioError(f"{where}: map: voxel maps take no legend")
        if config is None:
            raise ScenarioError(
                f"{where}: voxel scenarios need an explicit classes section "
                "(the voxel header cannot say which classes are tasks)"
            )
        legend_ref = None
        grid = load_voxel_map(base / map_ref, config)
    else:
        raise ScenarioError(f"{where}: map.format must be 'ascii' or 'voxel', got {fmt!r}")

    if "clustering" in doc:
        sec = doc["clustering"]
        _reject_unknown(
            sec, {"epsilon", "min_points", "min_cluster_size", "separation"},
            f"{where}: clustering",
        )
        try:
            cluster = ClusterParams.defaults(grid.resolution, **sec)
        except (ConfigurationError, TypeError) as e:
            raise ScenarioError(f"{where}: clustering: {e}") from None
    else:
        cluster = ClusterParams.defaults(grid.resolution)

    robots_sec = _require(doc, "robots", where)
    if not isinstance(robots_sec, list) or not robots_sec:
        raise ScenarioError(f"{where}: robots must be a non-empty list")
    depots_sec = _require(doc, "depots", where)
    if not isinstance(depots_sec, list) or not depots_sec:
        raise ScenarioError(f"{where}: depots must be a non-empty list")
    depots: list[Point] = []
    for i, d in enumerate(depots_sec):
        if not isinstance(d, list) or len(d) != 2:
            raise ScenarioError(f"{where}: depots[{i}] must be [x, y]")
        depots.append((float(d[0]), float(d[1])))

    robots: list[RobotProfile] = []
    depot_of: list[int] = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(robots_sec):
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: robots[{i}] must be an object")
        entry = dict(entry)
        depot_idx = entry.pop("depot", 0)
        if not isinstance(depot_idx, int) or not 0 <= depot_idx < len(depots):
            raise ScenarioError(
                f"{where}: robots[{i}].depot {depot_idx!r} is not a valid depot index"
            )
        try:
            robot = RobotProfile.from_dict(entry)
        except (ConfigurationError, TypeError) as e:
            raise ScenarioError(f"{where}: robots[{i}]: {e}") from None
        if robot.id in seen_ids:
            raise ScenarioError(f"{where}: robots[{i}]: duplicate robot id {robot.id!r}")
        seen_ids.add(robot.id)
        robots.append(robot)
        depot_of.append(depot_idx)

    for i, pt in enumerate(depots):
        try:
            label = grid.label_at_point(pt)
        except OutOfBoundsError:
            raise ScenarioError(
                f"{where}: depots[{i}] at {pt} lies outside the map extent {grid.extent}"
            ) from None
        if label == OBSTACLE_NAME:
            raise ScenarioError(f"{where}: depots[{i}] at {pt} sits on an obstacle cell")

    solver_sec = doc.get("solver", {})
    if not isinstance(solver_sec, dict):
        raise ScenarioError(f"{where}: solver must be an object")
    _reject_unknown(
        solver_sec,
        {"budget_s", "budget_iters", "seed", "alpha", "weight_trav",
         "weight_coll", "allow_empty_routes"},
        f"{where}: solver",
    )
    try:
        solver = SolverSettings(**solver_sec)
    except TypeError as e:
        raise ScenarioError(f"{where}: solver: {e}") from None

    baseline = doc.get("baseline", False)
    if not isinstance(baseline, bool):
        raise ScenarioError(f"{where}: baseline must be true or false")

    return Scenario(
        name=doc.get("name", path.stem),
        map_format=fmt,
        map_path=map_ref,
        legend_path=legend_ref,
        grid=grid,
        config=config,
        cluster_params=cluster,
        robots=tuple(robots),
        depots=tuple(depots),
        depot_of_robot=tuple(depot_of),
        solver=solver,
        baseline=baseline,
    )


# ------------------------------------------------------------ solution files

@dataclass(frozen=True)
class RoutePlan:
    """One robot's share of a plan: task ids in visit order plus the stitched
    waypoint polyline (depot, tasks, depot) for an executor to follow."""

    robot_id: str
    tasks: tuple[int, ...]
    polyline: tuple[Point, ...]

    def to_dict(self) -> dict:
        return {
            "robot": self.robot_id,
            "tasks": list(self.tasks),
            "polyline": [[x, y] for x, y in self.polyline],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoutePlan":
        return cls(
            robot_id=d["robot"],
            tasks=tuple(int(t) for t in d["tasks"]),
            polyline=tuple((float(p[0]), float(p[1])) for p in d["polyline"]),
        )


@dataclass(frozen=True)
class SolutionDocument:
    """The on-disk plan: status plus one RoutePlan per robot when feasible."""

    status: str
    plans: tuple[RoutePlan, ...] = ()
    objective: float | None = None
    total_cost: float | None = None
    unplaceable: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "status": self.status,
            "objective": self.objective,
            "total_cost": self.total_cost,
            "unplaceable": list(self.unplaceable),
            "routes": [p.to_dict() for p in self.plans],
        }

    @classmethod
    def from_dict(cls, d: dict, where: str = "solution") -> "SolutionDocument":
        _check_version(d, where)
        status = _require(d, "status", where)
        if status not in ("feasible", "infeasible"):
            raise ScenarioError(f"{where}: unknown status {status!r}")
        return cls(
            status=status,
            plans=tuple(RoutePlan.from_dict(r) for r in d.get("routes", [])),
            objective=d.get("objective"),
            total_cost=d.get("total_cost"),
            unplaceable=tuple(int(t) for t in d.get("unplaceable", [])),
        )


def load_solution(path: str | Path) -> SolutionDocument:
    path = Path(path)
    doc = _read_json(path, "solution file")
    try:
        return SolutionDocument.from_dict(doc, where=str(path))
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"{path}: malformed solution document ({e})") from None


def dump_solution(sol: SolutionDocument, path: str | Path) -> None:
    Path(path).write_text(json.dumps(sol.to_dict(), indent=2) + "\n")
