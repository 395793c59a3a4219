"""Six hand-crafted causal case studies with counterfactual and path twins.

Each instance stores the exogenous draws so every twin is an exact replay.
The protected attribute enters the structural equations as its group id
A in {0, 1}. Outcomes are ``Y = 1[sigmoid(score) > median]`` with the
median taken on the factual data and reused for every twin and for the
fair labels (same threshold mechanism, same individuals).

    biased     X = w*A^2 + e_X                 score = X + e_Y
    direct     X = e_X                         score = w*A + X + e_Y
    indirect   X1 = e_1, X2 = w*A + e_2        score = X1 + X2 + e_Y
    level1     X = w*A + e_X                   score = X + e_Y
    level2     X = w*A + U + e_X, U ~ N(0,1)   score = U + e_Y
    level3     X = w*A + e_X                   score = e_X + e_Y
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, read_dataset, read_matrix, write_dataset, write_matrix
from .rng import log_uniform, stream

CASES = ("biased", "direct", "indirect", "level1", "level2", "level3")
DISPLAY = {"biased": "Biased", "direct": "Direct", "indirect": "Indirect",
           "level1": "Level-One", "level2": "Level-Two", "level3": "Level-Three"}

# cases with an A -> Y edge / with features that descend from A
_DIRECT_EDGE = {"direct"}
_MEDIATED = {"biased", "indirect", "level1", "level2", "level3"}

# Level-k applicability; each level is cumulative over the previous one
APPLICABILITY = {
    "level1": frozenset({"direct", "indirect"}),
    "level2": frozenset({"direct", "indirect", "level2"}),
    "level3": frozenset({"direct", "indirect", "level2", "level3", "realworld"}),
}
LEVEL_PREFIXES = {"level1": ("nd_",), "level2": ("nd_", "u_"), "level3": ("nd_", "u_", "eps_")}

REALWORLD = ("law", "adult")

GROUP_PROB = 0.5


def applicable(level, case):
    return ("realworld" if case in REALWORLD else case) in APPLICABILITY[level]


@dataclass
class CaseStudyConfig:
    case: str
    w_A: float
    n: int
    sigma: float
    seed: int

    def validate(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; expected one of {CASES}")
        if not 100 <= self.n <= 1000:
            raise ValueError(f"n must lie in [100, 1000], got {self.n}")
        if not 0 < self.sigma <= 1:
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")
        return self


@dataclass
class FairInfo:
    columns: dict          # nd_* / u_* / eps_* -> (n,) arrays
    y_fair: np.ndarray | None     # absent for real-world data

    def level_columns(self, level):
        prefixes = LEVEL_PREFIXES[level]
        return [k for k in self.columns if k.startswith(prefixes)]

    def matrix(self, names):
        if names:
            return np.column_stack([self.columns[k] for k in names])
        n = len(self.y_fair) if self.y_fair is not None else len(next(iter(self.columns.values()), []))
        return np.empty((n, 0))


@dataclass
class PathTwin:
    dataset: Dataset
    present: bool


@dataclass
class CaseStudyInstance:
    config: CaseStudyConfig
    factual: Dataset
    counterfactual: Dataset
    direct_twin: PathTwin
    indirect_twin: PathTwin
    fair_info: FairInfo
    draws: dict = field(repr=False, default_factory=dict)

    @property
    def case(self):
        return self.config.case


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _structural(case, w, a_direct, a_med, d):
    """Features and outcome score; ``a_direct`` feeds A->Y, ``a_med`` feeds A->X."""
    if case == "biased":
        x = w * a_med ** 2 + d["e_x"]
        return x[:, None], x + d["e_y"]
    if case == "direct":
        x = d["e_x"]
        return x[:, None], w * a_direct + x + d["e_y"]
    if case == "indirect":
        x1, x2 = d["e_1"], w * a_med + d["e_2"]
        return np.column_stack([x1, x2]), x1 + x2 + d["e_y"]
    if case == "level1":
        x = w * a_med + d["e_x"]
        return x[:, None], x + d["e_y"]
    if case == "level2":
        x = w * a_med + d["u"] + d["e_x"]
        return x[:, None], d["u"] + d["e_y"]
    if case == "level3":
        x = w * a_med + d["e_x"]
        return x[:, None], d["e_x"] + d["e_y"]
    raise ValueError(case)


def _draws(case, n, sigma, rng):
    d = {"A": (rng.uniform(size=n) < GROUP_PROB).astype(np.int64)}
    names = {"indirect": ("e_1", "e_2")}.get(case, ("e_x",))
    for k in names:
        d[k] = rng.normal(0.0, sigma, n)
    if case == "level2":
        d["u"] = rng.normal(0.0, 1.0, n)
    d["e_y"] = rng.normal(0.0, sigma, n)
    return d


def _fair_columns(case, d, X):
    if case == "direct":
        return {"nd_x1": X[:, 0], "eps_x1": d["e_x"]}
    if case == "indirect":
        return {"nd_x1": X[:, 0], "eps_x1": d["e_1"], "eps_x2": d["e_2"]}
    if case == "level2":
        return {"u_u": d["u"], "eps_x1": d["e_x"]}
    if case == "level3":
        return {"eps_x1": d["e_x"]}
    return {}


def _dataset(case, w, column_A, a_direct, a_med, d, threshold, meta):
    X, score = _structural(case, w, a_direct, a_med, d)
    prob = _sigmoid(score)
    return Dataset(A=column_A, X=X, y=(prob > threshold).astype(np.int64), y_cont=prob, meta=meta)


def generate_case(config):
    """Factual data, counterfactual and path twins, and oracle columns."""
    cfg = config.validate()
    case, w = cfg.case, cfg.w_A
    rng = stream(cfg.seed, "case", case)
    d = _draws(case, cfg.n, cfg.sigma, rng)
    A = d["A"]
    flipped = 1 - A
    for attempt in range(2):
        X, score = _structural(case, w, A, A, d)
        threshold = float(np.median(_sigmoid(score)))
        rate = float(np.mean(_sigmoid(score) > threshold))
        if 0 < rate < 1:
            break
        if attempt == 0:
            d["e_y"] = stream(cfg.seed, "case", case, "reseed").normal(0.0, cfg.sigma, cfg.n)
    else:
        raise ValueError(f"degenerate labels for {cfg}")

    meta = {"seed": cfg.seed, "case": case, "w_A": w, "sigma": cfg.sigma,
            "threshold": threshold, "a0": 0.0, "a1": 1.0}
    factual = _dataset(case, w, A, A, A, d, threshold, {**meta, "role": "factual"})
    counter = _dataset(case, w, flipped, flipped, flipped, d, threshold,
                       {**meta, "role": "counterfactual"})
    if case in _DIRECT_EDGE:
        direct = PathTwin(_dataset(case, w, flipped, flipped, A, d, threshold,
                                   {**meta, "role": "direct_twin"}), True)
    else:
        direct = PathTwin(factual.subset(slice(None)), False)
    if case in _MEDIATED:
        indirect = PathTwin(_dataset(case, w, A, A, flipped, d, threshold,
                                     {**meta, "role": "indirect_twin"}), True)
    else:
        indirect = PathTwin(factual.subset(slice(None)), False)

    _, fair_score = _structural(case, 0.0, A, A, d)
    y_fair = (_sigmoid(fair_score) > threshold).astype(np.int64)
    info = FairInfo(columns=_fair_columns(case, d, factual.X), y_fair=y_fair)
    return CaseStudyInstance(cfg, factual, counter, direct, indirect, info, d)


def path_twins(instance):
    """(direct-path twin, indirect-path twin); absent paths carry ``present=False``."""
    return instance.direct_twin, instance.indirect_twin


def replay(instance, groups):
    """Re-run the instance's structural equations with ``groups`` as A, same draws."""
    cfg = instance.config
    A = np.asarray(groups, dtype=np.int64)
    thr = instance.factual.meta["threshold"]
    return _dataset(cfg.case, cfg.w_A, A, A, A, instance.draws, thr, dict(instance.factual.meta))


def sample_config(case, index, seed):
    rng = stream(seed, "suite", case, index)
    w = float(log_uniform(rng, 0.1, 10.0))
    n = int(np.clip(round(float(log_uniform(rng, 100, 1000))), 100, 1000))
    sigma = float(max(1e-3, log_uniform(rng, 1e-3, 1.0)))
    inst_seed = int(rng.integers(2**62))
    return CaseStudyConfig(case=case, w_A=w, n=n, sigma=sigma, seed=inst_seed)


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_instance(instance, out_dir, instance_id):
    out = Path(out_dir)
    files = {"factual": f"{instance_id}.csv", "counterfactual": f"{instance_id}.cf.csv",
             "oracle": f"{instance_id}.oracle.csv"}
    write_dataset(instance.factual, out / files["factual"], {"dataset_id": instance_id})
    write_dataset(instance.counterfactual, out / files["counterfactual"],
                  {"dataset_id": f"{instance_id}.cf", "twin_of": files["factual"]})
    for role, twin, suffix in (("direct_twin", instance.direct_twin, "de"),
                               ("indirect_twin", instance.indirect_twin, "ie")):
        if twin.present:
            files[role] = f"{instance_id}.{suffix}.csv"
            write_dataset(twin.dataset, out / files[role],
                          {"dataset_id": f"{instance_id}.{suffix}", "twin_of": files["factual"]})
    info = instance.fair_info
    names = list(info.columns) + ["y_fair"]
    write_matrix(out / files["oracle"], [info.columns[k] for k in info.columns] + [info.y_fair], names)
    return files


def generate_suite(out_dir, count_per_case=100, seed=0, cases=CASES, overwrite=False):
    """Write every instance plus ``manifest.json``; returns the manifest dict."""
    if count_per_case < 1:
        raise ValueError("count_per_case must be >= 1")
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not overwrite:
        raise FileExistsError(f"{out} already holds a benchmark; pass overwrite to replace it")
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for case in cases:
        for i in range(count_per_case):
            cfg = sample_config(case, i, seed)
            inst = generate_case(cfg)
            iid = f"{case}_{i:03d}"
            files = write_instance(inst, out, iid)
            entries.append({
                "id": iid, "case": case, "w_A": cfg.w_A, "n": cfg.n, "sigma": cfg.sigma,
                "seed": cfg.seed, "files": files,
                "sha256": {role: _sha(out / f) for role, f in files.items()},
            })
    body = {"schema_version": 1, "seed": seed, "count_per_case": count_per_case,
            "cases": list(cases), "instances": entries}
    body["manifest_hash"] = hashlib.sha256(json.dumps(entries, sort_keys=True).encode()).hexdigest()
    manifest_path.write_text(json.dumps(body, indent=1, sort_keys=True))
    return body


def load_manifest(bench_dir):
    return json.loads((Path(bench_dir) / "manifest.json").read_text())


@dataclass
class LoadedInstance:
    entry: dict
    factual: Dataset
    counterfactual: Dataset
    direct_twin: Dataset | None
    indirect_twin: Dataset | None
    fair_info: FairInfo

    @property
    def case(self):
        return self.entry["case"]


def load_instance(bench_dir, entry):
    """Read one manifest entry back; raises FileNotFoundError on missing files."""
    root = Path(bench_dir)
    files = entry["files"]
    oracle = read_matrix(root / files["oracle"])
    y_fair = oracle.pop("y_fair", None)
    if y_fair is not None:
        y_fair = y_fair.astype(np.int64)
    return LoadedInstance(
        entry=entry,
        factual=read_dataset(root / files["factual"]),
        counterfactual=read_dataset(root / files["counterfactual"]),
        direct_twin=read_dataset(root / files["direct_twin"]) if "direct_twin" in files else None,
        indirect_twin=read_dataset(root / files["indirect_twin"]) if "indirect_twin" in files else None,
        fair_info=FairInfo(columns=oracle, y_fair=y_fair),
    )
