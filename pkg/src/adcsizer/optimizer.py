"""Seeded ask/tell sequential model-based optimizer over box-bounded spaces.

The default sampler is a tree-structured Parzen estimator: observed trials
are split into a good and a bad group by loss, a Gaussian-kernel density is
fitted to each in the unit cube, and the next point maximizes the density
ratio among candidates drawn from the good density. The first ``n_startup``
suggestions come from a scrambled Halton sequence.

Losses are minimized. Each suggestion draws from a generator seeded with
``(seed, trial_id)``, so a suggestion depends only on the seed and the
observed history; this is what makes resuming from a log exact.
"""

from __future__ import annotations

import concurrent.futures as cf
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp, ndtr, ndtri
from scipy.stats import qmc

COMPLETE = "complete"
FAILED = "failed"


class UnknownTrial(KeyError):
    pass


class DuplicateObserve(ValueError):
    pass


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    scale: str = "linear"  # linear | log
    dtype: str = "continuous"  # continuous | integer

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower must be < upper")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: unknown scale {self.scale!r}")
        if self.dtype not in ("continuous", "integer"):
            raise ValueError(f"{self.name}: unknown dtype {self.dtype!r}")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError(f"{self.name}: log scale needs a positive lower bound")
        if self.dtype == "integer" and not (float(self.lower).is_integer() and float(self.upper).is_integer()):
            raise ValueError(f"{self.name}: integer dims need integral bounds")

    def _edges(self) -> tuple[float, float]:
        lo, hi = float(self.lower), float(self.upper)
        if self.dtype == "integer":
            lo, hi = lo - 0.5, hi + 0.5
            if self.scale == "log":
                lo = max(lo, self.lower * 0.5)
        if self.scale == "log":
            return math.log(lo), math.log(hi)
        return lo, hi

    def from_unit(self, u: float) -> float:
        lo, hi = self._edges()
        x = lo + min(max(u, 0.0), 1.0) * (hi - lo)
        if self.scale == "log":
            x = math.exp(x)
        if self.dtype == "integer":
            return float(min(max(round(x), self.lower), self.upper))
        return min(max(x, self.lower), self.upper)

    def to_unit(self, x: float) -> float:
        lo, hi = self._edges()
        v = math.log(x) if self.scale == "log" else float(x)
        return min(max((v - lo) / (hi - lo), 0.0), 1.0)

    def contains(self, x: float) -> bool:
        if self.dtype == "integer" and not float(x).is_integer():
            return False
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[Dim, ...]

    def __init__(self, dims: Iterable[Dim]):
        dims = tuple(dims)
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ValueError("duplicate dimension names")
        object.__setattr__(self, "dims", dims)
        blob = json.dumps([asdict(d) for d in dims], sort_keys=True)
        object.__setattr__(self, "_hash", hashlib.sha256(blob.encode()).hexdigest()[:16])

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def from_unit(self, u: Sequence[float]) -> dict[str, float]:
        return {d.name: d.from_unit(float(x)) for d, x in zip(self.dims, u)}

    def to_unit(self, params: Mapping[str, float]) -> np.ndarray:
        return np.array([d.to_unit(params[d.name]) for d in self.dims])

    def contains(self, params: Mapping[str, float]) -> bool:
        return all(d.contains(params[d.name]) for d in self.dims)

    def hash(self) -> str:
        return self._hash  # type: ignore[attr-defined]


@dataclass
class Trial:
    id: int
    params: dict[str, float]
    objective: float = math.nan
    status: str = ""
    wall_time: float = 0.0
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def done(self) -> bool:
        return self.status in (COMPLETE, FAILED)


def _truncnorm_logpdf(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    # all arrays broadcast; support is [0, 1]
    z = (x - mu) / sigma
    mass = ndtr((1.0 - mu) / sigma) - ndtr(-mu / sigma)
    return -0.5 * z * z - np.log(sigma) - 0.5 * math.log(2 * math.pi) - np.log(np.maximum(mass, 1e-300))


class _Parzen:
    """Product-Gaussian kernel mixture truncated to the unit cube, plus a broad prior kernel."""

    PRIOR_SIGMA = 1.0

    def __init__(self, points: np.ndarray, n_total: int):
        m, d = points.shape
        self.mu = np.vstack([points, np.full((1, d), 0.5)])
        floor = 1.0 / min(100, n_total + 1)
        if m > 1:
            # each kernel as wide as the gap to its nearest neighbour
            dist, _ = cKDTree(points).query(points, k=2)
            bw = dist[:, 1] / math.sqrt(d)
        else:
            bw = np.full(m, 0.5)
        bw = np.clip(bw, floor, 1.0)
        self.sigma = np.vstack([np.tile(bw[:, None], (1, d)), np.full((1, d), self.PRIOR_SIGMA)])
        self.logw = np.full(m + 1, -math.log(m + 1))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        k = rng.choice(len(self.logw), size=n, p=np.exp(self.logw))
        mu, sigma = self.mu[k], self.sigma[k]
        lo, hi = ndtr(-mu / sigma), ndtr((1.0 - mu) / sigma)
        u = lo + rng.random(mu.shape) * (hi - lo)
        x = mu + sigma * ndtri(np.clip(u, 1e-15, 1 - 1e-15))
        return np.clip(x, 0.0, 1.0)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        # x: (n, d) -> (n,)
        comp = _truncnorm_logpdf(x[:, None, :], self.mu[None], self.sigma[None]).sum(axis=2)
        return logsumexp(comp + self.logw[None], axis=1)


class Optimizer:
    """Ask/tell optimizer state: history, seed and search space."""

    def __init__(
        self,
        space: SearchSpace,
        seed: int = 0,
        sampler: str = "tpe",
        n_startup: int = 10,
        n_candidates: int = 24,
        gamma: float = 0.1,
    ):
        if sampler not in ("tpe", "random"):
            raise ValueError(f"unknown sampler {sampler!r}")
        self.space = space
        self.seed = int(seed)
        self.sampler = sampler
        self.n_startup = n_startup
        self.n_candidates = n_candidates
        self.gamma = gamma
        self.trials: list[Trial] = []
        self._queue: list[dict[str, float]] = []
        self._halton: np.ndarray | None = None
        self._unit: dict[int, np.ndarray] = {}

    # -- ask / tell -----------------------------------------------------

    def enqueue(self, params: Mapping[str, float]) -> None:
        """Evaluate ``params`` before anything the sampler would propose."""
        self._queue.append(dict(params))

    def suggest(self) -> tuple[int, dict[str, float]]:
        tid = len(self.trials)
        if self._queue:
            params = self._queue.pop(0)
            params = {d.name: d.from_unit(d.to_unit(params[d.name])) for d in self.space.dims}
        else:
            params = self.space.from_unit(self._propose(tid))
        self.trials.append(Trial(tid, params))
        return tid, dict(params)

    def observe(self, trial_id: int, objective: float, status: str = COMPLETE, wall_time: float = 0.0) -> Trial:
        if not 0 <= trial_id < len(self.trials):
            raise UnknownTrial(trial_id)
        trial = self.trials[trial_id]
        if trial.done:
            raise DuplicateObserve(f"trial {trial_id} already observed")
        objective = float(objective)
        if status == COMPLETE and not math.isfinite(objective):
            status = FAILED
        if status == FAILED:
            objective = self.penalty()
        elif status != COMPLETE:
            raise ValueError(f"unknown status {status!r}")
        trial.objective = objective
        trial.status = status
        trial.wall_time = float(wall_time)
        return trial

    def penalty(self) -> float:
        """Loss recorded for failed trials: ten times the worst finished loss."""
        worst = max((t.objective for t in self.trials if t.status == COMPLETE), default=0.0)
        return 10.0 * worst if worst > 0 else 1.0

    # -- queries --------------------------------------------------------

    @property
    def finished(self) -> list[Trial]:
        return [t for t in self.trials if t.done]

    @property
    def best(self) -> Trial | None:
        done = [t for t in self.trials if t.status == COMPLETE]
        if not done:
            done = self.finished
        return min(done, key=lambda t: (t.objective, t.id)) if done else None

    # -- sampling -------------------------------------------------------

    def _unit_of(self, trial: Trial) -> np.ndarray:
        u = self._unit.get(trial.id)
        if u is None:
            u = self._unit[trial.id] = self.space.to_unit(trial.params)
        return u

    def _startup_point(self, tid: int) -> np.ndarray:
        if self._halton is None:
            engine = qmc.Halton(d=len(self.space), scramble=True, seed=self.seed)
            self._halton = engine.random(self.n_startup)
        return self._halton[tid]

    def _propose(self, tid: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, tid])
        obs = self.finished
        if self.sampler == "random":
            return rng.random(len(self.space))
        if tid < self.n_startup and len(obs) < self.n_startup:
            return self._startup_point(tid)
        if len(obs) < 2:
            return rng.random(len(self.space))
        ranked = sorted(obs, key=lambda t: (t.objective, t.id))
        n_below = min(max(1, math.ceil(self.gamma * len(ranked))), 25)
        x = np.array([self._unit_of(t) for t in ranked])
        below = _Parzen(x[:n_below], len(ranked))
        above = _Parzen(x[n_below:], len(ranked))
        cand = below.sample(rng, self.n_candidates)
        score = below.logpdf(cand) - above.logpdf(cand)
        return cand[int(np.argmax(score))]

    # -- persistence ----------------------------------------------------

    def log_record(self, trial: Trial, record_time: bool = True) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "id": trial.id,
            "params": trial.params,
            "objective": trial.objective,
            "status": trial.status,
            "wall_time_s": trial.wall_time if record_time else 0.0,
            "seed": self.seed,
            "space_hash": self.space.hash(),
        }
        if trial.info:
            rec["info"] = trial.info
        return rec

    def to_jsonl(self, record_time: bool = True) -> str:
        return "".join(json.dumps(self.log_record(t, record_time)) + "\n" for t in self.finished)

    @classmethod
    def from_log(cls, lines: str | Path | Iterable[str], space: SearchSpace, **kwargs: Any) -> "Optimizer":
        """Rebuild an optimizer from a JSON-lines trial log (serial runs)."""
        if isinstance(lines, Path):
            lines = lines.read_text().splitlines()
        elif isinstance(lines, str):
            lines = lines.splitlines()
        records = [json.loads(line) for line in lines if line.strip()]
        seed = kwargs.pop("seed", records[0]["seed"] if records else 0)
        opt = cls(space, seed=seed, **kwargs)
        for rec in sorted(records, key=lambda r: r["id"]):
            if rec["space_hash"] != space.hash():
                raise ValueError("trial log was written for a different search space")
            if rec["id"] != len(opt.trials):
                raise ValueError(f"trial log is not dense at id {rec['id']}")
            opt.trials.append(
                Trial(rec["id"], dict(rec["params"]), float(rec["objective"]), rec["status"],
                      float(rec.get("wall_time_s", 0.0)), dict(rec.get("info", {})))
            )
        return opt


Objective = Callable[[dict[str, float]], float]


def _evaluate(objective: Objective, params: dict[str, float]) -> tuple[float, str, float]:
    t0 = time.perf_counter()
    try:
        value = float(objective(params))
        status = COMPLETE if math.isfinite(value) else FAILED
    except Exception:
        value, status = math.nan, FAILED
    return value, status, time.perf_counter() - t0


def run_trials(
    opt: Optimizer,
    objective: Objective,
    budget: int,
    parallelism: int = 1,
    target: float | None = None,
    on_trial: Callable[[Trial], None] | None = None,
) -> Optimizer:
    """Drive ``opt`` for up to ``budget`` evaluations.

    Evaluations run in up to ``parallelism`` worker threads; suggest and
    observe stay on the calling thread. With ``target`` set, no new trial is
    started once a completed trial reaches ``objective <= target``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def reached() -> bool:
        best = opt.best
        return target is not None and best is not None and best.status == COMPLETE and best.objective <= target

    if parallelism == 1:
        for _ in range(budget):
            tid, params = opt.suggest()
            value, status, dt = _evaluate(objective, params)
            trial = opt.observe(tid, value, status, dt)
            if on_trial:
                on_trial(trial)
            if reached():
                break
        return opt

    started = 0
    with cf.ThreadPoolExecutor(max_workers=parallelism) as pool:
        running: dict[cf.Future, int] = {}
        while True:
            while started < budget and len(running) < parallelism and not reached():
                tid, params = opt.suggest()
                running[pool.submit(_evaluate, objective, params)] = tid
                started += 1
            if not running:
                break
            done, _ = cf.wait(running, return_when=cf.FIRST_COMPLETED)
            for fut in sorted(done, key=lambda f: running[f]):
                tid = running.pop(fut)
                value, status, dt = fut.result()
                trial = opt.observe(tid, value, status, dt)
                if on_trial:
                    on_trial(trial)
    return opt


def minimize(
    objective: Objective,
    space: SearchSpace,
    budget: int,
    parallelism: int = 1,
    seed: int = 0,
    sampler: str = "tpe",
    log_path: str | Path | None = None,
    **kwargs: Any,
) -> Trial:
    """Minimize ``objective`` over ``space`` with exactly ``budget`` evaluations.

    Objective exceptions and non-finite values become failed trials. Returns
    the trial with the lowest loss.
    """
    opt = Optimizer(space, seed=seed, sampler=sampler, **kwargs)
    run_trials(opt, objective, budget, parallelism)
    if log_path is not None:
        Path(log_path).write_text(opt.to_jsonl())
    best = opt.best
    assert best is not None
    return best
