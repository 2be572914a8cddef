"""End-to-end preparation plans: build, simulate and account for resources.

A plan is a list of branches followed by an optional entanglement swap.  Each
branch prepares one or more target modes entangled with an auxiliary qudit
(polarization for two-term targets, ``d`` spatial modes otherwise); the swap
projects all auxiliary qudits onto a GHZ state.  Analytic stage probabilities
come from the closed-form forward maps; :func:`simulate` runs the full circuits
and refuses to report if the two disagree.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import design
from .circuits import polarization_branch, spatial_branch
from .errors import CapError, PlanError, SpecError
from .fock import PRUNE_THRESHOLD, FockState, Mode, ModeRegistry, fidelity, make_state, tensor
from .optics import BeamSplitterParams
from .protocols import ghz_swap, scissors_resource

SCHEMES = (
    "product",
    "two_term_2mode",
    "two_term_Mmode",
    "d_term_2mode",
    "general",
    "schmidt_recursive",
)

GATES = ("source", "qnd", "qudit_qnd", "ghz")

_S = math.sqrt(0.5)


# ---------------------------------------------------------------- spec

@dataclass
class TargetSpec:
    """``sum_j coeff_j prod_k |f_jk>`` on ``M`` modes with at most ``N`` photons per mode."""

    M: int
    N: int
    terms: list  # (complex coeff, list of M amplitude vectors)

    def __post_init__(self):
        self.terms = [
            (complex(c), [np.asarray(v, dtype=complex).ravel() for v in vecs])
            for c, vecs in self.terms
        ]
        self.validate()

    def validate(self):
        if self.M < 1:
            raise SpecError("modes must be >= 1")
        if self.N < 0:
            raise SpecError("max_photons must be >= 0")
        bound = (self.N + 1) ** self.M
        if len(self.terms) > bound:
            raise SpecError(
                f"{len(self.terms)} terms exceed the bound (N+1)^M = {bound} "
                f"for M={self.M}, N={self.N}"
            )
        for j, (_, vecs) in enumerate(self.terms):
            if len(vecs) != self.M:
                raise SpecError(f"terms[{j}].factors has {len(vecs)} vectors, expected {self.M}")
            for k, v in enumerate(vecs):
                nz = np.flatnonzero(v)
                if len(nz) and nz[-1] > self.N:
                    raise SpecError(
                        f"terms[{j}].factors[{k}] populates {nz[-1]} photons, above max_photons={self.N}"
                    )
        if not any(c != 0 for c, _ in self.terms):
            raise SpecError("at least one coefficient must be nonzero")
        if not np.any(self.tensor()):
            raise SpecError("the target state is the zero vector")

    @property
    def d(self) -> int:
        return len(self.terms)

    def padded(self, v) -> np.ndarray:
        out = np.zeros(self.N + 1, dtype=complex)
        out[: len(v)] = v[: self.N + 1]
        return out

    def registry(self) -> ModeRegistry:
        return ModeRegistry(Mode(k) for k in range(self.M))

    def state(self) -> FockState:
        return make_state(self.registry(), self.terms, mode_cap=self.N)

    def tensor(self) -> np.ndarray:
        out = np.zeros((self.N + 1,) * self.M, dtype=complex)
        for c, vecs in self.terms:
            t = np.array(c)
            for v in vecs:
                t = np.multiply.outer(t, self.padded(v))
            out = out + t
        return out

    def total_photons(self) -> int:
        return self.state().max_photons()

    def nonzero_terms(self) -> list:
        return [
            (c, vecs) for c, vecs in self.terms
            if c != 0 and all(np.any(v) for v in vecs)
        ]

    @classmethod
    def from_tensor(cls, tensor, N: int | None = None, method: str = "basis") -> "TargetSpec":
        """Spec for a dense amplitude tensor.

        ``method="basis"`` emits one product term per nonzero amplitude;
        ``"schmidt"`` (two modes only) emits the Schmidt terms.
        """
        T = np.asarray(tensor, dtype=complex)
        N = max(T.shape) - 1 if N is None else N
        if method == "schmidt":
            if T.ndim != 2:
                raise SpecError("Schmidt terms need a two-mode tensor")
            left, right, s = design.schmidt_split(T, [0])
            terms = [(s[j], [left[j], right[j]]) for j in range(len(s))]
        elif method == "basis":
            terms = []
            for idx in zip(*np.nonzero(T)):
                vecs = []
                for ax, n in enumerate(idx):
                    v = np.zeros(T.shape[ax], dtype=complex)
                    v[n] = 1
                    vecs.append(v)
                terms.append((T[idx], vecs))
        else:
            raise ValueError(f"unknown method {method!r}")
        return cls(T.ndim, N, terms)


# ---------------------------------------------------------------- config / plan

@dataclass
class PlanConfig:
    t1: float = _S
    r1: float = _S
    t2: float = _S
    r2: float = _S
    seeds: Sequence | None = None
    gate_success: dict = field(default_factory=dict)
    max_total_photons: int | None = None
    tolerance: float = 1e-9
    bipartition: Sequence[int] | None = None
    prune: float = PRUNE_THRESHOLD
    consistency_rtol: float = 1e-9

    def __post_init__(self):
        BeamSplitterParams(self.t1, self.r1)
        BeamSplitterParams(self.t2, self.r2)
        for name, v in self.gate_success.items():
            if name not in GATES:
                raise ValueError(f"unknown gate {name!r}; expected one of {GATES}")
            if not 0 < v <= 1:
                raise ValueError(f"gate success for {name} must be in (0, 1], got {v}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    def success(self, gate: str) -> float:
        return float(self.gate_success.get(gate, 1.0))

    @property
    def bs1(self) -> BeamSplitterParams:
        return BeamSplitterParams(self.t1, self.r1)

    @property
    def pbs2(self) -> BeamSplitterParams:
        return BeamSplitterParams(self.t2, self.r2)

    def seed(self, i: int) -> complex:
        if not self.seeds:
            return 1.0
        return complex(self.seeds[i % len(self.seeds)])


@dataclass
class Stage:
    name: str
    protocol: str
    branch: str
    probability: float
    params: dict = field(default_factory=dict)


@dataclass
class Branch:
    label: str
    kind: str                      # product | polarization | spatial | subplan
    modes: list                    # target mode indices produced, in order
    inputs: list                   # designed input amplitude arrays
    targets: list                  # per-term target amplitude arrays for these modes
    stages: list
    children: list = field(default_factory=list)
    photons: int = 0


@dataclass
class PrepPlan:
    scheme: str
    spec: TargetSpec
    config: PlanConfig
    branches: list
    swap: Stage | None = None
    phases: list = field(default_factory=list)
    schmidt_ranks: list = field(default_factory=list)

    @property
    def stages(self) -> list:
        out = [s for b in self.branches for s in b.stages]
        if self.swap is not None:
            out.append(self.swap)
        return out

    @property
    def probability(self) -> float:
        return math.prod(s.probability for s in self.stages)

    def heralded_probabilities(self) -> list:
        """Probabilities of every heralded (``P < 1``) stage, children expanded."""
        out = []
        for b in self.branches:
            children = [c for c in b.children if c is not None]
            for s in b.stages:
                if s.protocol == "subplan" and children:
                    continue
                if s.probability < 1:
                    out.append(s.probability)
            for c in children:
                out.extend(c.heralded_probabilities())
        if self.swap is not None and self.swap.probability < 1:
            out.append(self.swap.probability)
        return out


@dataclass
class PrepReport:
    scheme: str
    fidelity: float
    total_probability: float
    analytic_probability: float
    stages: list
    checkpoints: list
    attempts_no_memory: float
    attempts_with_memory: float
    schmidt_ranks: list = field(default_factory=list)
    children: list = field(default_factory=list)
    state: FockState | None = None


def estimate_resources(stage_probabilities: Sequence[float], memory: bool) -> float:
    """Expected attempt count: ``prod 1/P_j`` without memory, ``sum 1/P_j`` with it."""
    probs = [float(p) for p in stage_probabilities]
    for p in probs:
        if not 0 < p <= 1:
            raise ValueError(f"stage probability {p} outside (0, 1]")
    if memory:
        return math.fsum(1 / p for p in probs)
    return math.prod(1 / p for p in probs)


# ---------------------------------------------------------------- analytic probabilities

def _norm2(x) -> float:
    return float(np.sum(np.abs(np.asarray(x)) ** 2))


def _normalized(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return x / math.sqrt(_norm2(x))


def _b_norms(src: np.ndarray, axis: int, t1: float, r1: float):
    """``||B0 src||^2`` and ``||B1 src||^2`` with the subtraction on ``axis``."""
    m = np.arange(src.shape[axis]).reshape([-1 if a == axis else 1 for a in range(src.ndim)])
    b0 = _norm2(src * t1**m)
    shifted = np.take(src, range(1, src.shape[axis]), axis=axis)
    m1 = np.arange(src.shape[axis] - 1).reshape([-1 if a == axis else 1 for a in range(src.ndim)])
    b1 = _norm2(shifted * np.sqrt(m1 + 1) * t1**m1 * r1)
    return b0, b1


def _truncate(x: np.ndarray, N: int) -> np.ndarray:
    return x[tuple(slice(0, N + 1) for _ in range(x.ndim))]


def _polarization_stages(label, f_in, g_in, N, cfg: PlanConfig):
    fn, gn = _normalized(f_in), _normalized(g_in)
    q = cfg.success("qnd")
    src = cfg.success("source")
    f0, f1 = _b_norms(fn, 0, cfg.t1, cfg.r1)
    g0, g1 = _b_norms(gn, 0, cfg.t1, cfg.r1)
    raw = f1 * g0 + f0 * g1
    f, g = design.forward_two_term(fn, gn, cfg.t1, cfg.r1, cfg.t2, cfg.r2)
    kept = _norm2(f) + _norm2(g)
    cut = _norm2(f[: N + 1]) + _norm2(g[: N + 1])
    stages = [
        Stage(f"{label}.source_f", "source", label, src, {"mode": "V"}),
        Stage(f"{label}.source_g", "source", label, src, {"mode": "H"}),
        Stage(f"{label}.subtraction", "subtraction", label, 1.0, {"t1": cfg.t1, "r1": cfg.r1}),
        Stage(f"{label}.qnd", "qnd", label, q * raw, {"backend": "ideal", "success": q}),
        Stage(f"{label}.erasure", "erasure", label, kept / raw, {"weights": [cfg.r2, cfg.t2]}),
        Stage(f"{label}.scissors", "scissors", label,
              scissors_resource(N).p_qs * cut / kept, {"N": N}),
    ]
    outputs = [_truncate(f, N), _truncate(g, N)]
    return stages, outputs


def _spatial_stages(label, sources, N, cfg: PlanConfig, source_probs):
    srcs = [_normalized(s) for s in sources]
    d = len(srcs)
    L = srcs[0].ndim
    q = cfg.success("qudit_qnd")
    norms = [_b_norms(s, L - 1, cfg.t1, cfg.r1) for s in srcs]
    raw = 0.0
    for j in range(d):
        raw += norms[j][1] * math.prod(norms[k][0] for k in range(d) if k != j)
    outs = design.forward_joint(srcs, cfg.t1, cfg.r1, axis=L - 1)
    kept = sum(_norm2(o) for o in outs)
    cut = sum(_norm2(_truncate(o, N)) for o in outs)
    stages = [
        Stage(f"{label}.source_{j}", "subplan" if source_probs[j][1] else "source", label,
              source_probs[j][0], {"index": j})
        for j in range(d)
    ]
    stages += [
        Stage(f"{label}.subtraction", "subtraction", label, 1.0, {"t1": cfg.t1, "r1": cfg.r1}),
        Stage(f"{label}.qnd", "qudit_qnd", label, q * raw, {"d": d, "success": q}),
        Stage(f"{label}.erasure", "erasure", label, kept / raw, {"d": d, "weights": "balanced"}),
        Stage(f"{label}.scissors", "scissors", label,
              scissors_resource(N).p_qs ** L * cut / kept, {"N": N, "modes": L}),
    ]
    return stages, [_truncate(o, N) for o in outs]


def _swap_probability(side_outputs: list, phases, gate: float) -> float:
    d = len(phases)
    total = None
    for j, th in enumerate(phases):
        t = np.array(cmath.exp(1j * th))
        for side in side_outputs:
            t = np.multiply.outer(t, side[j])
        total = t if total is None else total + t
    denom = math.prod(sum(_norm2(x) for x in side) for side in side_outputs)
    return gate * _norm2(total) / d / denom


def _source_photons(arr) -> int:
    arr = np.asarray(arr)
    idx = np.nonzero(arr)
    if not len(idx[0]):
        return 0
    return int(max(sum(i) for i in zip(*idx)))


# ---------------------------------------------------------------- planning

def choose_scheme(spec: TargetSpec) -> str:
    d = len(spec.nonzero_terms())
    if d <= 1:
        return "product"
    if d == 2:
        return "two_term_2mode" if spec.M == 2 else "two_term_Mmode"
    return "d_term_2mode" if spec.M == 2 else "general"


def plan(spec: TargetSpec, scheme: str = "auto", config: PlanConfig | None = None) -> PrepPlan:
    """Design the inputs and stage list for preparing ``spec`` with ``scheme``."""
    cfg = config or PlanConfig()
    if scheme == "auto":
        scheme = choose_scheme(spec)
    if scheme not in SCHEMES:
        raise PlanError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if cfg.max_total_photons is not None:
        n = spec.total_photons()
        if n > cfg.max_total_photons:
            raise CapError(
                f"target holds up to {n} photons, above max_total_photons={cfg.max_total_photons}", n
            )

    terms = spec.nonzero_terms()
    if scheme == "schmidt_recursive":
        p = _plan_schmidt(spec, cfg)
    elif len(terms) == 1 or scheme == "product":
        if len(terms) != 1:
            raise PlanError(f"scheme 'product' needs a single product term, got {len(terms)}")
        p = _plan_product(spec, terms[0], cfg)
    elif scheme in ("two_term_2mode", "two_term_Mmode"):
        if len(terms) != 2:
            raise PlanError(f"scheme {scheme!r} needs exactly 2 terms, got {len(terms)}")
        if scheme == "two_term_2mode" and spec.M != 2:
            raise PlanError(f"scheme 'two_term_2mode' needs M=2, got M={spec.M}")
        if spec.M < 2:
            raise PlanError("entangled schemes need at least 2 modes")
        p = _plan_two_term(spec, terms, scheme, cfg)
    else:
        if scheme == "d_term_2mode" and spec.M != 2:
            raise PlanError(f"scheme 'd_term_2mode' needs M=2, got M={spec.M}")
        if spec.M < 2:
            raise PlanError("entangled schemes need at least 2 modes")
        p = _plan_d_term(spec, terms, scheme, cfg)

    if cfg.max_total_photons is not None:
        for b in p.branches:
            if b.photons > cfg.max_total_photons:
                raise CapError(
                    f"branch {b.label} injects {b.photons} photons, above "
                    f"max_total_photons={cfg.max_total_photons}", b.photons
                )
    return p


def _split_coefficients(terms):
    """Magnitudes go into the first factor, phases into the swap projection."""
    mags = [abs(c) for c, _ in terms]
    phases = [cmath.phase(c) for c, _ in terms]
    return mags, phases


def _plan_product(spec, term, cfg):
    c, vecs = term
    branches = []
    for k, v in enumerate(vecs):
        v = spec.padded(v) * (c if k == 0 else 1)
        st = Stage(f"m{k}.source", "source", f"m{k}", cfg.success("source"), {})
        branches.append(Branch(f"m{k}", "product", [k], [v], [[v]], [st], photons=_source_photons(v)))
    return PrepPlan("product", spec, cfg, branches)


def _plan_two_term(spec, terms, scheme, cfg):
    mags, phases = _split_coefficients(terms)
    N = spec.N
    branches, outputs = [], []
    for k in range(spec.M):
        f = spec.padded(terms[0][1][k]) * (mags[0] if k == 0 else 1)
        g = spec.padded(terms[1][1][k]) * (mags[1] if k == 0 else 1)
        ft, gt = design.invert_two_term(
            f, g, cfg.t1, cfg.r1, cfg.t2, cfg.r2, seeds=(cfg.seed(2 * k), cfg.seed(2 * k + 1))
        )
        label = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"[k] if k < 26 else f"B{k}"
        stages, out = _polarization_stages(label, ft, gt, N, cfg)
        photons = _source_photons(ft) + _source_photons(gt) + N
        branches.append(Branch(label, "polarization", [k], [ft, gt], [f, g], stages, photons=photons))
        outputs.append(out)
    swap = Stage("swap", "bell" if spec.M == 2 else "ghz", "",
                 _swap_probability(outputs, phases, cfg.success("ghz")),
                 {"phases": phases, "d": 2, "M": spec.M})
    return PrepPlan(scheme, spec, cfg, branches, swap, phases)


def _plan_d_term(spec, terms, scheme, cfg):
    mags, phases = _split_coefficients(terms)
    N, d = spec.N, len(terms)
    branches, outputs = [], []
    for k in range(spec.M):
        targets = [spec.padded(vecs[k]) * (mags[j] if k == 0 else 1) for j, (_, vecs) in enumerate(terms)]
        seeds = [cfg.seed(k * d + j) for j in range(d)]
        sources = design.invert_multi(targets, cfg.t1, cfg.r1, seeds=seeds)
        label = f"S{k}"
        stages, out = _spatial_stages(label, sources, N, cfg, [(cfg.success("source"), False)] * d)
        photons = sum(_source_photons(s) for s in sources) + N
        branches.append(Branch(label, "spatial", [k], sources, targets, stages, photons=photons))
        outputs.append(out)
    swap = Stage("swap", "ghz", "", _swap_probability(outputs, phases, cfg.success("ghz")),
                 {"phases": phases, "d": d, "M": spec.M})
    return PrepPlan(scheme, spec, cfg, branches, swap, phases)


def _bipartition(spec, cfg):
    if cfg.bipartition is not None:
        left = sorted(int(a) for a in cfg.bipartition)
        if not left or len(left) >= spec.M or any(a < 0 or a >= spec.M for a in left):
            raise PlanError(f"invalid bipartition {left} for M={spec.M}")
        return left
    return list(range(spec.M // 2))


def _subspec_plan(tensor, cfg, N):
    """Child plan preparing a few-mode source state given as a dense tensor."""
    T = np.asarray(tensor, dtype=complex)
    if T.ndim == 2:
        sub = TargetSpec.from_tensor(T, N=N, method="schmidt")
        child = plan(sub, "auto", _child_config(cfg))
        child.schmidt_ranks = [sub.d]
        return child
    sub = TargetSpec.from_tensor(T, N=N, method="basis")
    return plan(sub, "schmidt_recursive", _child_config(cfg))


def _child_config(cfg):
    return PlanConfig(cfg.t1, cfg.r1, cfg.t2, cfg.r2, cfg.seeds, dict(cfg.gate_success),
                      None, cfg.tolerance, None, cfg.prune, cfg.consistency_rtol)


def _plan_schmidt(spec, cfg):
    if spec.M < 2:
        raise PlanError("schmidt_recursive needs at least 2 modes")
    N = spec.N
    T = spec.tensor()
    left_axes = _bipartition(spec, cfg)
    right_axes = [a for a in range(spec.M) if a not in left_axes]
    left, right, s = design.schmidt_split(T, left_axes)
    rank = len(s)
    halves = [(left_axes, [s[j] * left[j] for j in range(rank)]),
              (right_axes, [right[j] for j in range(rank)])]

    branches = []
    if rank == 1:
        for h, (axes, tens) in enumerate(halves):
            label = "LR"[h]
            child = _subspec_plan(tens[0], cfg, N) if len(axes) > 1 else None
            if child is None:
                st = Stage(f"{label}.source", "source", label, cfg.success("source"), {})
                branches.append(Branch(label, "product", axes, [tens[0]], [tens[0]], [st],
                                       photons=_source_photons(tens[0])))
            else:
                st = Stage(f"{label}.subplan", "subplan", label, child.probability, {"scheme": child.scheme})
                branches.append(Branch(label, "subplan", axes, [tens[0]], [tens[0]], [st], [child],
                                       photons=_source_photons(tens[0])))
        return PrepPlan("schmidt_recursive", spec, cfg, branches, None, [], [rank])

    outputs = []
    for h, (axes, targets) in enumerate(halves):
        label = "LR"[h]
        seeds = [cfg.seed(h * rank + j) for j in range(rank)]
        sources = design.invert_joint(targets, cfg.t1, cfg.r1, seeds=seeds, axis=-1)
        children = []
        probs = []
        for src in sources:
            if src.ndim == 1:
                children.append(None)
                probs.append((cfg.success("source"), False))
            else:
                child = _subspec_plan(src, cfg, N + 1)
                children.append(child)
                probs.append((child.probability, True))
        stages, out = _spatial_stages(label, sources, N, cfg, probs)
        photons = sum(_source_photons(x) for x in sources) + N * len(axes)
        branches.append(Branch(label, "spatial", axes, sources, targets, stages, children, photons))
        outputs.append(out)
    phases = [0.0] * rank
    swap = Stage("swap", "ghz", "", _swap_probability(outputs, phases, cfg.success("ghz")),
                 {"phases": phases, "d": rank, "M": 2})
    return PrepPlan("schmidt_recursive", spec, cfg, branches, swap, phases, [rank])


# ---------------------------------------------------------------- simulation

def _array_state(arr, modes, prune) -> FockState:
    arr = np.asarray(arr, dtype=complex)
    return FockState.from_dense([Mode(m) for m in modes], arr, prune)


def _child_output(child: PrepPlan, report: PrepReport, modes) -> FockState:
    st = report.state
    return st.relabel({Mode(k): Mode(m) for k, m in zip(range(child.spec.M), modes)})


def _run_branch(b: Branch, base: int, cfg: PlanConfig, N: int):
    """Simulate one branch.

    Returns ``(state, weight, data modes, qudit, checkpoints, child reports)``
    where ``state`` is normalised and ``weight`` is its heralding probability.
    Keeping the weight as a scalar stops nested plans, whose probabilities
    multiply, from pushing amplitudes under the pruning threshold.
    """
    prune = cfg.prune
    if b.kind == "product":
        st = _array_state(b.inputs[0], range(len(b.modes)), prune).normalized()
        modes = [Mode(base + i) for i in range(len(b.modes))]
        st = st.relabel(dict(zip(st.registry, modes)))
        w = cfg.success("source")
        return st, w, modes, [], [((b.stages[0].name,), w)], []
    if b.kind == "subplan":
        child = b.children[0]
        rep = simulate(child)
        modes = [Mode(base + i) for i in range(len(b.modes))]
        st = _child_output(child, rep, [m.spatial for m in modes])
        w = rep.total_probability
        return st, w, modes, [], [((b.stages[0].name,), w)], [rep]
    if b.kind == "polarization":
        ft, gt = (_normalized(x) for x in b.inputs)
        src = make_state([Mode(base, "V"), Mode(base, "H")], [(1.0, [ft, gt])], prune=prune)
        run = polarization_branch(None, None, cfg.bs1, cfg.pbs2, N, base=base,
                                  qnd_success=cfg.success("qnd"), source_state=src)
        w0 = cfg.success("source") ** 2
        cps = [((f"{b.label}.source_f", f"{b.label}.source_g"), w0)]
        cps += [(tuple(f"{b.label}.{n}" for n in names), p) for names, p in run.checkpoints]
        w = w0 * run.state.norm2()
        return run.state.normalized(), w, run.data_modes, run.qudit, cps, []
    if b.kind == "spatial":
        sources, cps, reps = [], [], []
        w = 1.0
        for j, arr in enumerate(b.inputs):
            child = b.children[j] if b.children else None
            target = _array_state(arr, range(np.ndim(arr)), prune)
            if child is None:
                st, wj = target.normalized(), cfg.success("source")
            else:
                rep = simulate(child)
                reps.append(rep)
                st, wj = _child_output(child, rep, range(child.spec.M)), rep.total_probability
                if fidelity(st, target) < 1 - cfg.tolerance:
                    raise PlanError(f"child plan for {b.label}.source_{j} did not reproduce its target")
            cps.append(((f"{b.label}.source_{j}",), wj))
            w *= wj
            sources.append(st)
        run = spatial_branch(sources, cfg.bs1, N, base=base, qnd_success=cfg.success("qudit_qnd"))
        cps += [(tuple(f"{b.label}.{n}" for n in names), p) for names, p in run.checkpoints]
        w *= run.state.norm2()
        return run.state.normalized(), w, run.data_modes, run.qudit, cps, reps
    raise PlanError(f"unknown branch kind {b.kind!r}")


def simulate(p: PrepPlan) -> PrepReport:
    """Run every circuit of the plan on the Fock-space simulator.

    The returned ``state`` is normalised; ``total_probability`` is the
    heralding probability of the whole run (squared norm of the surviving
    branch, gate-success factors included).

    Raises:
        PlanError: when a simulated stage probability departs from its analytic
            value by more than ``config.consistency_rtol`` or the plan heralds
            with probability zero.
    """
    cfg = p.config
    N = p.spec.N
    sides, qudits, data, checkpoints, child_reports = [], [], [], [], []
    weight = 1.0
    for i, b in enumerate(p.branches):
        base = 1000 * (i + 1)
        st, w, modes, qudit, cps, reps = _run_branch(b, base, cfg, N)
        sides.append(st)
        weight *= w
        qudits.append(qudit)
        data.extend(zip(modes, b.modes))
        checkpoints.extend(cps)
        child_reports.extend(reps)

    if p.swap is not None:
        final = ghz_swap(sides, qudits, p.phases, cfg.success("ghz")).state
        checkpoints.append(((p.swap.name,), final.norm2()))
    else:
        final = sides[0]
        for s in sides[1:]:
            final = tensor(final, s)

    final = final.relabel({m: Mode(k) for m, k in data}).reorder(p.spec.registry())
    total = weight * final.norm2()
    if total == 0 or final.is_zero():
        raise PlanError("the plan heralds with probability zero")

    by_name = {s.name: s for s in p.stages}
    rows = []
    for names, sim in checkpoints:
        analytic = math.prod(by_name[n].probability for n in names)
        ok = math.isclose(sim, analytic, rel_tol=cfg.consistency_rtol, abs_tol=1e-15)
        rows.append({"stages": list(names), "analytic": analytic, "simulated": sim, "ok": ok})
    analytic_total = p.probability
    bad = [r for r in rows if not r["ok"]]
    if bad or not math.isclose(total, analytic_total, rel_tol=cfg.consistency_rtol, abs_tol=1e-15):
        raise PlanError(
            f"stage probabilities inconsistent with the joint simulation: {bad or ''} "
            f"(simulated total {total!r}, analytic {analytic_total!r})"
        )

    fid = fidelity(final, p.spec.state())
    heralded = p.heralded_probabilities()
    return PrepReport(
        scheme=p.scheme,
        fidelity=fid,
        total_probability=total,
        analytic_probability=analytic_total,
        stages=[{"name": s.name, "protocol": s.protocol, "branch": s.branch,
                 "probability": s.probability} for s in p.stages],
        checkpoints=rows,
        attempts_no_memory=estimate_resources(heralded, memory=False),
        attempts_with_memory=estimate_resources(heralded, memory=True),
        schmidt_ranks=_all_ranks(p),
        children=child_reports,
        state=final.normalized(),
    )


def _all_ranks(p: PrepPlan) -> list:
    out = list(p.schmidt_ranks)
    for b in p.branches:
        for c in b.children:
            if c is not None:
                out.extend(_all_ranks(c))
    return out
