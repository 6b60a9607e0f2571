"""Distributed meta-algorithm: a centralized block driven by consensus trackers.

One round of the assembled algorithm is

    chi+ = chi + delta * (g(chi, proxies(chi, z)) - chi)
    z+   = h(chi, z)

where the trackers always estimate means. A block component that is a sum of
per-agent terms is bound to a tracker fed with ``N`` times those terms, so its
proxy estimates the sum directly.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .blocks import DIVERGENCE_NORM, _record, run_centralized
from .graph import metropolis_weights
from .trace import RunTrace
from .trackers import Cascade, ExactAverage, PerturbedConsensus, PIDac, RAdmmDac, Tracker, flatten_state
from .validation import check_int, check_interval


class SignatureError(ValueError):
    """Tracker binding does not match the block's aggregation signature."""


@dataclass(frozen=True)
class Binding:
    """A tracker bound to one aggregate component, with optional expectations to check."""

    tracker: object
    dim: int = None
    kind: str = None


def _as_binding(obj):
    return obj if isinstance(obj, Binding) else Binding(obj)


class DistributedAlgorithm:
    """Stepper for the interconnection of ``block`` with its trackers."""

    def __init__(self, block, trackers, delta):
        self.block = block
        self.delta = check_interval(delta, "delta", 0.0, 1.0)
        self.N = block.n_agents
        self.inner = [c for c in block.components if c.stage == "inner"]
        self.outer = [c for c in block.components if c.stage == "outer"]
        if block.nested:
            self.cascade = self._bind_cascade(trackers)
            self.trackers = None
        else:
            self.cascade = None
            self.trackers = self._bind_flat(trackers)

    # -- binding -----------------------------------------------------------

    def _check_tracker(self, name, binding):
        comp = self.block.component(name)
        n = getattr(binding.tracker, "n_agents", None)
        if n is not None and n != self.N:
            raise SignatureError(f"component '{name}': tracker runs on {n} agents, block has {self.N}")
        if binding.dim is not None and binding.dim != comp.dim:
            raise SignatureError(f"component '{name}': binding expects dim {binding.dim}, block provides {comp.dim}")
        if binding.kind is not None and binding.kind != comp.kind:
            raise SignatureError(f"component '{name}': binding expects a {binding.kind}, block provides a {comp.kind}")

    def _bind_flat(self, trackers):
        names = [c.name for c in self.block.components]
        if isinstance(trackers, str) and trackers == "exact":
            trackers = {name: ExactAverage() for name in names}
        elif isinstance(trackers, (Tracker, Binding)):
            trackers = {name: trackers for name in names}
        elif isinstance(trackers, Cascade):
            raise SignatureError(f"a cascade tracker cannot bind the flat components {names}")
        trackers = dict(trackers)
        for name in names:
            if name not in trackers:
                raise SignatureError(f"component '{name}' has no tracker bound")
        for name in trackers:
            if name not in names:
                raise SignatureError(f"component '{name}' is not an aggregate of this block (expected {names})")
        bound = {name: _as_binding(trackers[name]) for name in names}
        for name, b in bound.items():
            self._check_tracker(name, b)
        return {name: b.tracker for name, b in bound.items()}

    def _bind_cascade(self, trackers):
        if isinstance(trackers, str) and trackers == "exact":
            trackers = Cascade(ExactAverage(), ExactAverage())
        if not isinstance(trackers, Cascade):
            raise SignatureError(
                f"component '{self.outer[0].name}' is evaluated at the estimate of "
                f"'{self.inner[0].name}' and needs a Cascade tracker")
        for comp, tr in [(c, trackers.inner) for c in self.inner] + [(c, trackers.outer) for c in self.outer]:
            self._check_tracker(comp.name, Binding(tr))
        return trackers

    # -- signals -----------------------------------------------------------

    def _scale(self, comp, terms):
        return self.N * terms if comp.kind == "sum" else terms

    def signals(self, chi):
        """Per-agent tracker inputs for the (inner) components."""
        terms = self.block.contributions(chi)
        return {c.name: self._scale(c, np.asarray(terms[c.name], dtype=float)) for c in self.inner}

    def _pack(self, comps, values):
        return np.concatenate([values[c.name] for c in comps], axis=1)

    def _unpack(self, comps, arr):
        out, k = {}, 0
        for c in comps:
            out[c.name] = arr[:, k:k + c.dim]
            k += c.dim
        return out

    def _outer_fn(self, chi):
        def outer_signals(inner_est):
            est = self._unpack(self.inner, inner_est)
            terms = self.block.outer_contributions(chi, est)
            return self._pack(self.outer, {c.name: self._scale(c, np.asarray(terms[c.name], float))
                                           for c in self.outer})
        return outer_signals

    # -- dynamics ----------------------------------------------------------

    def init(self, chi0=None):
        """Initial ``(chi, z)``; tracker states start at their admissible (zero) points."""
        chi = self.block.init_state() if chi0 is None else np.array(chi0, dtype=float)
        chi = self.block.check_init(chi) if hasattr(self.block, "check_init") else self.block.check_state(chi)
        u = self.signals(chi)
        if self.cascade is not None:
            z = self.cascade.init_state(self._pack(self.inner, u), self._outer_fn(chi))
        else:
            z = {name: tr.init_state(u[name]) for name, tr in self.trackers.items()}
        return chi, z

    def _estimates(self, chi, z, u):
        if self.cascade is not None:
            est_in, est_out = self.cascade.estimate(self._pack(self.inner, u), self._outer_fn(chi), z)
            est = self._unpack(self.inner, est_in)
            est.update(self._unpack(self.outer, est_out))
            return est
        return {name: tr.estimate(u[name], z[name]) for name, tr in self.trackers.items()}

    def _update(self, chi, z, u):
        if self.cascade is not None:
            return self.cascade.update(self._pack(self.inner, u), self._outer_fn(chi), z)
        return {name: tr.update(u[name], z[name]) for name, tr in self.trackers.items()}

    def estimates(self, chi, z):
        """Each agent's proxy of every aggregate component, ``name -> (N, dim)``."""
        return self._estimates(chi, z, self.signals(chi))

    def update_trackers(self, chi, z):
        return self._update(chi, z, self.signals(chi))

    def step(self, chi, z):
        """One synchronous round; returns ``(chi+, z+)``."""
        u = self.signals(chi)
        est = self._estimates(chi, z, u)
        chi_next = chi + self.delta * (self.block.step(chi, est) - chi)
        return chi_next, self._update(chi, z, u)

    def tracking_error(self, chi, z, est=None):
        """``|proxies - 1 alpha(chi)|`` over all components and agents."""
        est = self.estimates(chi, z) if est is None else est
        exact = self.block.exact_aggregate(chi)
        return float(np.sqrt(sum(np.sum((est[k] - exact[k]) ** 2) for k in exact)))


def assemble(block, trackers, delta):
    """Bind ``trackers`` to ``block``'s aggregate components.

    ``trackers`` is one of: a mapping ``component name -> Tracker`` (or
    :class:`Binding`), a single tracker reused for every component, a
    :class:`Cascade` for blocks with composite aggregates, or ``"exact"`` for
    the central-aggregator stand-in.
    """
    return DistributedAlgorithm(block, trackers, delta)


def _diverged(chi, z):
    if not np.all(np.isfinite(chi)) or np.linalg.norm(chi) > DIVERGENCE_NORM:
        return True
    zf = flatten_state(z)
    return not np.all(np.isfinite(zf)) or np.linalg.norm(zf) > DIVERGENCE_NORM


def run(alg, horizon, init=None, reference=None, record_every=1, record_states=False):
    """Iterate the assembled algorithm; a divergence event truncates the trace."""
    check_int(horizon, "horizon", 0)
    check_int(record_every, "record_every", 1)
    chi, z = alg.init(init)
    trace = RunTrace()
    _record(trace, alg.block, 0, chi, reference, alg.tracking_error(chi, z), record_states,
            tracker_state=z if record_states else None)
    for t in range(1, horizon + 1):
        chi, z = alg.step(chi, z)
        if _diverged(chi, z):
            trace.diverged = True
            trace.divergence_t = t
            break
        if t % record_every == 0 or t == horizon:
            _record(trace, alg.block, t, chi, reference, alg.tracking_error(chi, z), record_states,
                    tracker_state=z if record_states else None)
    return trace


def run_double_loop(alg, inner_iters, outer_iters, init=None, inner_tol=None, reference=None,
                    record_states=True):
    """Reference double loop: settle the trackers with ``chi`` frozen, then take a full step.

    Before each outer step the trackers run up to ``inner_iters`` rounds, or
    until no proxy moves by more than ``inner_tol``. Outer steps where the
    tolerance was not met are listed in ``trace.warnings``. ``alg.delta`` is
    ignored.
    """
    check_int(inner_iters, "inner_iters", 0)
    check_int(outer_iters, "outer_iters", 0)
    block = alg.block
    chi, z = alg.init(init)
    trace = RunTrace()
    _record(trace, block, 0, chi, reference, alg.tracking_error(chi, z), record_states)
    for t in range(1, outer_iters + 1):
        u = alg.signals(chi)
        est = alg._estimates(chi, z, u)
        settled = inner_tol is None
        for _ in range(inner_iters):
            z = alg._update(chi, z, u)
            new_est = alg._estimates(chi, z, u)
            change = max(float(np.max(np.abs(new_est[k] - est[k]))) for k in est)
            est = new_est
            if inner_tol is not None and change <= inner_tol:
                settled = True
                break
        if not settled:
            trace.warnings.append(f"t={t}: inner loop did not reach tolerance {inner_tol:g} in {inner_iters} rounds")
        chi = block.step(chi, est)
        if _diverged(chi, z):
            trace.diverged = True
            trace.divergence_t = t
            break
        _record(trace, block, t, chi, reference, alg.tracking_error(chi, z), record_states)
    return trace


def converged(trace, column="opt_err", tol=1.0):
    """No divergence and the final error is below ``tol`` times the initial one."""
    if trace.diverged or len(trace) == 0:
        return False
    err = trace.array(column)
    return bool(np.isfinite(err[-1]) and err[-1] < tol * err[0])


def run_sweep(block, make_trackers, deltas, horizon, init=None, reference=None, record_every=1,
              max_workers=None):
    """Run one distributed trace per ``delta`` (concurrently); results follow ``deltas`` order.

    ``make_trackers()`` must return a fresh binding for each run.
    """
    def one(delta):
        return run(assemble(block, make_trackers(), delta), horizon, init=init, reference=reference,
                   record_every=record_every)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, deltas))


def estimate_delta_bar(block, make_trackers, deltas, horizon, init=None, reference=None, tol=1e-3):
    """Largest grid value of ``delta`` whose run converges (empirical, not certified).

    A run counts as converged when it does not diverge and its final
    ``opt_err`` is below ``tol`` times the initial one. Returns ``None`` when no
    grid value converges.
    """
    best = None
    for delta, trace in zip(deltas, run_sweep(block, make_trackers, deltas, horizon, init, reference)):
        if converged(trace, tol=tol) and (best is None or delta > best):
            best = delta
    return best


def centralized_reference(block, iters, init=None, reference=None, record_every=1):
    """Thin alias so sweeps can pull the centralized curve from one place."""
    return run_centralized(block, iters, init=init, reference=reference, record_every=record_every)


TRACKER_KINDS = ("perturbed", "pi", "radmm", "exact")


def make_tracker(kind, graph, W=None, **params):
    """One tracker of the given kind on ``graph`` (``W`` defaults to Metropolis weights)."""
    if kind == "exact":
        return ExactAverage()
    if W is None:
        W = metropolis_weights(graph)
    if kind == "perturbed":
        return PerturbedConsensus(W)
    if kind == "pi":
        return PIDac(W, **params)
    if kind == "radmm":
        return RAdmmDac(graph, **params)
    raise ValueError(f"unknown tracker kind {kind!r}; expected one of {TRACKER_KINDS}")


def bind_trackers(block, kind, graph, W=None, **params):
    """Binding for :func:`assemble`: one tracker per component, or a cascade for nested blocks."""
    if kind == "exact":
        return "exact"
    new = lambda: make_tracker(kind, graph, W, **params)  # noqa: E731
    if block.nested:
        return Cascade(new(), new())
    return {c.name: new() for c in block.components}
