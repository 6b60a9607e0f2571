"""Per-iteration run records and their CSV form."""

from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("t", "opt_err", "track_err", "constr_res", "lambda_neg")


def _fmt(v):
    return format(float(v), ".17g")


@dataclass
class Reference:
    """Known solution used to score a run: ``chi_star`` for the state, ``x_star`` for the output."""

    x_star: np.ndarray = None
    chi_star: np.ndarray = None


@dataclass
class RunTrace:
    """Metrics recorded along a run.

    ``opt_err`` is ``|chi^t - chi_star|``, ``x_err`` is ``|x^t - x_star|`` and
    ``track_err`` is ``|proxies - 1 alpha(chi^t)|`` (zero for exact-aggregate
    runs). A divergence event stops the run and sets ``diverged``.
    """

    t: list = field(default_factory=list)
    opt_err: list = field(default_factory=list)
    x_err: list = field(default_factory=list)
    track_err: list = field(default_factory=list)
    constr_res: list = field(default_factory=list)
    lambda_neg: list = field(default_factory=list)
    states: list = field(default_factory=list)
    proxies: list = field(default_factory=list)
    tracker_states: list = field(default_factory=list)
    diverged: bool = False
    divergence_t: int = None
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def append(self, t, opt_err, x_err, track_err, constr_res, lambda_neg, state=None, proxies=None,
               tracker_state=None):
        self.t.append(int(t))
        self.opt_err.append(float(opt_err))
        self.x_err.append(float(x_err))
        self.track_err.append(float(track_err))
        self.constr_res.append(float(constr_res))
        self.lambda_neg.append(bool(lambda_neg))
        if state is not None:
            self.states.append(np.array(state, dtype=float))
        if proxies is not None:
            self.proxies.append(proxies)
        if tracker_state is not None:
            self.tracker_states.append(tracker_state)

    def array(self, name):
        return np.asarray(getattr(self, name), dtype=float)

    @property
    def final_state(self):
        return self.states[-1] if self.states else None

    def to_csv(self, path, full_state=False):
        """Write the trace; ``full_state`` appends ``chi_0 .. chi_k`` columns."""
        header = list(CSV_COLUMNS)
        if full_state:
            if len(self.states) != len(self.t):
                raise ValueError("full_state requested but states were not recorded for every row")
            header += [f"chi_{k}" for k in range(self.states[0].size)] if self.states else []
        lines = [",".join(header)]
        for k in range(len(self.t)):
            row = [str(self.t[k]), _fmt(self.opt_err[k]), _fmt(self.track_err[k]),
                   _fmt(self.constr_res[k]), "1" if self.lambda_neg[k] else "0"]
            if full_state:
                row += [_fmt(v) for v in self.states[k]]
            lines.append(",".join(row))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def read_trace_csv(path):
    """Load the metric columns of a trace CSV into a dict of arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name]) for name in data.dtype.names}
