"""Finite dual curriculum games: a student against two teachers, one of them active per episode.

Strategy sets are finite: ``n_pi`` student policies and ``n_theta`` level
parameters, with student payoff matrix ``V[pi, theta]``.  A teacher's
utility is either the student's regret on the level, a constant (the
uniform/random teacher) or an explicit matrix.  With probability ``p`` the
first teacher picks the level, otherwise the second.

The equilibria computed here are those of the finite matrix restriction;
they are a numerical verification device for the approximation bounds, not
a claim about equilibria over full policy spaces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import BoundViolated, InvalidEpsilon, NoEquilibriumFound

REGRET, UNIFORM = "regret", "uniform"

REPORT_NOTE = ("Equilibria are computed for the finite payoff matrices given; they verify the "
               "approximation bounds on this restriction only.")


@dataclass
class DualGame:
    payoffs: np.ndarray
    p: float
    teacher1: object = REGRET      # "regret", "uniform" or an (n_pi, n_theta) utility matrix
    teacher2: object = UNIFORM

    def __post_init__(self):
        self.payoffs = np.atleast_2d(np.asarray(self.payoffs, dtype=np.float64))
        if not np.all(np.isfinite(self.payoffs)):
            raise ValueError("payoffs must be finite")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    @property
    def shape(self):
        return self.payoffs.shape

    def utility(self, which: int) -> np.ndarray:
        kind = self.teacher1 if which == 1 else self.teacher2
        if isinstance(kind, str):
            if kind == REGRET:
                return regret_matrix(self.payoffs)
            if kind == UNIFORM:
                return np.zeros_like(self.payoffs)
            raise ValueError(f"unknown teacher utility {kind!r}")
        u = np.asarray(kind, dtype=np.float64)
        if u.shape != self.payoffs.shape:
            raise ValueError("teacher utility matrix must match the payoff shape")
        return u

    def is_constant(self, which: int) -> bool:
        u = self.utility(which)
        return bool(np.all(u == u.flat[0]))

    @property
    def B(self) -> float:
        """Largest pointwise gap between the two teacher utilities."""
        return float(np.max(np.abs(self.utility(1) - self.utility(2))))

    def to_dict(self) -> dict:
        def enc(k):
            return k if isinstance(k, str) else np.asarray(k).tolist()
        return {"payoffs": self.payoffs.tolist(), "p": self.p, "teacher1": enc(self.teacher1),
                "teacher2": enc(self.teacher2)}


@dataclass
class MixedProfile:
    student: np.ndarray
    teacher1: np.ndarray
    teacher2: np.ndarray

    def __post_init__(self):
        for name in ("student", "teacher1", "teacher2"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if np.any(v < -1e-12) or abs(v.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} is not a probability vector")
            v = np.clip(v, 0.0, None)
            setattr(self, name, v / v.sum())

    def to_dict(self) -> dict:
        return {"student": self.student.tolist(), "teacher1": self.teacher1.tolist(),
                "teacher2": self.teacher2.tolist()}


@dataclass
class Certificate:
    profile: MixedProfile
    exploitability: dict          # per-player gain from the best unilateral deviation
    supports: tuple = ()
    method: str = "support_enumeration"

    @property
    def max_gain(self) -> float:
        return max(self.exploitability.values())


@dataclass
class BestResponse:
    strategy: int
    value: float
    ties: tuple = field(default_factory=tuple)


def regret_matrix(payoffs) -> np.ndarray:
    V = np.asarray(payoffs, dtype=np.float64)
    return V.max(axis=0, keepdims=True) - V


def regret_of(game_or_payoffs, student_mixture, theta: int) -> float:
    V = game_or_payoffs.payoffs if isinstance(game_or_payoffs, DualGame) else \
        np.atleast_2d(np.asarray(game_or_payoffs, dtype=np.float64))
    col = V[:, theta]
    return float(col.max() - np.asarray(student_mixture) @ col)


def worst_case_regret(payoffs, student_mixture) -> float:
    V = np.atleast_2d(np.asarray(payoffs, dtype=np.float64))
    return float(np.max(V.max(axis=0) - np.asarray(student_mixture) @ V))


def minimax_regret(payoffs):
    """Student mixture minimising worst-case regret, by linear programming.

    Returns ``(value, mixture)``.
    """
    R = regret_matrix(payoffs)
    n_pi, n_th = R.shape
    # variables: sigma (n_pi), t; minimise t s.t. R^T sigma - t <= 0
    c = np.zeros(n_pi + 1)
    c[-1] = 1.0
    A_ub = np.hstack([R.T, -np.ones((n_th, 1))])
    A_eq = np.zeros((1, n_pi + 1))
    A_eq[0, :n_pi] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n_th), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n_pi + [(None, None)], method="highs")
    sigma = np.clip(res.x[:n_pi], 0, None)
    sigma /= sigma.sum()
    return worst_case_regret(payoffs, sigma), sigma


# best responses and exploitability ----------------------------------------------

def student_values(game: DualGame, t1, t2) -> np.ndarray:
    V = game.payoffs
    return game.p * (V @ t1) + (1 - game.p) * (V @ t2)


def _argmax_set(values, tol=1e-12):
    best = values.max()
    ties = tuple(int(i) for i in np.flatnonzero(values >= best - tol))
    return ties, float(best)


def best_response(game: DualGame, profile: MixedProfile, player: str) -> BestResponse:
    """Best pure reply of ``player`` ("student", "teacher1", "teacher2") to the others."""
    if player == "student":
        vals = student_values(game, profile.teacher1, profile.teacher2)
    elif player in ("teacher1", "teacher2"):
        which = 1 if player == "teacher1" else 2
        vals = profile.student @ game.utility(which)
    else:
        raise ValueError(f"unknown player {player!r}")
    ties, best = _argmax_set(vals)
    return BestResponse(ties[0], best, ties)


def exploitability(game: DualGame, profile: MixedProfile) -> dict:
    """Gain available to each player in the dual game by deviating unilaterally."""
    s, t1, t2 = profile.student, profile.teacher1, profile.teacher2
    sv = student_values(game, t1, t2)
    u1 = s @ game.utility(1)
    u2 = s @ game.utility(2)
    return {"student": float(sv.max() - s @ sv),
            "teacher1": float(game.p * (u1.max() - u1 @ t1)),
            "teacher2": float((1 - game.p) * (u2.max() - u2 @ t2))}


def base_game_gains(payoffs, teacher_utility, student_mix, teacher_mix) -> dict:
    """Deviation gains in a two-player base game at ``(student_mix, teacher_mix)``."""
    V = np.asarray(payoffs, dtype=np.float64)
    U = np.asarray(teacher_utility, dtype=np.float64)
    sv = V @ teacher_mix
    tv = student_mix @ U
    return {"student": float(sv.max() - student_mix @ sv),
            "teacher": float(tv.max() - tv @ teacher_mix)}


# equilibrium search ----------------------------------------------------------------

def _subsets(n):
    for k in range(1, n + 1):
        yield from itertools.combinations(range(n), k)


def _student_side(game, S, teachers):
    """Find sigma on support S making each (U, T) teacher's T its best-reply set.

    ``teachers`` lists ``(utility, support)`` pairs; constant teachers are left out.
    """
    n_pi, n_th = game.shape
    # variables: sigma (n_pi) then one free value per teacher
    n = n_pi + len(teachers)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    row = np.zeros(n)
    row[:n_pi] = 1.0
    A_eq.append(row), b_eq.append(1.0)
    for i in range(n_pi):
        if i not in S:
            row = np.zeros(n)
            row[i] = 1.0
            A_eq.append(row), b_eq.append(0.0)
    for k, (U, T) in enumerate(teachers):
        for th in range(n_th):
            row = np.zeros(n)
            row[:n_pi] = U[:, th]
            row[n_pi + k] = -1.0
            (A_eq if th in T else A_ub).append(row)
            (b_eq if th in T else b_ub).append(0.0)
    res = linprog(np.zeros(n), A_ub=np.array(A_ub) if A_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None, A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                  bounds=[(0, None)] * n_pi + [(None, None)] * len(teachers), method="highs")
    return None if res.status != 0 else res.x[:n_pi]


def _teacher_side(game, S, T1, T2):
    """Find teacher mixtures on T1, T2 making every policy in S a best reply."""
    n_pi, n_th = game.shape
    V, p = game.payoffs, game.p
    n = 2 * n_th + 1  # tau1, tau2, student value
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for k, T in enumerate((T1, T2)):
        row = np.zeros(n)
        row[k * n_th:(k + 1) * n_th] = 1.0
        A_eq.append(row), b_eq.append(1.0)
        for th in range(n_th):
            if th not in T:
                row = np.zeros(n)
                row[k * n_th + th] = 1.0
                A_eq.append(row), b_eq.append(0.0)
    for i in range(n_pi):
        row = np.zeros(n)
        row[:n_th] = p * V[i]
        row[n_th:2 * n_th] = (1 - p) * V[i]
        row[-1] = -1.0
        (A_eq if i in S else A_ub).append(row)
        (b_eq if i in S else b_ub).append(0.0)
    res = linprog(np.zeros(n), A_ub=np.array(A_ub) if A_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None, A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                  bounds=[(0, None)] * (2 * n_th) + [(None, None)], method="highs")
    if res.status != 0:
        return None
    return res.x[:n_th], res.x[n_th:2 * n_th]


def _candidates(game):
    """Support triples ordered by total size; a constant teacher's support is left free."""
    n_pi, n_th = game.shape
    c1, c2 = game.is_constant(1), game.is_constant(2)
    full = tuple(range(n_th))
    t1s = [full] if c1 else list(_subsets(n_th))
    t2s = [full] if c2 else list(_subsets(n_th))
    triples = [(S, T1, T2) for S in _subsets(n_pi) for T1 in t1s for T2 in t2s]
    triples.sort(key=lambda x: (len(x[0]) + (0 if c1 else len(x[1])) + (0 if c2 else len(x[2]))))
    return triples, c1, c2


def _grid_search(game, resolution):
    """Coarse fallback: best profile on a simplex grid (used only for the error report)."""
    n_pi, n_th = game.shape

    def grid(n):
        for combo in itertools.product(range(resolution + 1), repeat=n):
            if sum(combo) == resolution:
                yield np.array(combo, dtype=float) / resolution

    best, best_gain = None, np.inf
    for s in grid(n_pi):
        t1 = np.eye(n_th)[int(np.argmax(s @ game.utility(1)))]
        t2 = np.eye(n_th)[int(np.argmax(s @ game.utility(2)))]
        prof = MixedProfile(s, t1, t2)
        gain = max(exploitability(game, prof).values())
        if gain < best_gain:
            best, best_gain = prof, gain
    return best, best_gain


def find_equilibrium(game: DualGame, grid_resolution: int = 20, tol: float = 1e-9,
                     max_size: int = 6) -> Certificate:
    """Nash equilibrium of the dual game by support enumeration.

    For each candidate support triple two independent linear feasibility
    problems are solved: one for the student mixture (teacher supports must
    be best replies) and one for the two teacher mixtures (student support
    must be best replies).  The first triple whose solution re-checks to an
    exploitability within ``tol`` is returned.
    """
    n_pi, n_th = game.shape
    if max(n_pi, n_th) > max_size:
        raise ValueError(f"strategy sets larger than {max_size} are out of scope")
    U1, U2 = game.utility(1), game.utility(2)
    triples, c1, c2 = _candidates(game)
    # each teacher's conditions alone are necessary; cache them to prune the joint problem
    single = {}

    def feasible_alone(k, U, S, T):
        if (k, S, T) not in single:
            single[k, S, T] = _student_side(game, S, [(U, T)]) is not None
        return single[k, S, T]

    for S, T1, T2 in triples:
        teachers = [(U, T) for U, T, const in ((U1, T1, c1), (U2, T2, c2)) if not const]
        if len(teachers) == 2 and not (feasible_alone(1, U1, S, T1)
                                       and feasible_alone(2, U2, S, T2)):
            continue
        sigma = _student_side(game, S, teachers)
        if sigma is None:
            continue
        taus = _teacher_side(game, S, T1, T2)
        if taus is None:
            continue
        prof = MixedProfile(np.clip(sigma, 0, None) / np.clip(sigma, 0, None).sum(),
                            np.clip(taus[0], 0, None) / np.clip(taus[0], 0, None).sum(),
                            np.clip(taus[1], 0, None) / np.clip(taus[1], 0, None).sum())
        gains = exploitability(game, prof)
        if max(gains.values()) <= tol:
            return Certificate(prof, gains, (S, T1, T2))
    best, gain = _grid_search(game, grid_resolution)
    raise NoEquilibriumFound(f"no profile within tol {tol}; best grid gain {gain:.3g}", best=best)


# approximation bounds ----------------------------------------------------------------

def theorem1_bounds(B: float, p: float) -> dict:
    return {"joint": 2 * B * p * (1 - p), "teacher1_only": 2 * B * (1 - p),
            "teacher2_only": 2 * B * p}


def verify_theorem1(game: DualGame, cert: Certificate, tol: float = 1e-6,
                    raise_on_violation: bool = True) -> dict:
    """Check the combined-teacher profile against the three base-game bounds.

    The profile is ``(sigma, p tau1 + (1-p) tau2)``; for each base game
    (joint utility, first teacher only, second teacher only) its
    exploitability is the larger of the student's and the teacher's gains.
    """
    prof = cert.profile
    p = game.p
    joint_mix = p * prof.teacher1 + (1 - p) * prof.teacher2
    U1, U2 = game.utility(1), game.utility(2)
    utilities = {"joint": p * U1 + (1 - p) * U2, "teacher1_only": U1, "teacher2_only": U2}
    bounds = theorem1_bounds(game.B, p)
    out = {"B": game.B, "p": p, "bounds": bounds, "gains": {}, "exploitability": {},
           "pass": True}
    for name, U in utilities.items():
        gains = base_game_gains(game.payoffs, U, prof.student, joint_mix)
        expl = max(gains.values())
        out["gains"][name] = gains
        out["exploitability"][name] = expl
        margin = expl - bounds[name]
        if margin > tol:
            out["pass"] = False
            if raise_on_violation:
                raise BoundViolated(f"{name}: exploitability {expl:.3g} exceeds bound "
                                    f"{bounds[name]:.3g}", player=name, margin=margin)
    return out


# the counterexample game -------------------------------------------------------------

def build_table41_game(B: float, p: float, eps: float, n: int) -> np.ndarray:
    """4 x (n+1) one-step game where a random co-teacher pulls the student off minimax regret."""
    if B <= 0 or n < 2:
        raise ValueError("need B > 0 and n >= 2")
    if not eps < B * (1 - p) / 2:
        raise InvalidEpsilon(f"eps={eps} must be below B(1-p)/2={B * (1 - p) / 2}")
    V = np.zeros((4, n + 1))
    V[0, 0] = B
    V[1, 1] = B
    V[2, 0] = B * p + 2 * eps
    V[3, 1] = B * p + 2 * eps
    V[2, 2:] = B * p / 2 + eps
    V[3, 2:] = B * p / 2 + eps
    return V


def table41_profile(n: int) -> MixedProfile:
    """Student mixes pi2/pi3, regret teacher mixes theta0/theta1, random teacher over theta2..n."""
    s = np.array([0.0, 0.0, 0.5, 0.5])
    t1 = np.zeros(n + 1)
    t1[:2] = 0.5
    t2 = np.zeros(n + 1)
    t2[2:] = 1.0 / (n - 1)
    return MixedProfile(s, t1, t2)


def table41_report(B: float, p: float, eps: float, n: int) -> dict:
    V = build_table41_game(B, p, eps, n)
    game = DualGame(V, p, REGRET, UNIFORM)
    mm_value, mm_mix = minimax_regret(V)
    prof = table41_profile(n)
    gains = exploitability(game, prof)
    cert = Certificate(prof, gains, method="explicit")
    br = best_response(game, prof, "student")
    sv = student_values(game, prof.teacher1, prof.teacher2)
    return {
        "note": REPORT_NOTE,
        "game": {"B": B, "p": p, "eps": eps, "n": n, "payoffs": V.tolist()},
        "minimax_regret_value": mm_value,
        "minimax_regret_student": mm_mix.tolist(),
        "equilibrium": prof.to_dict(),
        "equilibrium_student_worst_case_regret": worst_case_regret(V, prof.student),
        "expected_regret_bound": B / 2 + B * (1 - p) / 2 - eps,
        "student_values": sv.tolist(),
        "student_best_responses": list(br.ties),
        "exploitabilities": gains,
        "certified": cert.max_gain < 1e-9,
        "theorem1": verify_theorem1(game, cert, raise_on_violation=False),
    }


# randomized sweep ----------------------------------------------------------------------

TEACHER_PAIRS = ((REGRET, UNIFORM), (UNIFORM, REGRET), (REGRET, REGRET), ("random", "random"),
                 (REGRET, "random"))


def random_dual_game(rng, max_size: int = 4) -> DualGame:
    n_pi = int(rng.integers(1, max_size + 1))
    n_th = int(rng.integers(1, max_size + 1))
    V = rng.random((n_pi, n_th))
    p = float(rng.integers(1, 10)) / 10
    kinds = TEACHER_PAIRS[rng.integers(len(TEACHER_PAIRS))]
    t = [rng.random((n_pi, n_th)) if k == "random" else k for k in kinds]
    return DualGame(V, p, t[0], t[1])


def sweep(n_games: int, rng, tol: float = 1e-6, max_size: int = 4) -> dict:
    """Solve random dual games and check the bounds on each; counts violations."""
    violations, rows = 0, []
    for _ in range(n_games):
        game = random_dual_game(rng, max_size)
        cert = find_equilibrium(game, tol=1e-9)
        rep = verify_theorem1(game, cert, tol=tol, raise_on_violation=False)
        violations += not rep["pass"]
        rows.append({"shape": list(game.shape), "p": game.p, "B": rep["B"],
                     "exploitability": rep["exploitability"], "bounds": rep["bounds"],
                     "dual_game_gain": cert.max_gain, "pass": rep["pass"]})
    return {"games": n_games, "violations": violations, "results": rows}
