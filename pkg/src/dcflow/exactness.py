"""Rank-gap measurement and exactness classification.

A relaxed optimum corresponds to physical voltages exactly when every
line's 2x2 lifted matrix [[v_i, W],[W, v_j]] is rank one, i.e. the gap
D = v_i v_j - W^2 vanishes. This module measures the gaps, classifies
solutions by which sufficient-condition regime they fall into, and
re-runs the constructive feasible-point arguments behind the theory as
executable checks on concrete solutions.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .formulations import LiftedSolution, map_g
from .netmodel import AssumptionReport, Network, check_assumptions, objective_value

EXACT = "exact"
THEOREM6_COND1 = "theorem6_cond1"
THEOREM6_COND2 = "theorem6_cond2"
NEEDS_RECOVERY = "needs_recovery"
ASSUMPTIONS_VIOLATED = "assumptions_violated"


@dataclass(frozen=True)
class Tolerances:
    """Classification tolerances.

    ``binding`` is one order above the solver tolerance so binding sets do
    not chatter; ``gap`` is the normalized rank-gap threshold for calling
    a solution exact (conservative against the ~1e-8 raw gaps a tight
    solve produces on O(1) data).
    """

    gap: float = 1e-6
    binding: float = 1e-7
    feasibility: float = 1e-8


@dataclass(frozen=True)
class ExactnessReport:
    per_line_gap: np.ndarray
    normalized_gap: np.ndarray
    max_gap: float
    normalized_max_gap: float
    rank_violating_lines: tuple[tuple[int, int], ...]
    binding_p_lower: tuple[int, ...]
    binding_line_limits: tuple[tuple[int, int], ...]
    assumption_flags: AssumptionReport
    classification: str
    recovery_buses: tuple[int, ...] = ()   # the set N-hat for the slack method
    failed_assumptions: tuple[str, ...] = ()

    @property
    def exact(self) -> bool:
        return self.classification == EXACT

    def to_dict(self, net: Network | None = None) -> dict:
        d = {
            "classification": self.classification,
            "max_gap": self.max_gap,
            "normalized_max_gap": self.normalized_max_gap,
            "per_line_gap": self.per_line_gap.tolist(),
            "normalized_gap": self.normalized_gap.tolist(),
            "rank_violating_lines": [list(k) for k in self.rank_violating_lines],
            "binding_p_lower": list(self.binding_p_lower),
            "binding_line_limits": [list(k) for k in self.binding_line_limits],
            "recovery_buses": list(self.recovery_buses),
            "failed_assumptions": list(self.failed_assumptions),
            "assumptions": self.assumption_flags.to_dict(),
        }
        if net is not None:
            d["lines"] = [list(l.key) for l in net.lines]
        return d

    def to_csv(self, net: Network) -> str:
        """Fixed-column CSV: line endpoints, raw gap, normalized gap, flags."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["line_i", "line_j", "gap", "normalized_gap", "rank_violating",
             "limit_binding", "lower_binding_i", "lower_binding_j"]
        )
        violating = set(self.rank_violating_lines)
        binding_lim = set(self.binding_line_limits)
        binding_low = set(self.binding_p_lower)
        for e, line in enumerate(net.lines):
            writer.writerow([
                line.i, line.j,
                f"{self.per_line_gap[e]:.6e}", f"{self.normalized_gap[e]:.6e}",
                int(line.key in violating), int(line.key in binding_lim),
                int(line.i in binding_low), int(line.j in binding_low),
            ])
        return buf.getvalue()

    def to_json(self, net: Network | None = None) -> str:
        return json.dumps(self.to_dict(net), indent=2)


def rank_gaps(sol: LiftedSolution, net: Network) -> np.ndarray:
    """Per-line gap D = v_i v_j - W^2 (W symmetric, stored once)."""
    gaps = np.zeros(len(net.lines))
    for e, line in enumerate(net.lines):
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        gaps[e] = sol.v[a] * sol.v[b] - sol.W[e] ** 2
    return gaps


def diagnose(sol: LiftedSolution, net: Network, tols: Tolerances | None = None) -> ExactnessReport:
    """Classify a converged relaxation solution.

    Precedence: exact when all normalized gaps sit below tolerance;
    otherwise, with no line limit binding anywhere, the inexactness is the
    anomaly the no-limit theory rules out, reported as a failed assumption
    when one is identifiable (condition-1 regime otherwise); with binding
    limits whose rank-violating lines all have slack endpoint lower
    bounds, condition-2 of the limit theory is flagged; the remaining case
    is genuine recovery territory, carrying the bus set where a rank
    violation coincides with a binding injection lower bound.
    """
    tols = tols or Tolerances()
    gaps = rank_gaps(sol, net)
    norm = np.array([
        g / (sol.v[net.bus_index[l.i]] * sol.v[net.bus_index[l.j]])
        for g, l in zip(gaps, net.lines)
    ])
    violating = tuple(
        l.key for g, l in zip(norm, net.lines) if g > tols.gap
    )
    binding_lower = tuple(
        b.id for b, p in zip(net.buses, sol.p)
        if np.isfinite(b.p_min) and p - b.p_min <= tols.binding
    )
    bf = map_g(sol, net)
    binding_limits = tuple(
        l.key for e, l in enumerate(net.lines)
        if l.i_max is not None and l.i_max ** 2 - bf.l[e] <= tols.binding
    )
    assumptions = check_assumptions(net, sol)
    failed = []
    if not assumptions.a1_uniform_vmax:
        failed.append("a1_uniform_vmax")
    if assumptions.a2_positive_loss is False:
        failed.append("a2_positive_loss")
    if assumptions.any_positive_p_min:
        failed.append("p_min_nonpositive")

    max_gap = float(gaps.max(initial=0.0))
    norm_max = float(norm.max(initial=0.0))

    recovery: tuple[int, ...] = ()
    if norm_max <= tols.gap:
        classification = EXACT
    elif not binding_limits:
        classification = ASSUMPTIONS_VIOLATED if failed else THEOREM6_COND1
    else:
        lower_set = set(binding_lower)
        violating_with_limit = set(violating) & set(binding_limits)
        if all(
            l.i not in lower_set and l.j not in lower_set
            for l in net.lines if l.key in violating_with_limit
        ):
            classification = THEOREM6_COND2
        else:
            violating_buses = {i for k in violating for i in k}
            recovery = tuple(sorted(violating_buses & lower_set))
            classification = NEEDS_RECOVERY

    return ExactnessReport(
        per_line_gap=gaps,
        normalized_gap=norm,
        max_gap=max_gap,
        normalized_max_gap=norm_max,
        rank_violating_lines=violating,
        binding_p_lower=binding_lower,
        binding_line_limits=binding_limits,
        assumption_flags=assumptions,
        classification=classification,
        recovery_buses=recovery,
        failed_assumptions=tuple(failed),
    )


class ConstructionFailed(AssertionError):
    """A constructive consequence check failed: a property violation."""

    def __init__(self, lemma: str, line_key: tuple[int, int], msg: str):
        self.lemma = lemma
        self.line_key = line_key
        super().__init__(f"{lemma} construction failed on line {line_key}: {msg}")


@dataclass(frozen=True)
class PropertyResult:
    lemma: str
    line: tuple[int, int]
    passed: bool
    detail: str = ""


def _feasible_for_lifted_constraints(sol: LiftedSolution, net: Network,
                                     tol: float, check_p_lower=True) -> str | None:
    """Check the lifted-space constraint block; returns a message on failure."""
    for pos, bus in enumerate(net.buses):
        if check_p_lower and sol.p[pos] < bus.p_min - tol:
            return f"p[{bus.id}] below lower bound"
        if sol.p[pos] > bus.p_max + tol:
            return f"p[{bus.id}] above upper bound"
        if not bus.v_min ** 2 - tol <= sol.v[pos] <= bus.v_max ** 2 + tol:
            return f"v[{bus.id}] out of box"
    for e, line in enumerate(net.lines):
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        if sol.W[e] < -tol:
            return f"W on {line.key} negative"
        if sol.W[e] ** 2 > sol.v[a] * sol.v[b] + tol:
            return f"cone violated on {line.key}"
    # injections must match the lifted balance equation
    p = np.zeros(net.n)
    for e, line in enumerate(net.lines):
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        p[a] += (sol.v[a] - sol.W[e]) * line.y
        p[b] += (sol.v[b] - sol.W[e]) * line.y
    if np.max(np.abs(p - sol.p)) > max(tol, 1e-9):
        return "injection balance violated"
    return None


def _perturbed_point(sol: LiftedSolution, net: Network, e: int, eps: float,
                     raise_v_at: tuple[int, ...]) -> LiftedSolution:
    """The proofs' feasible-point move: raise W on line e by eps, and raise
    v at the named endpoints by eps * y_e / (total incident conductance)."""
    line = net.lines[e]
    v = sol.v.copy()
    for bus_id in raise_v_at:
        pos = net.bus_index[bus_id]
        ysum = sum(l.y for _, l in net.adjacency[pos])
        v[pos] += line.y / ysum * eps
    W = sol.W.copy()
    W[e] += eps
    p = np.zeros(net.n)
    for k, l in enumerate(net.lines):
        a, b = net.bus_index[l.i], net.bus_index[l.j]
        p[a] += (v[a] - W[k]) * l.y
        p[b] += (v[b] - W[k]) * l.y
    return LiftedSolution(p=p, v=v, W=W)


def verify_lemma_consequences(sol: LiftedSolution, net: Network,
                              tols: Tolerances | None = None) -> list[PropertyResult]:
    """Execute the constructive feasible-point moves behind the exactness
    theory at a feasible lifted point and confirm their promised effects.

    For every rank-violating line:

    * a binding endpoint lower bound forces strict voltage headroom at
      that endpoint (its squared voltage sits below the cap);
    * with both endpoint lower bounds slack, nudging W up on that line
      (eps at half its admissible range) stays feasible and strictly
      lowers the objective;
    * with both binding, the paired W/v move preserves injections and
      spreads the rank violation to every neighbouring line.

    Raises :class:`ConstructionFailed` on the first violated property.
    """
    tols = tols or Tolerances()
    results: list[PropertyResult] = []
    gaps = rank_gaps(sol, net)
    base_obj = objective_value(net, sol.p)

    for e, line in enumerate(net.lines):
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        denom = sol.v[a] * sol.v[b]
        if gaps[e] / denom <= tols.gap:
            continue
        bus_a, bus_b = net.buses[a], net.buses[b]
        bind_a = np.isfinite(bus_a.p_min) and sol.p[a] - bus_a.p_min <= tols.binding
        bind_b = np.isfinite(bus_b.p_min) and sol.p[b] - bus_b.p_min <= tols.binding

        # (a) headroom at binding endpoints
        for pos, bus, bind in ((a, bus_a, bind_a), (b, bus_b, bind_b)):
            if bind:
                if not sol.v[pos] < bus.v_max ** 2 - 1e-12:
                    raise ConstructionFailed(
                        "headroom", line.key,
                        f"v[{bus.id}] = {sol.v[pos]} has no headroom below "
                        f"{bus.v_max ** 2}",
                    )
                results.append(PropertyResult("headroom", line.key, True,
                                              f"bus {bus.id}"))

        root_gap = np.sqrt(denom) - sol.W[e]
        if not bind_a and not bind_b:
            # strict-improvement move with W only
            eps = 0.5 * min(
                (sol.p[a] - bus_a.p_min) / line.y,
                (sol.p[b] - bus_b.p_min) / line.y,
                root_gap,
            )
            moved = _perturbed_point(sol, net, e, eps, raise_v_at=())
            msg = _feasible_for_lifted_constraints(moved, net, tols.feasibility)
            if msg is not None:
                raise ConstructionFailed("strict_improvement", line.key, msg)
            new_obj = objective_value(net, moved.p)
            if not new_obj < base_obj:
                raise ConstructionFailed(
                    "strict_improvement", line.key,
                    f"objective did not decrease ({new_obj} vs {base_obj})",
                )
            results.append(PropertyResult("strict_improvement", line.key, True,
                                          f"objective {base_obj:.6g} -> {new_obj:.6g}"))
        elif bind_a and bind_b:
            # injection-preserving move that spreads the violation
            ysum_a = sum(l.y for _, l in net.adjacency[a])
            ysum_b = sum(l.y for _, l in net.adjacency[b])
            eps = 0.5 * min(
                root_gap,
                ysum_a / line.y * (bus_a.v_max ** 2 - sol.v[a]),
                ysum_b / line.y * (bus_b.v_max ** 2 - sol.v[b]),
            )
            moved = _perturbed_point(sol, net, e, eps, raise_v_at=(bus_a.id, bus_b.id))
            if np.max(np.abs(moved.p - sol.p)) > 1e-9:
                raise ConstructionFailed("propagation", line.key,
                                         "injections changed")
            msg = _feasible_for_lifted_constraints(moved, net, tols.feasibility)
            if msg is not None:
                raise ConstructionFailed("propagation", line.key, msg)
            neighbours = [
                l for k, l in enumerate(net.lines)
                if k != e and (l.i in line.key or l.j in line.key)
            ]
            new_gaps = rank_gaps(moved, net)
            for l in neighbours + [line]:
                k = net.lines.index(l)
                ai, bi = net.bus_index[l.i], net.bus_index[l.j]
                if not moved.W[k] < np.sqrt(moved.v[ai] * moved.v[bi]) - 1e-15:
                    raise ConstructionFailed(
                        "propagation", line.key,
                        f"violation did not spread to line {l.key}",
                    )
            results.append(PropertyResult(
                "propagation", line.key, True,
                f"{len(neighbours)} neighbouring lines now rank-violating",
            ))
    return results


def theorem7_construction(sol: LiftedSolution, net: Network, line_key: tuple[int, int],
                          tols: Tolerances | None = None) -> LiftedSolution:
    """Close the rank gap on one line by the full admissible W increment.

    At a feasible limit-constrained point whose only rank violation is on
    ``line_key`` (with the current limit binding there and a binding
    endpoint lower bound), the returned point satisfies every constraint
    except possibly the injection lower bounds, is rank-exact, and has a
    strictly lower objective. Verified by the caller through
    :func:`diagnose` / feasibility checks.
    """
    tols = tols or Tolerances()
    e = [k for k, l in enumerate(net.lines) if l.key == tuple(sorted(line_key))]
    if not e:
        raise KeyError(f"no line {line_key}")
    e = e[0]
    a, b = net.bus_index[net.lines[e].i], net.bus_index[net.lines[e].j]
    eps = float(np.sqrt(sol.v[a] * sol.v[b]) - sol.W[e])
    moved = _perturbed_point(sol, net, e, eps, raise_v_at=())
    msg = _feasible_for_lifted_constraints(moved, net, tols.feasibility,
                                           check_p_lower=False)
    if msg is not None:
        raise ConstructionFailed("limit_repair", tuple(line_key), msg)
    # line limits must still hold: W only increased on the repaired line
    for k, l in enumerate(net.lines):
        if l.i_max is None:
            continue
        ai, bi = net.bus_index[l.i], net.bus_index[l.j]
        lhs = l.y ** 2 * (moved.v[ai] - 2 * moved.W[k] + moved.v[bi])
        if lhs > l.i_max ** 2 + tols.feasibility:
            raise ConstructionFailed("limit_repair", tuple(line_key),
                                     f"limit violated on {l.key}")
    return moved
