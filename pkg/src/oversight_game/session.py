"""Interactive episodes where a human plays the overseer.

The agent's meta-action for each step is sampled and committed before the
human's input arrives, which is the only faithful way to sequentialize a
simultaneous-move game over a turn-based wire. The base policy's proposal
is revealed only in the post-resolution record, and only for steps where
the agent asked.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import (OversightGame, step, sigma_risk_states,
                   PLAY, ASK, TRUST, OVERSEE, SI_NAMES, H_NAMES, OFF)
from .gridworld import GridWorld, ACTIONS
from .ipg import JointSoftmaxPolicy


class SessionError(Exception):
    """Protocol-level failure; code is one of the wire error codes."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


_H_FROM_NAME = {"trust": TRUST, "oversee": OVERSEE}


@dataclass
class Session:
    sid: str
    game: OversightGame
    si_probs: np.ndarray          # (S, 2) frozen agent meta-policy
    rng: np.random.Generator
    grid: GridWorld | None
    max_steps: int
    state: int
    pending_si: int | None = None
    step_index: int = 0
    cum_r_si: float = 0.0
    cum_r_h: float = 0.0
    violations: int = 0
    status: str = "active"
    done_reason: str | None = None
    transcript: list = field(default_factory=list)

    def _commit_si(self) -> None:
        u = self.rng.random()
        self.pending_si = PLAY if u < self.si_probs[self.state, PLAY] else ASK


def _cell(session: Session, s: int):
    if s == session.game.off_state:
        return None
    if session.grid is None:
        return int(s)
    x, y = session.grid.cells()[s]
    return [int(x), int(y)]


def _env_action_name(session: Session, a) -> str:
    if a == OFF:
        return "off"
    if session.grid is not None:
        return ACTIONS[a]
    return str(int(a))


def _overlay(grid: GridWorld | None):
    if grid is None:
        return None
    return {
        "width": grid.width,
        "height": grid.height,
        "walls": sorted([list(c) for c in grid.walls]),
        "taboo": sorted([list(c) for c in grid.taboo]),
        "start": list(grid.start),
        "goal": list(grid.goal),
    }


def session_view(session: Session) -> dict:
    """Wire view: the pending commitment plus the just-resolved step.

    The pending part never includes the proposal; the resolved sub-record
    includes it only when that step's agent action was ask.
    """
    last = session.transcript[-1] if session.transcript else None
    resolved = None
    if last is not None:
        resolved = {
            "state": last["state"],
            "si_meta_action": last["si"],
            "h_action": last["h"],
            "proposed_env_action": last["proposed"] if last["si"] == "ask" else None,
            "executed": last["executed"],
            "r_si": last["r_si"],
            "r_h": last["r_h"],
            "violation": last["violation"],
        }
    return {
        "type": "view",
        "session": session.sid,
        "step_index": session.step_index,
        "state": _cell(session, session.state),
        "si_meta_action": None if session.pending_si is None else SI_NAMES[session.pending_si],
        "proposed_env_action": None,
        "executed": None,
        "done": session.status == "done",
        "done_reason": session.done_reason,
        "cumulative": {"r_si": session.cum_r_si, "r_h": session.cum_r_h,
                       "violations": session.violations},
        "overlay": _overlay(session.grid),
        "resolved": resolved,
    }


def open_session(game: OversightGame, policy: JointSoftmaxPolicy, seed: int,
                 grid: GridWorld | None = None, max_steps: int | None = None,
                 sid: str = "s0") -> Session:
    """Start an episode at the base start state and commit the agent's first
    meta-action before any human input is read."""
    if policy.n_states != game.n_base:
        raise SessionError(
            "config", f"checkpoint covers {policy.n_states} states but the "
                      f"game has {game.n_base}")
    if grid is not None and len(grid.cells()) != game.n_base:
        raise SessionError("config", "grid does not match the game's state space")
    if max_steps is None:
        max_steps = grid.max_steps if grid is not None else 300
    session = Session(sid=sid, game=game, si_probs=policy.probs_si,
                      rng=np.random.default_rng(seed), grid=grid,
                      max_steps=max_steps, state=game.mdp.start)
    if game.terminal_mask()[session.state]:
        session.status = "done"
        session.done_reason = "goal"
    else:
        session._commit_si()
    return session


def advance(session: Session, h_action) -> dict:
    """Resolve the committed agent action against the human's, step the game,
    commit the next agent action, and return the new view."""
    if session.status != "active":
        raise SessionError("session_done",
                           f"session ended ({session.done_reason})")
    if isinstance(h_action, str):
        if h_action not in _H_FROM_NAME:
            raise SessionError("bad_action", f"unknown h action {h_action!r}")
        a_h = _H_FROM_NAME[h_action]
    elif h_action in (TRUST, OVERSEE):
        a_h = int(h_action)
    else:
        raise SessionError("bad_action", f"unknown h action {h_action!r}")

    a_si = session.pending_si
    res = step(session.game, session.state, a_si, a_h, session.rng)
    session.cum_r_si += res.r_si
    session.cum_r_h += res.r_h
    session.violations += int(res.violation)
    session.transcript.append({
        "step": session.step_index,
        "state": _cell(session, session.state),
        "si": SI_NAMES[a_si],
        "h": H_NAMES[a_h],
        "proposed": _env_action_name(session, res.proposed),
        "executed": _env_action_name(session, res.exec_outcome),
        "r_si": res.r_si,
        "r_h": res.r_h,
        "violation": bool(res.violation),
        "next_state": _cell(session, res.next_state),
    })
    session.step_index += 1
    session.state = res.next_state
    session.pending_si = None
    if res.next_state == session.game.off_state:
        session.status, session.done_reason = "done", "off"
    elif session.game.terminal_mask()[res.next_state]:
        session.status, session.done_reason = "done", "goal"
    elif session.step_index >= session.max_steps:
        session.status, session.done_reason = "done", "step-limit"
    else:
        session._commit_si()
    return session_view(session)


def replay_transcript(game: OversightGame, policy: JointSoftmaxPolicy, seed: int,
                      h_actions, grid: GridWorld | None = None,
                      max_steps: int | None = None) -> list:
    """Re-run an episode from recorded human inputs; returns the step log."""
    session = open_session(game, policy, seed, grid=grid, max_steps=max_steps)
    for h in h_actions:
        if session.status != "active":
            break
        advance(session, h)
    return session.transcript


def scripted_overseer(game: OversightGame, view: dict,
                      risk: np.ndarray | None = None,
                      grid: GridWorld | None = None) -> str:
    """The acceptance script: trust, except oversee when the agent asks at a
    state whose base action would enter a taboo cell."""
    if risk is None:
        risk = sigma_risk_states(game)
    if view["si_meta_action"] != "ask":
        return "trust"
    cell = view["state"]
    if grid is not None:
        s = grid.cells().index(tuple(cell))
    else:
        s = int(cell)
    return "oversee" if risk[s] else "trust"


class SessionService:
    """Dispatches wire messages to sessions; one service per artifact set.

    Sessions share only the frozen game and policy; each has its own rng and
    state, so concurrent sessions cannot interfere.
    """

    def __init__(self, game: OversightGame, policy: JointSoftmaxPolicy,
                 grid: GridWorld | None = None, max_steps: int | None = None):
        if policy.n_states != game.n_base:
            raise SessionError(
                "config", f"checkpoint covers {policy.n_states} states but "
                          f"the game has {game.n_base}")
        self.game = game
        self.policy = policy
        self.grid = grid
        self.max_steps = max_steps
        self.sessions: dict = {}
        self._counter = 0

    def handle(self, msg) -> dict | None:
        """One reply dict per message; close messages get none."""
        try:
            if not isinstance(msg, dict) or "type" not in msg:
                raise SessionError("bad_type", "message must carry a type field")
            kind = msg["type"]
            if kind == "open":
                return self._open(msg)
            if kind == "h_action":
                return advance(self._session_of(msg), msg.get("action"))
            if kind == "close":
                sid = msg.get("session")
                self.sessions.pop(sid, None)
                return None
            raise SessionError("bad_type", f"unknown message type {kind!r}")
        except SessionError as err:
            return {"type": "error", "code": err.code, "message": err.message}

    def _open(self, msg) -> dict:
        seed = msg.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise SessionError("config", f"seed must be a nonnegative int, got {seed!r}")
        self._counter += 1
        sid = f"s{self._counter}"
        session = open_session(self.game, self.policy, seed, grid=self.grid,
                               max_steps=self.max_steps, sid=sid)
        self.sessions[sid] = session
        return session_view(session)

    def _session_of(self, msg) -> Session:
        sid = msg.get("session")
        if sid not in self.sessions:
            raise SessionError("unknown_session", f"no session {sid!r}")
        return self.sessions[sid]
