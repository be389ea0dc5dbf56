"""Pick-and-place plans and their geometric replay check."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .geometry import EPS, Instance, Pose, collide, inside_workspace


@dataclass(frozen=True)
class Action:
    obj: int
    src: Pose
    dst: Pose
    step: int | None = None

    def to_json(self) -> dict:
        d = {"id": self.obj, "from": self.src.as_list(), "to": self.dst.as_list()}
        if self.step is not None:
            d["step"] = self.step
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "Action":
        return cls(int(d["id"]), Pose(*d["from"]), Pose(*d["to"]), d.get("step"))


@dataclass
class Plan:
    actions: list[Action]
    meta: dict = field(default_factory=dict)

    @property
    def action_count(self) -> int:
        return len(self.actions)

    def buffered(self, instance: Instance, tol: float = 1e-7) -> set[int]:
        """Objects that were ever placed somewhere other than their goal."""
        return {a.obj for a in self.actions if not a.dst.close_to(instance.goal[a.obj], tol)}

    def to_json(self) -> dict:
        return {"actions": [a.to_json() for a in self.actions], "meta": self.meta}

    @classmethod
    def from_json(cls, d: Mapping) -> "Plan":
        return cls([Action.from_json(a) for a in d["actions"]], dict(d.get("meta") or {}))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def __add__(self, other: "Plan") -> "Plan":
        meta = dict(self.meta)
        meta.update(other.meta)
        return Plan(list(self.actions) + list(other.actions), meta)


@dataclass
class Validation:
    ok: bool
    index: int | None = None
    message: str = ""
    final: dict | None = None

    def __bool__(self) -> bool:
        return self.ok


def _groups(actions: list[Action]) -> list[list[tuple[int, Action]]]:
    """Consecutive actions that share a step number run as one group."""
    out: list[list[tuple[int, Action]]] = []
    for k, a in enumerate(actions):
        if out and a.step is not None and out[-1][-1][1].step == a.step:
            out[-1].append((k, a))
        else:
            out.append([(k, a)])
    return out


def replay(
    instance: Instance,
    actions: Iterable[Action],
    start: Mapping[int, Pose] | None = None,
    tol: float = 1e-6,
) -> Validation:
    """Apply the actions from ``start`` checking containment and overlaps.

    Within one step group every object is lifted before any is placed, so
    two arms may trade places in a single step.
    """
    cur = dict(instance.start if start is None else start)
    for group in _groups(list(actions)):
        lifted = set()
        for k, a in group:
            if a.obj not in cur:
                return Validation(False, k, f"unknown object {a.obj}")
            if a.obj in lifted:
                return Validation(False, k, f"object {a.obj} moved twice in one step")
            if not cur[a.obj].close_to(a.src, tol):
                return Validation(False, k, f"object {a.obj} is not at the pick pose")
            lifted.add(a.obj)
        for k, a in group:
            shape = instance.shape(a.obj)
            if not inside_workspace(shape, a.dst, instance.workspace):
                return Validation(False, k, f"object {a.obj} placed outside the workspace")
            for j, p in cur.items():
                if j == a.obj or j in lifted:
                    continue
                if collide(shape, a.dst, instance.shape(j), p):
                    return Validation(False, k, f"object {a.obj} collides with object {j}")
            cur[a.obj] = a.dst
            lifted.discard(a.obj)
    return Validation(True, None, "", cur)


def validate_plan(instance: Instance, plan: Plan, tol: float = 1e-6) -> Validation:
    """Replay a plan and require the goal arrangement at the end."""
    res = replay(instance, plan.actions, tol=tol)
    if not res.ok:
        return res
    for i in instance.ids:
        if not res.final[i].close_to(instance.goal[i], max(tol, EPS)):
            return Validation(False, len(plan.actions), f"object {i} does not end at its goal", res.final)
    return res


def apply_actions(arr: Mapping[int, Pose], actions: Iterable[Action]) -> dict[int, Pose]:
    out = dict(arr)
    for a in actions:
        out[a.obj] = a.dst
    return out
