"""GridHouse: pick-and-place in a text household.

The agent starts in the middle of the house, navigates between receptacles,
and must move a goal object into a goal receptacle.  Transitions are
deterministic; invalid actions answer "Nothing happens." and leave the world
untouched.  The episode ends with reward 1 the moment the goal predicate
holds.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InsufficientTasks, MalformedTask, OracleFailure
from ..substrate import ActionText, RngStream, Step, TaskSpec, Trajectory
from .base import EnvResult, EnvState, Environment, advance, render_state_text

MIDDLE = "middle of the house"
NOTHING_HAPPENS = "Nothing happens."


@dataclass(frozen=True)
class HouseWorld:
    location: str                 # receptacle name or MIDDLE
    holding: str | None           # object instance name
    placements: tuple[tuple[str, tuple[str, ...]], ...]  # (receptacle, objects)

    def objects_at(self, recep: str) -> tuple[str, ...]:
        for name, objs in self.placements:
            if name == recep:
                return objs
        return ()

    def with_objects(self, recep: str, objs: tuple[str, ...]) -> "HouseWorld":
        placements = tuple(
            (name, objs if name == recep else cur) for name, cur in self.placements
        )
        return HouseWorld(self.location, self.holding, placements)


def _instance_list(kind: str, count: int) -> list[str]:
    # Highest instance first, matching household listing convention.
    return [f"{kind} {i}" for i in range(count, 0, -1)]


class GridHouse(Environment):
    name = "gridhouse"

    def __init__(self, fixture: dict):
        self.fixture = fixture
        self.receptacles: list[str] = list(fixture["receptacles"])
        self.homes: dict[str, str] = dict(fixture["homes"])
        self.object_types: list[str] = list(fixture["object_types"])
        self.goal_receptacles: list[str] = list(fixture["goal_receptacles"])
        self.max_instances: int = int(fixture["max_instances"])

    # ------------------------------------------------------------ tasks
    def generate_tasks(self, n: int, rng: RngStream) -> list[TaskSpec]:
        combos = []
        for kind in self.object_types:
            for target in self.goal_receptacles:
                if self.homes[kind] == target:
                    continue
                for instance in range(1, self.max_instances + 1):
                    combos.append((kind, instance, target))
        if n > len(combos):
            raise InsufficientTasks(f"gridhouse task pool holds {len(combos)} tasks, asked for {n}")
        picked = rng.child("gridhouse-tasks").shuffle(combos)[:n]
        tasks = []
        for idx, (kind, instance, target) in enumerate(picked):
            obj = f"{kind} {instance}"
            tasks.append(
                TaskSpec(
                    task_id=f"gh-{idx:04d}",
                    env_name=self.name,
                    goal_text=f"put {obj} in {target}.",
                    gold={"object": obj, "object_type": kind, "target": target},
                    novelty_key=f"{kind}->{target}",
                )
            )
        return tasks

    # ------------------------------------------------------------ world
    def _build_world(self, task: TaskSpec) -> HouseWorld:
        gold = task.gold
        counts = {}
        placement_rng = RngStream(_task_seed(task.task_id), "gridhouse-placement")
        for kind in self.object_types:
            counts[kind] = 1 + placement_rng.randint(0, self.max_instances)
        goal_instance = int(gold["object"].rsplit(" ", 1)[1])
        counts[gold["object_type"]] = max(counts[gold["object_type"]], goal_instance)
        placements = []
        for recep in self.receptacles:
            objs: list[str] = []
            for kind in self.object_types:
                if self.homes[kind] == recep:
                    objs.extend(_instance_list(kind, counts[kind]))
            placements.append((recep, tuple(objs)))
        return HouseWorld(location=MIDDLE, holding=None, placements=tuple(placements))

    # ------------------------------------------------------------ rendering
    def _room_view(self, world: HouseWorld) -> str:
        if world.location == MIDDLE:
            listing = ", ".join(f"a {r}" for r in sorted(self.receptacles))
            return f"You are in the {MIDDLE}. Looking around, you see {listing}."
        return self._recep_view(world, arrived=False)

    def _recep_view(self, world: HouseWorld, arrived: bool) -> str:
        recep = world.location
        objs = world.objects_at(recep)
        if objs:
            listing = ", ".join(f"a {o}" for o in objs)
            contents = f"On the {recep}, you see {listing}."
        else:
            contents = f"On the {recep}, you see nothing."
        if arrived:
            return f"You arrive at {recep}. {contents}"
        return contents

    # ------------------------------------------------------------ protocol
    def reset(self, task: TaskSpec, rng=None) -> EnvState:
        if task.env_name != self.name:
            raise MalformedTask(f"task {task.task_id} belongs to {task.env_name}")
        world = self._build_world(task)
        obs = self._room_view(world)
        return EnvState(
            env_name=self.name,
            task=task,
            world=world,
            history=(),
            observation=obs,
            state_text=render_state_text(task, (), obs),
            done=False,
            reward=0.0,
        )

    def admissible_actions(self, state: EnvState) -> list[ActionText]:
        self._check_not_done(state)
        world: HouseWorld = state.world
        actions: list[str] = []
        for recep in sorted(self.receptacles):
            if recep != world.location:
                actions.append(f"go to {recep}")
        if world.location != MIDDLE:
            if world.holding is None:
                for obj in sorted(world.objects_at(world.location)):
                    actions.append(f"take {obj} from {world.location}")
            else:
                actions.append(f"put {world.holding} in/on {world.location}")
            actions.append(f"examine {world.location}")
        actions.append("look")
        actions.append("inventory")
        return [ActionText.of(a) for a in actions]

    def step(self, state: EnvState, action: ActionText) -> EnvResult:
        self._check_not_done(state)
        world: HouseWorld = state.world
        text = action.canonical
        gold = state.task.gold

        if text.startswith("go to "):
            recep = text[len("go to "):]
            if recep in self.receptacles and recep != world.location:
                new_world = HouseWorld(recep, world.holding, world.placements)
                obs = self._recep_view(new_world, arrived=True)
                return self._ok(state, action, new_world, obs)
            return self._invalid(state, action)

        if text.startswith("take ") and " from " in text:
            obj, recep = text[len("take "):].split(" from ", 1)
            at_recep = world.location == recep
            if at_recep and world.holding is None and obj in world.objects_at(recep):
                remaining = tuple(o for o in world.objects_at(recep) if o != obj)
                new_world = HouseWorld(recep, obj, world.placements).with_objects(recep, remaining)
                obs = f"You pick up the {obj} from the {recep}."
                return self._ok(state, action, new_world, obs)
            return self._invalid(state, action)

        if text.startswith("put ") and " in/on " in text:
            obj, recep = text[len("put "):].split(" in/on ", 1)
            if world.location == recep and world.holding == obj:
                new_world = HouseWorld(recep, None, world.placements).with_objects(
                    recep, world.objects_at(recep) + (obj,)
                )
                obs = f"You put the {obj} in/on the {recep}."
                done = obj == gold["object"] and recep == gold["target"]
                return self._ok(state, action, new_world, obs, reward=1.0 if done else 0.0, done=done)
            return self._invalid(state, action)

        if text.startswith("examine "):
            recep = text[len("examine "):]
            if world.location == recep:
                return self._ok(state, action, world, self._recep_view(world, arrived=False))
            return self._invalid(state, action)

        if text == "look":
            return self._ok(state, action, world, self._room_view(world))

        if text == "inventory":
            if world.holding:
                obs = f"You are carrying: a {world.holding}."
            else:
                obs = "You are not carrying anything."
            return self._ok(state, action, world, obs)

        return self._invalid(state, action)

    def _ok(self, state, action, world, obs, reward=0.0, done=False) -> EnvResult:
        nxt = advance(state, action, world, obs, reward, done)
        return EnvResult(nxt, reward, done, {"invalid_action": False})

    def _invalid(self, state, action) -> EnvResult:
        nxt = advance(state, action, state.world, NOTHING_HAPPENS, 0.0, False)
        return EnvResult(nxt, 0.0, False, {"invalid_action": True, "feedback": NOTHING_HAPPENS})

    # ------------------------------------------------------------ oracle
    def oracle_plan(self, task: TaskSpec) -> Trajectory:
        gold = task.gold
        source = self.homes[gold["object_type"]]
        plan = [
            f"go to {source}",
            f"take {gold['object']} from {source}",
            f"go to {gold['target']}",
            f"put {gold['object']} in/on {gold['target']}",
        ]
        state = self.reset(task)
        steps = []
        for i, raw in enumerate(plan):
            action = ActionText.of(raw)
            result = self.step(state, action)
            if result.info.get("invalid_action"):
                raise OracleFailure(f"{task.task_id}: oracle action rejected: {raw}")
            steps.append(Step(i, state.state_text, action, result.reward, result.done))
            state = result.next_state
        if not state.done or state.reward != 1.0:
            raise OracleFailure(f"{task.task_id}: oracle plan did not reach the goal")
        return Trajectory(
            task_id=task.task_id,
            env_name=self.name,
            source="oracle",
            success=True,
            score=1.0,
            steps=tuple(steps),
        )

    def max_steps_default(self) -> int:
        return 8

    def vocab_seed_texts(self) -> list[str]:
        texts = [NOTHING_HAPPENS, "You are not carrying anything.", "You are carrying: a"]
        for kind in self.object_types:
            for i in range(1, self.max_instances + 1):
                texts.append(f"You pick up the {kind} {i} from the desk 1.")
        for recep in self.receptacles:
            texts.append(f"You arrive at {recep}. On the {recep}, you see nothing.")
            texts.append(f"You put the book 1 in/on the {recep}.")
        return texts


def _task_seed(task_id: str) -> int:
    import hashlib

    return int.from_bytes(hashlib.sha256(task_id.encode()).digest()[:8], "little")
