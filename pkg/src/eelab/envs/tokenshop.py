"""TokenShop: constraint shopping on a tiny deterministic storefront.

Pages follow a fixed grammar (search, results, product, confirmation), the
full admissible action list is enumerable on every page, and buying scores
the purchase against the task constraints: category, color option, and
budget.  Success means every constraint is met.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InsufficientTasks, MalformedTask, OracleFailure
from ..substrate import ActionText, RngStream, Step, TaskSpec, Trajectory
from .base import EnvResult, EnvState, Environment, advance, render_state_text

NOTHING_HAPPENS = "Nothing happens."


@dataclass(frozen=True)
class ShopWorld:
    page: str                    # "search" | "results" | "product" | "done"
    query: str | None
    product_id: str | None
    selected_color: str | None


class TokenShop(Environment):
    name = "tokenshop"

    def __init__(self, fixture: dict):
        self.fixture = fixture
        self.categories: list[str] = list(fixture["categories"])
        self.colors: list[str] = list(fixture["colors"])
        self.products: dict[str, dict] = {p["id"]: p for p in fixture["products"]}
        self.budgets: list[int] = list(fixture["budgets"])
        self.page_size: int = int(fixture["results_page_size"])

    # ------------------------------------------------------------ tasks
    def _cheapest(self, category: str, color: str | None) -> dict | None:
        pool = [
            p for p in self.products.values()
            if p["category"] == category and (color is None or color in p["colors"])
        ]
        if not pool:
            return None
        return min(pool, key=lambda p: (p["price"], p["id"]))

    def generate_tasks(self, n: int, rng: RngStream) -> list[TaskSpec]:
        combos = []
        for category in self.categories:
            listed = {p["id"] for p in self._search_results(category)}
            for color in [None] + self.colors:
                best = self._cheapest(category, color)
                if best is None or best["id"] not in listed:
                    continue
                for budget in self.budgets:
                    if best["price"] < budget:
                        combos.append((category, color, budget))
        if n > len(combos):
            raise InsufficientTasks(f"tokenshop task pool holds {len(combos)} tasks, asked for {n}")
        picked = rng.child("tokenshop-tasks").shuffle(combos)[:n]
        tasks = []
        for idx, (category, color, budget) in enumerate(picked):
            if color:
                goal = f"find {color} {category} with price lower than {budget} dollars."
            else:
                goal = f"find {category} with price lower than {budget} dollars."
            tasks.append(
                TaskSpec(
                    task_id=f"ts-{idx:04d}",
                    env_name=self.name,
                    goal_text=goal,
                    gold={"category": category, "color": color, "budget": budget},
                    novelty_key=f"{category}:{color or 'any'}",
                )
            )
        return tasks

    # ------------------------------------------------------------ rendering
    def _search_results(self, query: str) -> list[dict]:
        """Loose storefront retrieval: matches on category words only, so
        attribute words in the query do not narrow the listing."""
        terms = set(query.split())
        matches = [p for p in self.products.values() if p["category"] in terms]
        matches.sort(key=lambda p: (p["price"], p["id"]))
        return matches[: self.page_size]

    def _observe(self, world: ShopWorld) -> str:
        if world.page == "search":
            return "You are on the search page. Type a query in the search box."
        if world.page == "results":
            listed = self._search_results(world.query or "")
            if not listed:
                return f"Search results for '{world.query}': no matching products."
            items = " ".join(
                f"[{p['id']}] {p['title']} in {', '.join(p['colors'])} - ${p['price']}."
                for p in listed
            )
            return f"Search results for '{world.query}': {items}"
        if world.page == "product":
            p = self.products[world.product_id]
            sel = f" selected color: {world.selected_color}." if world.selected_color else ""
            return (
                f"You are on the product page for [{p['id']}] {p['title']}. "
                f"color options: {', '.join(p['colors'])}. price: ${p['price']}. "
                f"sections: description, features, reviews. "
                f"buttons: buy now, < prev, back to search.{sel}"
            )
        p = self.products[world.product_id]
        color = f" in {world.selected_color}" if world.selected_color else ""
        return (
            f"Thank you for your purchase! You bought [{p['id']}] {p['title']}{color}. "
            f"total paid: ${p['price']}."
        )

    # ------------------------------------------------------------ protocol
    def reset(self, task: TaskSpec, rng=None) -> EnvState:
        if task.env_name != self.name:
            raise MalformedTask(f"task {task.task_id} belongs to {task.env_name}")
        world = ShopWorld(page="search", query=None, product_id=None, selected_color=None)
        obs = self._observe(world)
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
        world: ShopWorld = state.world
        actions: list[str] = []
        if world.page == "search":
            for category in self.categories:
                actions.append(f"search[{category}]")
                for color in self.colors:
                    actions.append(f"search[{color} {category}]")
        elif world.page == "results":
            for p in self._search_results(world.query or ""):
                actions.append(f"click[{p['id']}]")
            actions.append("click[back to search]")
        elif world.page == "product":
            p = self.products[world.product_id]
            for color in p["colors"]:
                actions.append(f"click[{color}]")
            actions.append("click[buy now]")
            actions.append("click[< prev]")
            actions.append("click[back to search]")
        return [ActionText.of(a) for a in actions]

    def _score(self, task: TaskSpec, world: ShopWorld) -> float:
        gold = task.gold
        p = self.products[world.product_id]
        checks = [p["category"] == gold["category"]]
        if gold["color"]:
            checks.append(world.selected_color == gold["color"])
        checks.append(p["price"] < gold["budget"])
        return sum(checks) / len(checks)

    def step(self, state: EnvState, action: ActionText) -> EnvResult:
        self._check_not_done(state)
        world: ShopWorld = state.world
        text = action.canonical

        if text.startswith("search[") and text.endswith("]") and world.page == "search":
            query = text[len("search["):-1]
            new_world = ShopWorld("results", query, None, None)
            return self._ok(state, action, new_world)

        if text.startswith("click[") and text.endswith("]"):
            target = text[len("click["):-1]
            if world.page == "results":
                listed = {p["id"] for p in self._search_results(world.query or "")}
                if target in listed:
                    return self._ok(state, action, ShopWorld("product", world.query, target, None))
                if target == "back to search":
                    return self._ok(state, action, ShopWorld("search", None, None, None))
            elif world.page == "product":
                p = self.products[world.product_id]
                if target in p["colors"]:
                    new_world = ShopWorld("product", world.query, world.product_id, target)
                    return self._ok(state, action, new_world)
                if target == "buy now":
                    new_world = ShopWorld("done", world.query, world.product_id, world.selected_color)
                    score = self._score(state.task, new_world)
                    return self._ok(state, action, new_world, reward=score, done=True)
                if target == "< prev":
                    return self._ok(state, action, ShopWorld("results", world.query, None, None))
                if target == "back to search":
                    return self._ok(state, action, ShopWorld("search", None, None, None))
        return self._invalid(state, action)

    def _ok(self, state, action, world, reward=0.0, done=False) -> EnvResult:
        obs = self._observe(world)
        nxt = advance(state, action, world, obs, reward, done)
        return EnvResult(nxt, reward, done, {"invalid_action": False})

    def _invalid(self, state, action) -> EnvResult:
        nxt = advance(state, action, state.world, NOTHING_HAPPENS, 0.0, False)
        return EnvResult(nxt, 0.0, False, {"invalid_action": True, "feedback": NOTHING_HAPPENS})

    # ------------------------------------------------------------ oracle
    def oracle_plan(self, task: TaskSpec) -> Trajectory:
        gold = task.gold
        best = self._cheapest(gold["category"], gold["color"])
        if best is None:
            raise OracleFailure(f"{task.task_id}: no product satisfies the constraints")
        query = f"{gold['color']} {gold['category']}" if gold["color"] else gold["category"]
        plan = [f"search[{query}]", f"click[{best['id']}]"]
        if gold["color"]:
            plan.append(f"click[{gold['color']}]")
        plan.append("click[buy now]")

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
            raise OracleFailure(f"{task.task_id}: oracle purchase scored {state.reward}")
        return Trajectory(
            task_id=task.task_id,
            env_name=self.name,
            source="oracle",
            success=True,
            score=1.0,
            steps=tuple(steps),
        )

    def max_steps_default(self) -> int:
        return 6

    def sr_length_cap(self) -> int | None:
        return 15

    def vocab_seed_texts(self) -> list[str]:
        texts = [NOTHING_HAPPENS]
        for p in self.products.values():
            world = ShopWorld("product", p["category"], p["id"], None)
            texts.append(self._observe(world))
            texts.append(self._observe(ShopWorld("done", None, p["id"], p["colors"][0])))
        return texts
