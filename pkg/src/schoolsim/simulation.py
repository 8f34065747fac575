"""Step-cycle orchestrator: situate, retrieve, prompt, act, update, reflect.

Each agent step runs the same cycle: retrieve memories for the situation
(skipped entirely when no memory base is configured), assemble the prompt,
ask the provider for the action, append the turn to working memory, ask the
provider for a memory update and apply it, apply environment deltas parsed
from the response footer, and, at the day's extracurricular slot, reflect the
day's log into a role-setting update.

The dataset drives the run chronologically; slots are barriers, so interaction
text always reflects completed prior slots. With scripted providers the whole
run is a pure function of (dataset, roles, config, seed).
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .agent import (
    RoleSetting,
    WorkingMemory,
    assemble_prompt,
    load_role,
    save_role,
    serialize_role,
    update_role_setting,
)
from .config import SimulationConfig
from .dataset import Dataset, parse_action_footer
from .embedding import DEFAULT_DIM, DEFAULT_SEED, HashedBagEmbedder
from .environment import (
    AreaMap,
    EnvironmentState,
    SimTime,
    Slot,
    classify_action,
    parse_situation_header,
)
from .errors import (
    MemoryUpdateError,
    MissingFieldError,
    NoJsonFoundError,
    ProviderError,
    UnknownAreaError,
    WrongTypeError,
)
from .llm import ChatMessage, GenParams, Provider, ReplayProvider
from .memory import (
    DEFAULT_SALIENCE_DECAY,
    DEFAULT_SHORT_TERM_CAPACITY,
    MemoryStore,
    MemoryUpdate,
    RetrievalPolicy,
)
from .prompts import MEMORY_UPDATE_HEADER, MEMORY_UPDATE_TEMPLATE, ROLE_UPDATE_HEADER

logger = logging.getLogger(__name__)

LOG_FILENAME = "log.jsonl"
MANIFEST_FILENAME = "manifest.json"
CHECKPOINT_DIRNAME = "checkpoint"


@dataclass(frozen=True)
class SituationFrame:
    """What an agent perceives at one step."""

    time: SimTime
    location: str | None
    scheduled_activity: str | None
    text: str

    @classmethod
    def from_user_message(cls, content: str) -> "SituationFrame":
        time, location, activity = parse_situation_header(content)
        return cls(time=time, location=location, scheduled_activity=activity, text=content)


def parse_memory_update(text: str) -> MemoryUpdate:
    """Extract and validate the first JSON object embedded in ``text``.

    The object must carry all four list-of-string fields; anything else
    raises a specific error so callers can degrade to an empty update.
    """
    decoder = json.JSONDecoder()
    obj = None
    index = text.find("{")
    while index != -1:
        try:
            candidate, _end = decoder.raw_decode(text, index)
        except json.JSONDecodeError:
            index = text.find("{", index + 1)
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
        index = text.find("{", index + 1)
    if obj is None:
        raise NoJsonFoundError("no JSON object found in memory-update response")
    values = {}
    for name in MemoryUpdate.FIELDS:
        if name not in obj:
            raise MissingFieldError(name)
        value = obj[name]
        if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
            raise WrongTypeError(name)
        values[name] = list(value)
    return MemoryUpdate(**values)


@dataclass
class InteractionLogEntry:
    step_index: int
    agent_id: str
    time: SimTime
    situation_text: str
    prompt: list[ChatMessage]
    response: str
    action_category: str | None
    retrieved_count: int
    memory_update_counts: dict[str, int]
    memory_update_failed: bool
    memory_update_raw: str | None
    move: dict | None
    rejected_move: str | None
    role_updated: bool | None

    def as_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "agent_id": self.agent_id,
            "time": self.time.as_dict(),
            "situation": self.situation_text,
            "prompt": [m.as_dict() for m in self.prompt],
            "response": self.response,
            "action_category": self.action_category,
            "retrieved_count": self.retrieved_count,
            "memory_update_counts": self.memory_update_counts,
            "memory_update_failed": self.memory_update_failed,
            "memory_update_raw": self.memory_update_raw,
            "move": self.move,
            "rejected_move": self.rejected_move,
            "role_updated": self.role_updated,
        }


@dataclass
class InteractionLog:
    meta: dict
    entries: list[InteractionLogEntry] = field(default_factory=list)

    def responses(self) -> list[str]:
        return [entry.response for entry in self.entries]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"meta": self.meta}, ensure_ascii=False, sort_keys=True)]
        lines.extend(
            json.dumps(entry.as_dict(), ensure_ascii=False) for entry in self.entries
        )
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def load_log(path: str | Path) -> tuple[dict, list[dict]]:
    """Read a log file back as (meta, raw entry dicts)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"empty log file: {path}")
    head = json.loads(lines[0])
    if "meta" not in head:
        raise ValueError(f"log file lacks a meta line: {path}")
    entries = [json.loads(line) for line in lines[1:] if line.strip()]
    return head["meta"], entries


@dataclass
class RunParams:
    """Knobs recorded in every run manifest."""

    embed_dim: int = DEFAULT_DIM
    embed_seed: int = DEFAULT_SEED
    k_short: int = 4
    k_long: int = 8
    min_similarity: float = 0.0
    short_term_capacity: int = DEFAULT_SHORT_TERM_CAPACITY
    salience_decay: float = DEFAULT_SALIENCE_DECAY
    window: int = 10
    temperature: float = 0.7
    max_tokens: int | None = None

    def as_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "embed_seed": self.embed_seed,
            "k_short": self.k_short,
            "k_long": self.k_long,
            "min_similarity": self.min_similarity,
            "short_term_capacity": self.short_term_capacity,
            "salience_decay": self.salience_decay,
            "window": self.window,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


class Simulation:
    """Mutable run state; one instance per (dataset, config, provider) run."""

    def __init__(
        self,
        dataset: Dataset,
        roles: dict[str, RoleSetting],
        provider: Provider,
        config: SimulationConfig,
        seed: int = 0,
        params: RunParams | None = None,
        update_provider: Provider | None = None,
        area_map: AreaMap | None = None,
        role_update_slot: Slot | None = Slot.EXTRACURRICULAR,
    ):
        missing = [a for a in dataset.agent_ids if a not in roles]
        if missing:
            raise ValueError(f"roles missing for agents: {', '.join(missing)}")
        self.dataset = dataset
        self.roles = roles
        self.provider = provider
        self.update_provider = update_provider or provider
        self.config = config
        self.seed = seed
        self.params = params or RunParams()
        self.role_update_slot = role_update_slot
        self.gen_params = GenParams(
            temperature=self.params.temperature,
            max_tokens=self.params.max_tokens,
            seed=seed,
        )
        self.policy = RetrievalPolicy(
            k_short=self.params.k_short,
            k_long=self.params.k_long,
            min_similarity=self.params.min_similarity,
        )
        self.embedder = HashedBagEmbedder(
            dim=self.params.embed_dim, seed=self.params.embed_seed
        )
        self.stores = {
            agent_id: MemoryStore(
                agent_id,
                config,
                self.embedder,
                capacity=self.params.short_term_capacity,
                decay=self.params.salience_decay,
            )
            for agent_id in dataset.agent_ids
        }
        self.working_memories = {
            agent_id: WorkingMemory(window=self.params.window)
            for agent_id in dataset.agent_ids
        }
        self.env = EnvironmentState(area_map or AreaMap.default())
        self.entries: list[InteractionLogEntry] = []
        self.completed_steps = 0
        self.counters: dict[str, int] = {
            "action_calls": 0,
            "memory_update_calls": 0,
            "role_update_calls": 0,
            "memory_update_parse_failures": 0,
            "rejected_moves": 0,
        }

    # Aggregated instrumentation for the manifest

    def aggregate_counters(self) -> dict[str, int]:
        totals = dict(self.counters)
        for store in self.stores.values():
            for key, value in store.counters.items():
                totals[key] = totals.get(key, 0) + value
        return totals

    def run_id(self) -> str:
        material = json.dumps(
            {
                "config": self.config.as_dict(),
                "provider": self.provider.name,
                "seed": self.seed,
                "dataset": self.dataset.digest(),
                "params": self.params.as_dict(),
            },
            sort_keys=True,
        )
        return hashlib.sha256(material.encode("utf-8")).hexdigest()[:12]

    def log_meta(self) -> dict:
        return {
            "run_id": self.run_id(),
            "config": self.config.as_dict(),
            "provider": self.provider.name,
            "seed": self.seed,
            "dataset_digest": self.dataset.digest(),
            "params": self.params.as_dict(),
        }

    def log(self) -> InteractionLog:
        return InteractionLog(meta=self.log_meta(), entries=self.entries)

    # The step cycle

    def _with_context(self, exc: ProviderError, agent_id: str, index: int):
        exc.args = (f"[agent={agent_id} step={index}] {exc}",)
        return exc

    def step_agent(
        self, agent_id: str, situation: SituationFrame, step_index: int
    ) -> InteractionLogEntry:
        """Run one agent through the full cycle for one situation."""
        role = self.roles[agent_id]
        store = self.stores[agent_id]
        wm = self.working_memories[agent_id]

        if self.env.locations.get(agent_id) is None and situation.location:
            self.env.place(agent_id, situation.location)

        # 1. Retrieve (skipped entirely without a memory base).
        retrieved = []
        if self.config.memory_enabled:
            retrieved = store.retrieve(situation.text, self.policy)

        # 2-3. Prompt assembly and the action call.
        prompt = assemble_prompt(role, wm, situation, retrieved)
        try:
            self.counters["action_calls"] += 1
            response = self.provider.complete(prompt, self.gen_params)
        except ProviderError as exc:
            raise self._with_context(exc, agent_id, step_index)

        # 4. Working memory holds the bare situation, matching transcripts.
        wm.append_turn(situation.text, response)

        # 5. Memory update (skipped without a memory base).
        update_counts: dict[str, int] = {}
        update_failed = False
        update_raw = None
        if self.config.memory_enabled:
            update_prompt = MEMORY_UPDATE_TEMPLATE.format(
                situation=situation.text, recent=response
            )
            try:
                self.counters["memory_update_calls"] += 1
                update_text = self.update_provider.complete(
                    [ChatMessage("user", update_prompt)], self.gen_params
                )
            except ProviderError as exc:
                raise self._with_context(exc, agent_id, step_index)
            try:
                update = parse_memory_update(update_text)
            except MemoryUpdateError as exc:
                logger.warning(
                    "%s step %d: memory update unparseable (%s); continuing empty",
                    agent_id,
                    step_index,
                    exc,
                )
                self.counters["memory_update_parse_failures"] += 1
                update = MemoryUpdate()
                update_failed = True
                update_raw = update_text
            update_counts = store.apply_update(update, situation.time)

        # 6. Environment deltas from the response footer.
        label, move_target = parse_action_footer(response)
        move = None
        rejected_move = None
        if move_target:
            try:
                move = self.env.move_agent(agent_id, move_target)
            except UnknownAreaError:
                rejected_move = move_target
                self.counters["rejected_moves"] += 1
        category = None
        if label is not None:
            try:
                category = classify_action(role.kind, label).label
            except Exception:
                logger.warning("%s: unrecognized action label %r", agent_id, label)

        # 7. Daily reflection at the configured slot.
        role_updated = None
        if (
            self.role_update_slot is not None
            and situation.time.slot is self.role_update_slot
        ):
            summary = self._reflection_summary(agent_id, situation.time.day, response)
            try:
                self.counters["role_update_calls"] += 1
                _, role_updated = update_role_setting(role, summary, self.provider)
            except ProviderError as exc:
                raise self._with_context(exc, agent_id, step_index)

        return InteractionLogEntry(
            step_index=step_index,
            agent_id=agent_id,
            time=situation.time,
            situation_text=situation.text,
            prompt=prompt,
            response=response,
            action_category=category,
            retrieved_count=len(retrieved),
            memory_update_counts=update_counts,
            memory_update_failed=update_failed,
            memory_update_raw=update_raw,
            move=move,
            rejected_move=rejected_move,
            role_updated=role_updated,
        )

    def _reflection_summary(self, agent_id: str, day: int, latest_response: str) -> str:
        lines = [f"Day {day} reflections:"]
        for entry in self.entries:
            if entry.agent_id == agent_id and entry.time.day == day:
                first_line = entry.response.strip().splitlines()[0][:200]
                lines.append(f"- At {entry.time.slot.display}: {first_line}")
        lines.append(f"- Latest: {latest_response.strip().splitlines()[0][:200]}")
        return "\n".join(lines)

    # Whole-run driving

    def _slot_groups(self, start: int) -> list[list[int]]:
        groups: list[list[int]] = []
        current_ordinal = None
        for index in range(start, len(self.dataset.steps)):
            ordinal = self.dataset.steps[index].time.ordinal
            if ordinal != current_ordinal:
                groups.append([])
                current_ordinal = ordinal
            groups[-1].append(index)
        return groups

    def run(self, out_dir: str | Path | None = None, jobs: int = 1) -> InteractionLog:
        out_path = Path(out_dir) if out_dir else None
        if out_path:
            out_path.mkdir(parents=True, exist_ok=True)
        try:
            for group in self._slot_groups(self.completed_steps):
                self._run_slot(group, jobs)
                if out_path:
                    self.save_checkpoint(out_path)
        except ProviderError:
            # Stores may hold partial mutations from the failed slot; the
            # checkpoint from the last completed slot stays the resume point.
            if out_path:
                self._write_outputs(out_path, status="aborted")
            raise
        log = self.log()
        if out_path:
            self._write_outputs(out_path, status="completed")
        return log

    def _run_slot(self, group: list[int], jobs: int) -> None:
        steps = self.dataset.steps
        if jobs <= 1 or len(group) == 1:
            results = [
                self.step_agent(
                    steps[i].agent_id, SituationFrame.from_user_message(steps[i].user), i
                )
                for i in group
            ]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [
                    pool.submit(
                        self.step_agent,
                        steps[i].agent_id,
                        SituationFrame.from_user_message(steps[i].user),
                        i,
                    )
                    for i in group
                ]
                results = [f.result() for f in futures]
        self.entries.extend(results)
        self.completed_steps += len(group)

    # Outputs, checkpointing, resuming

    def manifest(self, status: str, out_path: Path) -> dict:
        outputs = [LOG_FILENAME] if (out_path / LOG_FILENAME).exists() else []
        return {
            "run_id": self.run_id(),
            "status": status,
            "config": self.config.as_dict(),
            "provider": self.provider.name,
            "update_provider": self.update_provider.name,
            "seed": self.seed,
            "params": self.params.as_dict(),
            "dataset_digest": self.dataset.digest(),
            "completed_steps": self.completed_steps,
            "total_steps": len(self.dataset.steps),
            "counters": self.aggregate_counters(),
            "log_digest": self.log().digest(),
            "written_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "outputs": outputs,
        }

    def _write_outputs(self, out_path: Path, status: str) -> None:
        self.log().save(out_path / LOG_FILENAME)
        manifest = self.manifest(status, out_path)
        (out_path / MANIFEST_FILENAME).write_text(
            json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def save_checkpoint(self, out_path: Path) -> None:
        ckpt = out_path / CHECKPOINT_DIRNAME
        (ckpt / "stores").mkdir(parents=True, exist_ok=True)
        (ckpt / "roles").mkdir(parents=True, exist_ok=True)
        for agent_id, store in self.stores.items():
            store.save(ckpt / "stores" / f"{agent_id}.mem")
        for agent_id, role in self.roles.items():
            save_role(role, ckpt / "roles" / f"{agent_id}.txt")
        state = {
            "completed_steps": self.completed_steps,
            "config": self.config.as_dict(),
            "seed": self.seed,
            "params": self.params.as_dict(),
            "dataset_digest": self.dataset.digest(),
            "locations": dict(sorted(self.env.locations.items())),
            "move_log": self.env.move_log,
            "working_memories": {
                agent_id: wm.turns for agent_id, wm in self.working_memories.items()
            },
            "counters": self.counters,
        }
        (ckpt / "state.json").write_text(
            json.dumps(state, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )
        self.log().save(out_path / LOG_FILENAME)

    def restore_checkpoint(self, out_path: Path) -> None:
        ckpt = Path(out_path) / CHECKPOINT_DIRNAME
        state = json.loads((ckpt / "state.json").read_text(encoding="utf-8"))
        if state["dataset_digest"] != self.dataset.digest():
            raise ValueError("checkpoint was produced from a different dataset")
        if state["config"] != self.config.as_dict():
            raise ValueError("checkpoint was produced under a different config")
        self.completed_steps = state["completed_steps"]
        self.counters = state["counters"]
        self.env.locations = dict(state["locations"])
        self.env.move_log = list(state["move_log"])
        for agent_id, turns in state["working_memories"].items():
            wm = self.working_memories[agent_id]
            wm.turns = [tuple(turn) for turn in turns]
        for agent_id in self.dataset.agent_ids:
            self.stores[agent_id] = MemoryStore.load(
                ckpt / "stores" / f"{agent_id}.mem", self.config, self.embedder
            )
            self.roles[agent_id] = load_role(ckpt / "roles" / f"{agent_id}.txt")
        _meta, raw_entries = load_log(Path(out_path) / LOG_FILENAME)
        self.entries = [
            _entry_from_dict(raw) for raw in raw_entries[: self.completed_steps]
        ]


def _entry_from_dict(raw: dict) -> InteractionLogEntry:
    return InteractionLogEntry(
        step_index=raw["step_index"],
        agent_id=raw["agent_id"],
        time=SimTime.at(raw["time"]["day"], Slot.from_label(raw["time"]["slot"])),
        situation_text=raw["situation"],
        prompt=[ChatMessage(m["role"], m["content"]) for m in raw["prompt"]],
        response=raw["response"],
        action_category=raw["action_category"],
        retrieved_count=raw["retrieved_count"],
        memory_update_counts=raw["memory_update_counts"],
        memory_update_failed=raw["memory_update_failed"],
        memory_update_raw=raw["memory_update_raw"],
        move=raw["move"],
        rejected_move=raw["rejected_move"],
        role_updated=raw["role_updated"],
    )


_AGENT_ID_RE = re.compile(r"^Agent ID:\s*(.+?)\s*$", re.MULTILINE)

_EMPTY_UPDATE_JSON = json.dumps(MemoryUpdate().as_dict())


class ReplayBundle(Provider):
    """Replays each agent's recorded answers in order, routed by agent id.

    Transcripts only record action answers, so memory-update prompts get a
    canned empty update and role-update prompts report no significant change.
    Per-agent cursors make the bundle safe under slot-parallel stepping (one
    thread per agent); exhausting an agent's answers raises.
    """

    def __init__(self, answers_by_agent: dict[str, list[str]], name: str = "replay"):
        self._by_agent = {
            agent_id: ReplayProvider(answers, name=f"{name}:{agent_id}")
            for agent_id, answers in answers_by_agent.items()
        }
        self.name = name

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "ReplayBundle":
        answers: dict[str, list[str]] = {a: [] for a in dataset.agent_ids}
        for step in dataset.steps:
            answers[step.agent_id].append(step.reference)
        return cls(answers)

    def complete(self, messages, params: GenParams | None = None) -> str:
        content = messages[-1].content
        if content.startswith(MEMORY_UPDATE_HEADER):
            return _EMPTY_UPDATE_JSON
        if content.startswith(ROLE_UPDATE_HEADER):
            return (
                "No significant updates are needed; the role setting remains "
                "largely unchanged."
            )
        match = _AGENT_ID_RE.search(messages[0].content)
        if not match or match.group(1) not in self._by_agent:
            raise ProviderError("replay bundle cannot identify the acting agent")
        return self._by_agent[match.group(1)].complete(messages, params)


def run_simulation(
    dataset: Dataset,
    roles: dict[str, RoleSetting],
    provider: Provider,
    config: SimulationConfig,
    seed: int = 0,
    params: RunParams | None = None,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    resume: bool = False,
    update_provider: Provider | None = None,
) -> InteractionLog:
    """Run every dataset step under one configuration; returns the log."""
    sim = Simulation(
        dataset,
        roles,
        provider,
        config,
        seed=seed,
        params=params,
        update_provider=update_provider,
    )
    if resume:
        if not out_dir:
            raise ValueError("resume requires an output directory")
        sim.restore_checkpoint(Path(out_dir))
    return sim.run(out_dir=out_dir, jobs=jobs)
