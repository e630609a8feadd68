"""Menu interaction state machine driven by pupil tasks and MI shortcuts.

A sweeping arrow advances around the current ring of entries on a fixed
dwell; a pupil task (PAR) picks the highlighted entry.  Picking a main-menu
item opens a confirmation ring of exactly four entries (the item, its two
ring neighbors, go-back); picking the item again commits it.  In multimodal
mode a recognized motor-imagery label can fire its bound item directly,
skipping confirmation.  An external push button overlays a three-choice
simple-answers ring from anywhere.

States are immutable snapshots; `on_event` is a pure function, so whole
sessions replay from event logs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping

log = logging.getLogger(__name__)

VIEW_MAIN = "main_menu"
VIEW_CONFIRM = "confirmation"
VIEW_ANSWERS = "simple_answers"
VIEW_TRAINING = "training"
VIEW_SPELLER = "speller_stub"

MODE_PAR_ONLY = "par_only"
MODE_MULTIMODAL = "multimodal"

GO_BACK = "go_back"

ACTION_CAREGIVER = "caregiver_call"
ACTION_TRAINING = "open_training"
ACTION_SPELLER = "open_speller"
ACTION_ANSWER = "answer"
ACTION_KEYSTROKE = "keystroke"

ANSWER_CAPTIONS = (("yes", "Yes"), ("no", "No"), ("pass", "Don't want to answer"))


@dataclass(frozen=True)
class MenuItem:
    id: str
    caption: str
    action: str


@dataclass(frozen=True)
class MenuDef:
    """The root ring plus per-menu pacing and the speller stub's keys."""

    items: tuple[MenuItem, ...]
    dwell: float = 1.0
    speller_keys: tuple[str, ...] = ("A", "B", "C")

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValueError("a menu ring needs at least two items")
        ids = [i.id for i in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("menu item ids must be unique")
        actions = {i.action for i in self.items}
        if ACTION_CAREGIVER not in actions or ACTION_TRAINING not in actions:
            raise ValueError("root menu must offer caregiver call and training access")
        if self.dwell <= 0:
            raise ValueError("dwell must be positive")

    def item(self, item_id: str) -> MenuItem:
        for i in self.items:
            if i.id == item_id:
                return i
        raise KeyError(item_id)

    def index(self, item_id: str) -> int:
        for k, i in enumerate(self.items):
            if i.id == item_id:
                return k
        raise KeyError(item_id)


def default_menu() -> MenuDef:
    return MenuDef(
        items=(
            MenuItem("speller", "Speller", ACTION_SPELLER),
            MenuItem("caregiver", "Caregiver", ACTION_CAREGIVER),
            MenuItem("training", "Training", ACTION_TRAINING),
            MenuItem("entertainment", "Entertainment", "custom:entertainment"),
            MenuItem("settings", "Settings", "custom:settings"),
        )
    )


@dataclass(frozen=True)
class Entry:
    """One slot of the currently swept ring."""

    id: str
    caption: str


@dataclass(frozen=True)
class UiEvent:
    kind: str  # par_task | mi | external_button | tick
    timestamp: float
    label: str | None = None  # mi events
    dt: float | None = None  # tick events


@dataclass(frozen=True)
class Action:
    kind: str
    item_id: str | None
    timestamp: float
    payload: str | None = None


@dataclass(frozen=True)
class UiState:
    menu: MenuDef
    view: str
    entries: tuple[Entry, ...]
    highlighted: int
    mode: str
    clock: float
    selection_origin: str | None = None  # item that opened the confirmation
    shortcuts: tuple[tuple[str, str], ...] = ()  # (mi label, item id)
    overlay_return: "UiState | None" = None

    def shortcut_for(self, label: str) -> str | None:
        for lab, item_id in self.shortcuts:
            if lab == label:
                return item_id
        return None


def _main_entries(menu: MenuDef) -> tuple[Entry, ...]:
    return tuple(Entry(i.id, i.caption) for i in menu.items)


def _confirm_entries(menu: MenuDef, item_id: str) -> tuple[Entry, ...]:
    idx = menu.index(item_id)
    n = len(menu.items)
    target = menu.items[idx]
    left = menu.items[(idx - 1) % n]
    right = menu.items[(idx + 1) % n]
    return (
        Entry(target.id, target.caption),
        Entry(left.id, left.caption),
        Entry(right.id, right.caption),
        Entry(GO_BACK, "Go back"),
    )


def _answer_entries() -> tuple[Entry, ...]:
    return tuple(Entry(i, caption) for i, caption in ANSWER_CAPTIONS)


def _training_entries() -> tuple[Entry, ...]:
    return (Entry(GO_BACK, "Go back"), Entry("repeat_run", "Run again"))


def _speller_entries(menu: MenuDef) -> tuple[Entry, ...]:
    keys = tuple(Entry(f"key_{k}", k) for k in menu.speller_keys)
    return keys + (Entry(GO_BACK, "Go back"),)


def initial_state(
    menu: MenuDef,
    mode: str = MODE_PAR_ONLY,
    shortcuts: Mapping[str, str] | None = None,
) -> UiState:
    active = tuple((lab, item) for lab, item in (shortcuts or {}).items())
    return UiState(
        menu=menu,
        view=VIEW_MAIN,
        entries=_main_entries(menu),
        highlighted=0,
        mode=mode,
        clock=0.0,
        shortcuts=active,
    )


def tick(state: UiState, dt: float) -> UiState:
    """Advance the sweeping arrow: one step per elapsed dwell period."""
    if dt <= 0:
        raise ValueError("tick needs a positive time step")
    dwell = state.menu.dwell
    steps = int((state.clock + dt) // dwell) - int(state.clock // dwell)
    highlighted = (state.highlighted + steps) % len(state.entries)
    return replace(state, highlighted=highlighted, clock=state.clock + dt)


def _emit(state: UiState, item: MenuItem) -> tuple[UiState, list[Action]]:
    """Fire an item's action and land on the view it opens."""
    action = Action(item.action, item.id, state.clock)
    if item.action == ACTION_TRAINING:
        next_state = replace(
            state, view=VIEW_TRAINING, entries=_training_entries(),
            highlighted=0, selection_origin=None,
        )
    elif item.action == ACTION_SPELLER:
        next_state = replace(
            state, view=VIEW_SPELLER, entries=_speller_entries(state.menu),
            highlighted=0, selection_origin=None,
        )
    else:
        next_state = _to_main(state, focus=item.id)
    return next_state, [action]


def _to_main(state: UiState, focus: str | None = None) -> UiState:
    entries = _main_entries(state.menu)
    highlighted = state.menu.index(focus) if focus is not None else 0
    return replace(
        state, view=VIEW_MAIN, entries=entries,
        highlighted=highlighted, selection_origin=None,
    )


def _par_task(state: UiState) -> tuple[UiState, list[Action]]:
    entry = state.entries[state.highlighted]
    if state.view == VIEW_MAIN:
        return (
            replace(
                state, view=VIEW_CONFIRM, entries=_confirm_entries(state.menu, entry.id),
                highlighted=0, selection_origin=entry.id,
            ),
            [],
        )
    if state.view == VIEW_CONFIRM:
        if entry.id == GO_BACK:
            return _to_main(state, focus=state.selection_origin), []
        if entry.id == state.selection_origin:
            return _emit(state, state.menu.item(entry.id))
        # a neighbor re-targets the confirmation instead of committing
        return (
            replace(
                state, entries=_confirm_entries(state.menu, entry.id),
                highlighted=0, selection_origin=entry.id,
            ),
            [],
        )
    if state.view == VIEW_ANSWERS:
        action = Action(ACTION_ANSWER, None, state.clock, payload=entry.id)
        restored = state.overlay_return
        restored = replace(
            restored, clock=state.clock, mode=state.mode, shortcuts=state.shortcuts,
            overlay_return=None,
        )
        return restored, [action]
    if state.view == VIEW_TRAINING:
        if entry.id == GO_BACK:
            return _to_main(state), []
        return state, [Action("custom:repeat_training", entry.id, state.clock)]
    if state.view == VIEW_SPELLER:
        if entry.id == GO_BACK:
            return _to_main(state), []
        return state, [Action(ACTION_KEYSTROKE, entry.id, state.clock, payload=entry.caption)]
    raise AssertionError(f"unhandled view {state.view}")


def _mi(state: UiState, label: str) -> tuple[UiState, list[Action]]:
    if state.mode != MODE_MULTIMODAL:
        log.debug("mi event %r ignored: interaction mode is %s", label, state.mode)
        return state, []
    item_id = state.shortcut_for(label)
    if item_id is None:
        log.debug("mi event %r ignored: no shortcut bound", label)
        return state, []
    if state.view != VIEW_MAIN:
        log.debug("mi event %r ignored: shortcuts act on the main menu only", label)
        return state, []
    return _emit(state, state.menu.item(item_id))


def _external_button(state: UiState) -> tuple[UiState, list[Action]]:
    if state.view == VIEW_ANSWERS:
        log.debug("button press ignored: answers overlay already open")
        return state, []
    snapshot = replace(state, overlay_return=None)
    return (
        replace(
            state, view=VIEW_ANSWERS, entries=_answer_entries(),
            highlighted=0, overlay_return=snapshot,
        ),
        [],
    )


def on_event(state: UiState, event: UiEvent) -> tuple[UiState, list[Action]]:
    """Pure transition: same (state, event) always gives the same result."""
    if event.timestamp < state.clock:
        raise ValueError(
            f"event at t={event.timestamp} is older than the state clock {state.clock}"
        )
    if event.kind == "tick":
        return tick(state, event.dt), []
    if event.kind == "par_task":
        return _par_task(state)
    if event.kind == "mi":
        return _mi(state, event.label)
    if event.kind == "external_button":
        return _external_button(state)
    raise ValueError(f"unknown event kind {event.kind!r}")


# ---------------------------------------------------------------------------
# Multimodal gate


@dataclass(frozen=True)
class ModeThresholds:
    sessions: int = 3  # how many recent sessions must all qualify
    min_separability: float = 1.0
    min_consistency: float = 0.5


@dataclass(frozen=True)
class SessionScore:
    separability: float
    consistency: Mapping[str, float]


@dataclass(frozen=True)
class ModeDecision:
    mode: str
    eligible_tasks: frozenset[str] = field(default_factory=frozenset)


def unlock_multimodal(
    history: list[SessionScore], thresholds: ModeThresholds | None = None
) -> ModeDecision:
    """All-of-the-last-K gate from training metrics to interaction mode.

    Multimodal requires every one of the last K sessions to clear the
    separability floor with every trained class consistent; one bad session
    in the window drops the mode back to pupil-only.  A task is shortcut-
    eligible only if it cleared the consistency floor in each of those
    sessions itself.
    """
    th = thresholds or ModeThresholds()
    if len(history) < th.sessions:
        return ModeDecision(MODE_PAR_ONLY)
    window = history[-th.sessions :]
    for score in window:
        if score.separability < th.min_separability:
            return ModeDecision(MODE_PAR_ONLY)
        if not score.consistency:
            return ModeDecision(MODE_PAR_ONLY)
        if any(v < th.min_consistency for v in score.consistency.values()):
            return ModeDecision(MODE_PAR_ONLY)
    eligible = set(window[0].consistency)
    for score in window[1:]:
        eligible &= set(score.consistency)
    eligible = {
        t for t in eligible
        if all(s.consistency[t] >= th.min_consistency for s in window)
    }
    return ModeDecision(MODE_MULTIMODAL, frozenset(eligible))
